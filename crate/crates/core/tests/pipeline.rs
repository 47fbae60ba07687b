//! Harness-level behaviour on synthetic corpora.

use std::collections::{BTreeMap, HashSet};

use aspectsum::classifier::{tokenize, BowSvmConfig, BowSvmModel};
use aspectsum::corpus::{generate_synthetic, Corpus, Split, SyntheticSpec};
use aspectsum::harness::run::{RunManifest, Stage};
use aspectsum::harness::{run_experiment, train_and_predict, ExperimentConfig, Plan, Strategy};
use aspectsum::metrics::{auroc, gold_labels};
use aspectsum::summarizer::{
    summarize_corpus, Aspect, AspectPrompt, LlmEndpointConfig, MockBackend, SummarizeOptions, SummarySet,
};

fn summaries(corpus: &Corpus, seed: u64) -> BTreeMap<Aspect, SummarySet> {
    Aspect::ALL
        .into_iter()
        .map(|a| {
            let out = summarize_corpus(
                corpus,
                &AspectPrompt::shipped(a),
                &MockBackend::new(seed),
                &LlmEndpointConfig::default(),
                &SummarizeOptions::default(),
            )
            .unwrap();
            (a, out.set)
        })
        .collect()
}

fn plan(strategies: Vec<Strategy>, seeds: u64) -> Plan {
    Plan {
        aspects: Aspect::ALL.to_vec(),
        strategies,
        seeds: (0..seeds).collect(),
        classifier: BowSvmConfig::default(),
        union_tag_aspect: false,
        workers: 2,
    }
}

#[test]
fn zero_signal_gives_chance_auroc() {
    let mut spec = SyntheticSpec::with_defaults(1500, 0.3, 21);
    spec.signal_strength = 0.0;
    let corpus = generate_synthetic(&spec).unwrap();
    let results = train_and_predict(&corpus, &summaries(&corpus, 1), &plan(vec![Strategy::None], 3)).unwrap();
    for a in Aspect::ALL {
        for run in &results.condition(Split::Test, a.as_str()).unwrap().runs {
            let v = auroc(run, &gold_labels(run, &corpus).unwrap()).unwrap();
            // 300 test documents: the chance-level AUROC sd is about 0.035
            assert!((v - 0.5).abs() < 0.12, "{a}: {v}");
        }
    }
}

#[test]
fn vocabulary_uses_training_documents_only() {
    let corpus = generate_synthetic(&SyntheticSpec::with_defaults(200, 0.3, 22)).unwrap();
    let sums = summaries(&corpus, 2);
    let set = &sums[&Aspect::Plain];
    let (mut train, mut labels) = (Vec::new(), Vec::new());
    let mut test_only: HashSet<String> = HashSet::new();
    let mut train_tokens: HashSet<String> = HashSet::new();
    for (doc, rec) in corpus.documents().iter().zip(&set.records) {
        if corpus.split_of(&doc.doc_id) == Some(Split::Train) {
            train.push(rec.summary_text.clone());
            labels.push(doc.label);
            train_tokens.extend(tokenize(&rec.summary_text));
        } else {
            test_only.extend(tokenize(&rec.summary_text));
        }
    }
    // plant a token that only test documents contain
    let mut test_texts: Vec<String> = set.records.iter().map(|r| format!("{} zzleak zzleak", r.summary_text)).collect();
    test_texts.truncate(3);
    test_only.retain(|t| !train_tokens.contains(t));
    test_only.insert("zzleak".into());
    let model = BowSvmModel::train(&train, &labels, &BowSvmConfig::default(), 0).unwrap();
    assert_eq!(model.vocabulary.built_from(), Split::Train);
    assert!(model.vocabulary.tokens().iter().all(|t| !test_only.contains(t)));
    assert!(model.vocabulary.tokens().iter().all(|t| train_tokens.contains(t)));
}

fn write_config(dir: &std::path::Path, body: &str) -> ExperimentConfig {
    let corpus = generate_synthetic(&SyntheticSpec::with_defaults(150, 0.3, 23)).unwrap();
    corpus.save(&dir.join("corpus.jsonl")).unwrap();
    let path = dir.join("exp.toml");
    std::fs::write(&path, format!("corpus = \"corpus.jsonl\"\nout_dir = \"out\"\n{body}")).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

fn manifest(cfg: &ExperimentConfig) -> RunManifest {
    serde_json::from_slice(&std::fs::read(cfg.out_dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn single_seed_reports_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mock = \"seed=1\"\nseeds = [3]\n");
    run_experiment(&cfg).unwrap();
    let table = std::fs::read_to_string(cfg.out_dir.join("report/table_std.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], ["condition", "split", "n"]);
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], "1");
        assert!(cells[3..].iter().all(|c| *c == "0" || c.starts_with("undefined") || c.starts_with("ranking")), "{line}");
    }
    // the summary cache is reused on a second run
    let cache: Vec<_> = std::fs::read_dir(cfg.cache_dir()).unwrap().collect();
    assert_eq!(cache.len(), 3);
    run_experiment(&cfg).unwrap();
    assert_eq!(std::fs::read_dir(cfg.cache_dir()).unwrap().count(), 3);
    assert_eq!(manifest(&cfg).status, "ok");
    assert!(manifest(&cfg).files.iter().all(|f| !f.path.starts_with("cache/")));
}

#[test]
fn failed_stage_is_recorded_and_artifacts_kept() {
    let dir = tempfile::tempdir().unwrap();
    // a vocabulary threshold no token reaches makes training fail
    let cfg = write_config(dir.path(), "mock = \"seed=1\"\nseeds = [0]\n[classifier]\nmin_frequency = 100000\n");
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Train);
    assert_eq!(err.stage.exit_code(), 5);
    let m = manifest(&cfg);
    assert_eq!(m.status, "failed");
    assert_eq!(m.failed_stage, Some(Stage::Train));
    assert!(m.files.iter().any(|f| f.path == "summaries/plain.jsonl"));
}

#[test]
fn external_predictions_flow_through_metrics_and_infodiff() {
    let dir = tempfile::tempdir().unwrap();
    // produce predictions with one run, then consume them as external files
    let first = write_config(dir.path(), "mock = \"seed=1\"\nseeds = [0, 1]\n");
    run_experiment(&first).unwrap();
    let path = dir.path().join("ext.toml");
    std::fs::write(
        &path,
        "corpus = \"corpus.jsonl\"\nout_dir = \"out_ext\"\nmodel_kind = \"external_predictions\"\npredictions_dir = \"out/preds\"\nseeds = [0, 1]\n",
    )
    .unwrap();
    let ext = ExperimentConfig::load(&path).unwrap();
    run_experiment(&ext).unwrap();
    for f in ["infodiff/report.json", "infodiff/scores.csv"] {
        assert_eq!(
            std::fs::read(first.out_dir.join(f)).unwrap(),
            std::fs::read(ext.out_dir.join(f)).unwrap(),
            "{f}"
        );
    }
    // external files cover the test split only; its rows must agree
    let test_rows = |dir: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(dir.join("report/table_mean.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.contains(",dev,"))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(test_rows(&first.out_dir), test_rows(&ext.out_dir));
    // test-split prediction files are identical, including the recomputed votes
    for name in ["softvote_seed1.csv", "anyvote_seed0.csv", "plain_seed1.csv"] {
        assert_eq!(
            std::fs::read(first.out_dir.join("preds").join(name)).unwrap(),
            std::fs::read(ext.out_dir.join("preds").join(name)).unwrap(),
            "{name}"
        );
    }
}
