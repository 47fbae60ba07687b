//! Drives the binary through every subcommand.

use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aspectsum"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SPEC: &str = "n_documents = 120\nn_patients = 100\npositive_ratio = 0.3\nsignal_strength = 0.5\nnoise_vocab_size = 200\nseed = 4\n\
[aspect_signal_tokens]\nplain = [\"eloped\", \"homeless\"]\nriskfactor = [\"suicidal\", \"overdose\"]\ntimeline = [\"relapsed\", \"abrupt\"]\n";

#[test]
fn subcommands_chain_together() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("spec.toml"), SPEC).unwrap();

    let report = ok(d, &["synth", "--spec", "spec.toml", "--out", "corpus.jsonl"]);
    assert!(report.contains("\"total\": 120"));

    // re-split the same documents with a different seed
    ok(d, &["split", "--in", "corpus.jsonl", "--fractions", "0.6,0.2,0.2", "--seed", "9", "--out", "resplit.jsonl"]);
    assert_eq!(std::fs::read_to_string(d.join("resplit.jsonl")).unwrap().lines().count(), 120);

    for (aspect, file) in [("plain", "p.jsonl"), ("riskfactor", "r.jsonl"), ("timeline", "t.jsonl")] {
        ok(d, &["summarize", "--corpus", "corpus.jsonl", "--aspect", aspect, "--mock", "seed=3", "--out", file]);
    }

    let mut preds = Vec::new();
    for seed in ["0", "1"] {
        for (aspect, file) in [("plain", "p.jsonl"), ("riskfactor", "r.jsonl")] {
            let model = format!("{aspect}{seed}.json");
            ok(d, &["train", "--summaries", file, "--corpus", "corpus.jsonl", "--seed", seed, "--out", &model]);
            let pred = format!("{aspect}_seed{seed}.csv");
            ok(d, &["predict", "--model", &model, "--summaries", file, "--corpus", "corpus.jsonl", "--split", "test", "--out", &pred]);
            preds.push(pred);
        }
    }
    let header = std::fs::read_to_string(d.join("plain_seed0.csv")).unwrap();
    assert!(header.starts_with("doc_id,probability,label\n"));

    let mut args = vec!["infodiff", "--preds"];
    args.extend(preds.iter().map(String::as_str));
    args.extend([
        "--groups",
        "plain=plain_seed0,plain_seed1",
        "riskfactor=riskfactor_seed0,riskfactor_seed1",
        "--out",
        "infodiff.json",
        "--scores-csv",
        "scores.csv",
        "--pairs-csv",
        "pairs.csv",
    ]);
    ok(d, &args);
    let scores = std::fs::read_to_string(d.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 1 + 3);
    // 1 intra pair per group + 4 inter pairs
    assert_eq!(std::fs::read_to_string(d.join("pairs.csv")).unwrap().lines().count(), 1 + 2 + 4);

    ok(d, &["integrate", "merged", "--plain", "p.jsonl", "--risk", "r.jsonl", "--time", "t.jsonl", "--out", "merged.jsonl"]);
    ok(d, &["integrate", "union", "--plain", "p.jsonl", "--risk", "r.jsonl", "--time", "t.jsonl", "--out", "union.jsonl"]);
    assert_eq!(std::fs::read_to_string(d.join("merged.jsonl")).unwrap().lines().count(), 120);
    assert_eq!(std::fs::read_to_string(d.join("union.jsonl")).unwrap().lines().count(), 360);

    ok(d, &["vote", "soft", "--preds", "plain_seed0.csv", "riskfactor_seed0.csv", "plain_seed1.csv", "--out", "soft.csv"]);
    ok(d, &["vote", "any", "--preds", "plain_seed0.csv", "riskfactor_seed0.csv", "plain_seed1.csv", "--out", "any.csv"]);

    let metrics = ok(d, &["metrics", "--preds", "any.csv", "--corpus", "corpus.jsonl"]);
    let v: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    for key in ["AUROC", "AUPRC", "MaAvg F1", "Neg F1", "Pos F1", "positive_prediction_ratio"] {
        assert!(v.get(key).is_some(), "{key} missing from {metrics}");
    }
}

#[test]
fn run_and_report_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("spec.toml"), SPEC).unwrap();
    ok(d, &["synth", "--spec", "spec.toml", "--out", "corpus.jsonl"]);
    std::fs::write(
        d.join("exp.toml"),
        "corpus = \"corpus.jsonl\"\nout_dir = \"out\"\nmock = \"seed=1\"\nseeds = [0, 1, 2]\n",
    )
    .unwrap();
    let stdout = ok(d, &["run", "--config", "exp.toml"]);
    assert!(stdout.contains("artifacts"));
    let mean = std::fs::read(d.join("out/report/table_mean.csv")).unwrap();
    std::fs::remove_dir_all(d.join("out/report")).unwrap();
    ok(d, &["report", "--run-dir", "out", "--corpus", "corpus.jsonl"]);
    assert_eq!(std::fs::read(d.join("out/report/table_mean.csv")).unwrap(), mean);
}

#[test]
fn failures_exit_with_stage_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // unreadable config → config stage
    let out = bin(d, &["run", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));
    // malformed corpus → corpus stage
    std::fs::write(d.join("bad.jsonl"), "{not json\n").unwrap();
    let out = bin(d, &["metrics", "--preds", "x.csv", "--corpus", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corpus stage failed"));
    // mismatched vote inputs → integrate stage
    std::fs::write(d.join("a.csv"), "doc_id,probability,label\nD1,0.2,0\n").unwrap();
    std::fs::write(d.join("b.csv"), "doc_id,probability,label\nD2,0.2,0\n").unwrap();
    let out = bin(d, &["vote", "soft", "--preds", "a.csv", "a.csv", "b.csv", "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(7));
}
