use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aspectsum::classifier::{ingest_predictions, BowSvmConfig, BowSvmModel, RunSource, Weighting};
use aspectsum::corpus::{generate_synthetic, load_corpus, load_documents, split_by_patient, Split, SyntheticSpec};
use aspectsum::harness::run::{report_from_run_dir, StageExt};
use aspectsum::harness::{run_experiment, ExperimentConfig, HarnessError, Stage};
use aspectsum::infodiff::{build_difference_report, RunGroup};
use aspectsum::integration::{build_merged, build_union, pool, VoteStrategy, MERGE_SEPARATOR};
use aspectsum::metrics::{evaluate, gold_labels};
use aspectsum::summarizer::{
    summarize_corpus, Aspect, AspectPrompt, ChatBackend, HttpBackend, LlmEndpointConfig, MockBackend,
    SummarizeOptions, SummarySet,
};
use aspectsum::util::write_jsonl;

#[derive(Parser)]
#[command(name = "aspectsum", version, about = "Aspect-oriented summarization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign patient-disjoint train/dev/test splits.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        /// Train, dev and test fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.7,0.1,0.2")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize every corpus document under one aspect prompt.
    Summarize(SummarizeArgs),
    /// Train a bag-of-words SVM on the train-split summaries.
    Train(TrainArgs),
    /// Predict with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        summaries: PathBuf,
        /// Restrict to one split (needs --corpus).
        #[arg(long, requires = "corpus")]
        split: Option<Split>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kendall-tau information difference between groups of runs.
    Infodiff {
        /// Prediction CSVs; each run id is its file stem.
        #[arg(long, num_args = 1.., required = true)]
        preds: Vec<PathBuf>,
        /// `aspect=run1,run2` per group.
        #[arg(long, num_args = 1.., required = true)]
        groups: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Per-pair distances (boxplot data).
        #[arg(long)]
        pairs_csv: Option<PathBuf>,
        /// Intra/inter D scores (bar data).
        #[arg(long)]
        scores_csv: Option<PathBuf>,
    },
    /// Build a merged or union dataset from three aligned summary sets.
    Integrate {
        #[arg(value_enum)]
        kind: IntegrateKind,
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        risk: PathBuf,
        #[arg(long)]
        time: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool three prediction lists by soft or any voting.
    Vote {
        #[arg(value_enum)]
        kind: VoteKind,
        #[arg(long, num_args = 3, required = true)]
        preds: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a prediction list against corpus labels.
    Metrics {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline from a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild metrics and report tables from a run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "plain,riskfactor,timeline")]
        aspects: Vec<Aspect>,
    },
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    aspect: Aspect,
    /// Base URL of an OpenAI-style chat completions API.
    #[arg(long, required_unless_present = "mock", conflicts_with = "mock")]
    endpoint: Option<String>,
    /// Deterministic mock backend, e.g. `seed=7`.
    #[arg(long)]
    mock: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    max_summary_tokens: Option<usize>,
    /// Keep going when some documents fail.
    #[arg(long)]
    permit_partial: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    summaries: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_frequency: Option<usize>,
    #[arg(long)]
    tfidf: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegrateKind {
    Merged,
    Union,
}

#[derive(Clone, Copy, ValueEnum)]
enum VoteKind {
    Soft,
    Any,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec).stage(Stage::Config)?;
            let spec: SyntheticSpec = toml::from_str(&text).stage(Stage::Config)?;
            let corpus = generate_synthetic(&spec).stage(Stage::Corpus)?;
            corpus.save(&out).stage(Stage::Corpus)?;
            print_json(&corpus.split_report())
        }
        Command::Split {
            input,
            fractions,
            seed,
            out,
        } => {
            let docs = load_documents(&input).stage(Stage::Corpus)?;
            let fr: [f64; 3] = fractions
                .try_into()
                .map_err(|f: Vec<f64>| HarnessError::new(Stage::Config, format!("need 3 fractions, got {}", f.len())))?;
            let corpus = split_by_patient(docs, fr, seed).stage(Stage::Corpus)?;
            corpus.save(&out).stage(Stage::Corpus)?;
            print_json(&corpus.split_report())
        }
        Command::Summarize(args) => summarize(args),
        Command::Train(args) => train(args),
        Command::Predict {
            model,
            summaries,
            split,
            corpus,
            out,
        } => {
            let model = BowSvmModel::load(&model).stage(Stage::Train)?;
            let set = SummarySet::load(&summaries).stage(Stage::Summarize)?;
            let keep: Option<Vec<bool>> = match (split, corpus) {
                (Some(split), Some(path)) => {
                    let corpus = load_corpus(&path).stage(Stage::Corpus)?;
                    Some(set.records.iter().map(|r| corpus.split_of(&r.doc_id) == Some(split)).collect())
                }
                _ => None,
            };
            let items = set
                .records
                .iter()
                .enumerate()
                .filter(|(i, _)| keep.as_ref().is_none_or(|k| k[*i]))
                .map(|(_, r)| (r.doc_id.as_str(), r.summary_text.as_str()));
            let source = RunSource::new(set.aspect.as_str(), Some(model.model.train_seed), "bow_svm");
            let preds = model.predict_texts(items, source).stage(Stage::Train)?;
            preds.write_csv(&out).stage(Stage::Train)
        }
        Command::Infodiff {
            preds,
            groups,
            out,
            pairs_csv,
            scores_csv,
        } => infodiff(&preds, &groups, &out, pairs_csv.as_deref(), scores_csv.as_deref()),
        Command::Integrate {
            kind,
            plain,
            risk,
            time,
            out,
        } => {
            let load = |p: &Path| SummarySet::load(p).stage(Stage::Integrate);
            let (p, r, t) = (load(&plain)?, load(&risk)?, load(&time)?);
            match kind {
                IntegrateKind::Merged => {
                    let m = build_merged(&p, &r, &t, MERGE_SEPARATOR).stage(Stage::Integrate)?;
                    write_jsonl(&out, &m.records).stage(Stage::Integrate)
                }
                IntegrateKind::Union => {
                    let u = build_union(&p, &r, &t).stage(Stage::Integrate)?;
                    write_jsonl(&out, &u.records).stage(Stage::Integrate)
                }
            }
        }
        Command::Vote { kind, preds, out } => {
            let lists = preds
                .iter()
                .map(|p| ingest_predictions(p, RunSource::new(file_stem(p), None, "file")))
                .collect::<Result<Vec<_>, _>>()
                .stage(Stage::Integrate)?;
            let strategy = match kind {
                VoteKind::Soft => VoteStrategy::Softvote,
                VoteKind::Any => VoteStrategy::Anyvote,
            };
            let pooled = pool(strategy, [&lists[0], &lists[1], &lists[2]]).stage(Stage::Integrate)?;
            pooled.write_csv(&out).stage(Stage::Integrate)
        }
        Command::Metrics { preds, corpus, out } => {
            let corpus = load_corpus(&corpus).stage(Stage::Corpus)?;
            let list = ingest_predictions(&preds, RunSource::new(file_stem(&preds), None, "file")).stage(Stage::Metrics)?;
            let gold = gold_labels(&list, &corpus).stage(Stage::Metrics)?;
            let report = evaluate(&list, &gold).stage(Stage::Metrics)?;
            match out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&report).stage(Stage::Metrics)?;
                    std::fs::write(path, text + "\n").stage(Stage::Metrics)
                }
                None => print_json(&report),
            }
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config).stage(Stage::Config)?;
            let manifest = run_experiment(&cfg)?;
            println!(
                "wrote {} artifacts to {}",
                manifest.files.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Report {
            run_dir,
            corpus,
            aspects,
        } => {
            let corpus = load_corpus(&corpus).stage(Stage::Corpus)?;
            report_from_run_dir(&run_dir, &corpus, &aspects)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), HarnessError> {
    println!("{}", serde_json::to_string_pretty(value).stage(Stage::Report)?);
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn summarize(a: SummarizeArgs) -> Result<(), HarnessError> {
    let corpus = load_corpus(&a.corpus).stage(Stage::Corpus)?;
    let mut endpoint = LlmEndpointConfig::default();
    if let Some(url) = a.endpoint {
        endpoint.base_url = url;
    }
    if let Some(m) = a.model {
        endpoint.model_name = m;
    }
    if let Some(r) = a.retries {
        endpoint.retries = r;
    }
    if let Some(p) = a.parallelism {
        endpoint.parallelism = p;
    }
    let mut options = SummarizeOptions {
        permit_partial: a.permit_partial,
        ..SummarizeOptions::default()
    };
    if let Some(t) = a.max_summary_tokens {
        options.max_summary_tokens = t;
    }
    let backend: Box<dyn ChatBackend> = match a.mock {
        Some(spec) => Box::new(spec.parse::<MockBackend>().stage(Stage::Config)?),
        None => Box::new(HttpBackend::new(endpoint.clone())),
    };
    let outcome = summarize_corpus(
        &corpus,
        &AspectPrompt::shipped(a.aspect),
        backend.as_ref(),
        &endpoint,
        &options,
    )
    .stage(Stage::Summarize)?;
    outcome.set.save(&a.out).stage(Stage::Summarize)?;
    if !outcome.manifest.failures.is_empty() || !outcome.manifest.truncated.is_empty() {
        let path = a.out.with_extension("errors.json");
        let text = serde_json::to_string_pretty(&outcome.manifest).stage(Stage::Summarize)?;
        std::fs::write(&path, text + "\n").stage(Stage::Summarize)?;
        log::warn!("generation issues recorded in {}", path.display());
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), HarnessError> {
    let corpus = load_corpus(&a.corpus).stage(Stage::Corpus)?;
    let set = SummarySet::load(&a.summaries).stage(Stage::Summarize)?;
    let labels: BTreeMap<&str, u8> = corpus.documents().iter().map(|d| (d.doc_id.as_str(), d.label)).collect();
    let mut texts = Vec::new();
    let mut y = Vec::new();
    for r in &set.records {
        if corpus.split_of(&r.doc_id) == Some(Split::Train) {
            texts.push(r.summary_text.as_str());
            y.push(labels[r.doc_id.as_str()]);
        }
    }
    let mut config = BowSvmConfig::default();
    if let Some(f) = a.min_frequency {
        config.min_frequency = f;
    }
    if a.tfidf {
        config.weighting = Weighting::TfIdf;
    }
    if let Some(l) = a.lambda {
        config.svm.lambda = l;
    }
    if let Some(e) = a.epochs {
        config.svm.epochs = e;
    }
    if let Some(e) = a.eta0 {
        config.svm.eta0 = e;
    }
    let model = BowSvmModel::train(&texts, &y, &config, a.seed).stage(Stage::Train)?;
    model.save(&a.out).stage(Stage::Train)
}

fn infodiff(
    preds: &[PathBuf],
    groups: &[String],
    out: &Path,
    pairs_csv: Option<&Path>,
    scores_csv: Option<&Path>,
) -> Result<(), HarnessError> {
    let mut by_id = BTreeMap::new();
    for p in preds {
        let id = file_stem(p);
        let list = ingest_predictions(p, RunSource::new(id.clone(), None, "file"))
            .map_err(|e| HarnessError::new(Stage::Infodiff, format!("{}: {e}", p.display())))?;
        if by_id.insert(id.clone(), list).is_some() {
            return Err(HarnessError::new(Stage::Config, format!("duplicate run id {id:?}")));
        }
    }
    let mut run_groups = Vec::new();
    for spec in groups {
        let (aspect, runs) = spec
            .split_once('=')
            .ok_or_else(|| HarnessError::new(Stage::Config, format!("group {spec:?} is not aspect=run1,run2")))?;
        let ids: Vec<String> = runs.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        let lists = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id)
                    .cloned()
                    .ok_or_else(|| HarnessError::new(Stage::Config, format!("run {id:?} is not among --preds")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        run_groups.push(RunGroup::with_ids(aspect, ids, lists).stage(Stage::Infodiff)?);
    }
    let report = build_difference_report(&run_groups).stage(Stage::Infodiff)?;
    report.write_json(out).stage(Stage::Infodiff)?;
    if let Some(p) = pairs_csv {
        report.write_pairs_csv(p).stage(Stage::Infodiff)?;
    }
    if let Some(p) = scores_csv {
        report.write_scores_csv(p).stage(Stage::Infodiff)?;
    }
    Ok(())
}
