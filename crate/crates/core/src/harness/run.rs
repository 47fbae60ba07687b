//! End-to-end pipeline execution.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind, Strategy};
use super::report::{emit_report, MetricRow, ReportInputs};
use crate::classifier::{ingest_predictions, BowSvmConfig, BowSvmModel, PredictionList, RunSource};
use crate::corpus::{load_corpus, Corpus, Split};
use crate::infodiff::{build_difference_report, AspectDifferenceReport, RunGroup};
use crate::integration::{any_vote, build_merged, build_union, soft_vote, MERGE_SEPARATOR};
use crate::metrics::{evaluate, gold_labels};
use crate::summarizer::{
    summarize_corpus, zero_shot_predict, Aspect, AspectPrompt, ChatBackend, HttpBackend,
    LlmEndpointConfig, SummarizeOptions, SummarySet, ZERO_SHOT_TEMPLATE,
};
use crate::util::sha256_hex;

pub const MERGED: &str = "merged";
pub const SOFTVOTE: &str = "softvote";
pub const ANYVOTE: &str = "anyvote";
pub const ZEROSHOT: &str = "zeroshot";

/// Condition name of a union-trained model's predictions on one aspect.
pub fn union_condition(aspect: Aspect) -> String {
    format!("union_{aspect}")
}

/// Prediction file name for a condition and optional seed.
pub fn prediction_file_name(condition: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("{condition}_seed{s}.csv"),
        None => format!("{condition}.csv"),
    }
}

/// Inverse of [`prediction_file_name`].
pub fn parse_prediction_file_name(name: &str) -> Option<(String, Option<u64>)> {
    let stem = name.strip_suffix(".csv")?;
    if let Some((cond, seed)) = stem.rsplit_once("_seed") {
        if let Ok(s) = seed.parse() {
            return Some((cond.to_string(), Some(s)));
        }
    }
    Some((stem.to_string(), None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Corpus,
    Summarize,
    Train,
    Infodiff,
    Integrate,
    Metrics,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Corpus => "corpus",
            Stage::Summarize => "summarize",
            Stage::Train => "train",
            Stage::Infodiff => "infodiff",
            Stage::Integrate => "integrate",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
        }
    }

    /// Process exit code used when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Corpus => 3,
            Stage::Summarize => 4,
            Stage::Train => 5,
            Stage::Infodiff => 6,
            Stage::Integrate => 7,
            Stage::Metrics => 8,
            Stage::Report => 9,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct HarnessError {
    pub stage: Stage,
    pub message: String,
}

impl HarnessError {
    pub fn new(stage: Stage, e: impl fmt::Display) -> Self {
        Self {
            stage,
            message: e.to_string(),
        }
    }
}

/// Adapter: `result.stage(Stage::X)?`.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, HarnessError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, HarnessError> {
        self.map_err(|e| HarnessError::new(stage, e))
    }
}

/// Seeded prediction lists of one condition on one split, in seed order.
#[derive(Debug, Clone)]
pub struct ConditionRuns {
    pub condition: String,
    pub runs: Vec<PredictionList>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    pub test: Vec<ConditionRuns>,
    pub dev: Vec<ConditionRuns>,
}

impl ExperimentResults {
    pub fn condition(&self, split: Split, name: &str) -> Option<&ConditionRuns> {
        let list = if split == Split::Dev { &self.dev } else { &self.test };
        list.iter().find(|c| c.condition == name)
    }
}

/// What to train, independent of where the inputs come from.
#[derive(Debug, Clone)]
pub struct Plan {
    pub aspects: Vec<Aspect>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub classifier: BowSvmConfig,
    pub union_tag_aspect: bool,
    pub workers: usize,
}

impl Plan {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            aspects: cfg.aspects.clone(),
            strategies: cfg.strategies.clone(),
            seeds: cfg.seeds.clone(),
            classifier: cfg.classifier,
            union_tag_aspect: cfg.union_tag_aspect,
            workers: cfg.workers,
        }
    }

    fn has(&self, s: Strategy) -> bool {
        self.strategies.contains(&s)
    }

    fn has_union(&self) -> bool {
        self.has(Strategy::UnionSoftvote) || self.has(Strategy::UnionAnyvote)
    }
}

#[derive(Clone, Copy)]
enum Job {
    Aspect(Aspect, u64),
    Merged(u64),
    Union(u64),
}

/// Per-job predictions keyed by condition, for (test, dev).
type JobOutput = (Vec<(String, PredictionList)>, Vec<(String, PredictionList)>);

fn predict_split(
    model: &BowSvmModel,
    ids: &[&str],
    texts: &[&str],
    source: RunSource,
) -> Result<PredictionList, HarnessError> {
    model
        .predict_texts(ids.iter().copied().zip(texts.iter().copied()), source)
        .stage(Stage::Train)
}

/// Trains every configured model on the train split and predicts the test
/// (and, when present, dev) split. Summary sets must be aligned with the
/// corpus.
pub fn train_and_predict(
    corpus: &Corpus,
    summaries: &BTreeMap<Aspect, SummarySet>,
    plan: &Plan,
) -> Result<ExperimentResults, HarnessError> {
    for set in summaries.values() {
        set.check_alignment(corpus).stage(Stage::Train)?;
    }
    let needed: Vec<Aspect> = if plan.has(Strategy::Merged) || plan.has_union() {
        Aspect::ALL.to_vec()
    } else {
        plan.aspects.clone()
    };
    for a in &needed {
        if !summaries.contains_key(a) {
            return Err(HarnessError::new(Stage::Train, format!("missing {a} summaries")));
        }
    }

    let idx_of = |split: Split| -> Vec<usize> {
        (0..corpus.len())
            .filter(|&i| corpus.split_of(&corpus.documents()[i].doc_id) == Some(split))
            .collect()
    };
    let (train_idx, test_idx, dev_idx) = (idx_of(Split::Train), idx_of(Split::Test), idx_of(Split::Dev));
    let ids = |idx: &[usize]| -> Vec<&str> { idx.iter().map(|&i| corpus.documents()[i].doc_id.as_str()).collect() };
    let (test_ids, dev_ids) = (ids(&test_idx), ids(&dev_idx));
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| corpus.documents()[i].label).collect();

    let aspect_texts = |a: Aspect, idx: &[usize]| -> Vec<&str> {
        idx.iter().map(|&i| summaries[&a].records[i].summary_text.as_str()).collect()
    };

    let merged = if plan.has(Strategy::Merged) {
        Some(
            build_merged(
                &summaries[&Aspect::Plain],
                &summaries[&Aspect::Riskfactor],
                &summaries[&Aspect::Timeline],
                MERGE_SEPARATOR,
            )
            .stage(Stage::Integrate)?,
        )
    } else {
        None
    };
    let union = if plan.has_union() {
        Some(
            build_union(
                &summaries[&Aspect::Plain],
                &summaries[&Aspect::Riskfactor],
                &summaries[&Aspect::Timeline],
            )
            .stage(Stage::Integrate)?,
        )
    } else {
        None
    };
    let is_train: Vec<bool> = (0..corpus.len())
        .map(|i| corpus.split_of(&corpus.documents()[i].doc_id) == Some(Split::Train))
        .collect();
    let union_train: Option<(Vec<String>, Vec<u8>)> = union.as_ref().map(|u| {
        u.records
            .iter()
            .filter(|r| is_train[r.source_index])
            .map(|r| (r.training_text(plan.union_tag_aspect), corpus.documents()[r.source_index].label))
            .unzip()
    });

    let mut jobs = Vec::new();
    for &seed in &plan.seeds {
        for &a in &plan.aspects {
            jobs.push(Job::Aspect(a, seed));
        }
        if merged.is_some() {
            jobs.push(Job::Merged(seed));
        }
        if union.is_some() {
            jobs.push(Job::Union(seed));
        }
    }

    let run_job = |job: Job| -> Result<JobOutput, HarnessError> {
        let mut test = Vec::new();
        let mut dev = Vec::new();
        match job {
            Job::Aspect(a, seed) => {
                let model = BowSvmModel::train(&aspect_texts(a, &train_idx), &train_labels, &plan.classifier, seed)
                    .map_err(|e| HarnessError::new(Stage::Train, format!("{a} seed {seed}: {e}")))?;
                let src = RunSource::new(a.as_str(), Some(seed), "bow_svm");
                test.push((a.to_string(), predict_split(&model, &test_ids, &aspect_texts(a, &test_idx), src.clone())?));
                if !dev_idx.is_empty() {
                    dev.push((a.to_string(), predict_split(&model, &dev_ids, &aspect_texts(a, &dev_idx), src)?));
                }
            }
            Job::Merged(seed) => {
                let m = merged.as_ref().expect("merged dataset");
                let texts = |idx: &[usize]| -> Vec<&str> { idx.iter().map(|&i| m.records[i].text.as_str()).collect() };
                let model = BowSvmModel::train(&texts(&train_idx), &train_labels, &plan.classifier, seed)
                    .map_err(|e| HarnessError::new(Stage::Train, format!("merged seed {seed}: {e}")))?;
                let src = RunSource::new(MERGED, Some(seed), "bow_svm");
                test.push((MERGED.to_string(), predict_split(&model, &test_ids, &texts(&test_idx), src.clone())?));
                if !dev_idx.is_empty() {
                    dev.push((MERGED.to_string(), predict_split(&model, &dev_ids, &texts(&dev_idx), src)?));
                }
            }
            Job::Union(seed) => {
                let (texts, labels) = union_train.as_ref().expect("union dataset");
                let model = BowSvmModel::train(texts, labels, &plan.classifier, seed)
                    .map_err(|e| HarnessError::new(Stage::Train, format!("union seed {seed}: {e}")))?;
                for (idx, ids, out) in [(&test_idx, &test_ids, &mut test), (&dev_idx, &dev_ids, &mut dev)] {
                    if idx.is_empty() {
                        continue;
                    }
                    let mut per_aspect = Vec::with_capacity(3);
                    for a in Aspect::ALL {
                        let cond = union_condition(a);
                        let texts: Vec<String> = aspect_texts(a, idx)
                            .into_iter()
                            .map(|t| {
                                if plan.union_tag_aspect {
                                    format!("[{a}] {t}")
                                } else {
                                    t.to_string()
                                }
                            })
                            .collect();
                        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
                        let list = predict_split(&model, ids, &refs, RunSource::new(cond.clone(), Some(seed), "bow_svm"))?;
                        per_aspect.push(list);
                    }
                    let lists = [&per_aspect[0], &per_aspect[1], &per_aspect[2]];
                    let soft = if plan.has(Strategy::UnionSoftvote) {
                        Some(soft_vote(lists).stage(Stage::Integrate)?)
                    } else {
                        None
                    };
                    let any = if plan.has(Strategy::UnionAnyvote) {
                        Some(any_vote(lists).stage(Stage::Integrate)?)
                    } else {
                        None
                    };
                    for (a, list) in Aspect::ALL.into_iter().zip(per_aspect) {
                        out.push((union_condition(a), list));
                    }
                    if let Some(s) = soft {
                        out.push((SOFTVOTE.to_string(), s));
                    }
                    if let Some(a) = any {
                        out.push((ANYVOTE.to_string(), a));
                    }
                }
            }
        }
        Ok((test, dev))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .stage(Stage::Train)?;
    let outputs: Vec<JobOutput> = pool.install(|| jobs.par_iter().map(|&j| run_job(j)).collect::<Result<_, _>>())?;

    let mut results = ExperimentResults::default();
    for (test, dev) in outputs {
        push_runs(&mut results.test, test);
        push_runs(&mut results.dev, dev);
    }
    order_conditions(&mut results.test, &plan.aspects);
    order_conditions(&mut results.dev, &plan.aspects);
    Ok(results)
}

fn push_runs(into: &mut Vec<ConditionRuns>, items: Vec<(String, PredictionList)>) {
    for (cond, list) in items {
        match into.iter_mut().find(|c| c.condition == cond) {
            Some(c) => c.runs.push(list),
            None => into.push(ConditionRuns {
                condition: cond,
                runs: vec![list],
            }),
        }
    }
}

/// Canonical condition order: aspects, merged, union per aspect, votes,
/// zero-shot, then anything else alphabetically.
pub fn condition_rank(name: &str, aspects: &[Aspect]) -> (usize, String) {
    if let Some(i) = aspects.iter().position(|a| a.as_str() == name) {
        return (i, String::new());
    }
    let base = aspects.len();
    let fixed = [MERGED, "union_plain", "union_riskfactor", "union_timeline", SOFTVOTE, ANYVOTE, ZEROSHOT];
    match fixed.iter().position(|f| *f == name) {
        Some(i) => (base + i, String::new()),
        None => (base + fixed.len(), name.to_string()),
    }
}

fn order_conditions(list: &mut [ConditionRuns], aspects: &[Aspect]) {
    list.sort_by_key(|c| condition_rank(&c.condition, aspects));
    for c in list.iter_mut() {
        c.runs.sort_by_key(|r| r.source().seed);
    }
}

/// Infodiff report over the per-aspect run groups of the test split.
pub fn difference_report(results: &ExperimentResults, aspects: &[Aspect]) -> Result<Option<AspectDifferenceReport>, HarnessError> {
    let groups: Vec<RunGroup> = aspects
        .iter()
        .filter_map(|a| results.condition(Split::Test, a.as_str()))
        .map(|c| {
            // run ids are the prediction file stems
            let ids = c
                .runs
                .iter()
                .map(|r| prediction_file_name(&c.condition, r.source().seed).trim_end_matches(".csv").to_string())
                .collect();
            RunGroup::with_ids(c.condition.clone(), ids, c.runs.clone())
        })
        .collect::<Result<_, _>>()
        .stage(Stage::Infodiff)?;
    if groups.len() < 2 {
        return Ok(None);
    }
    build_difference_report(&groups).stage(Stage::Infodiff).map(Some)
}

fn backend_for(cfg: &ExperimentConfig) -> Result<Box<dyn ChatBackend>, HarnessError> {
    match cfg.mock_backend().stage(Stage::Config)? {
        Some(m) => Ok(Box::new(m)),
        None => Ok(Box::new(HttpBackend::new(cfg.endpoint_config()))),
    }
}

/// Key of a cached summary set.
pub fn summary_cache_key(corpus: &Corpus, prompt: &AspectPrompt, backend: &dyn ChatBackend, options: &SummarizeOptions, endpoint: &LlmEndpointConfig) -> String {
    let text = format!(
        "{}|{}|{}|{}|{}|{}",
        corpus.content_hash(),
        prompt.aspect(),
        backend.fingerprint(),
        prompt.template(),
        serde_json::to_string(options).unwrap_or_default(),
        endpoint.max_output_tokens,
    );
    sha256_hex(text.as_bytes())
}

/// Loads summaries from the cache, or generates and caches them.
pub fn cached_summaries(
    corpus: &Corpus,
    aspect: Aspect,
    backend: &dyn ChatBackend,
    endpoint: &LlmEndpointConfig,
    options: &SummarizeOptions,
    cache_dir: &Path,
) -> Result<SummarySet, HarnessError> {
    let prompt = AspectPrompt::shipped(aspect);
    let key = summary_cache_key(corpus, &prompt, backend, options, endpoint);
    let path = cache_dir.join(format!("{aspect}-{key}.jsonl"));
    if path.is_file() {
        match SummarySet::load(&path) {
            Ok(set) if set.check_alignment(corpus).is_ok() => {
                log::info!("using cached {aspect} summaries from {}", path.display());
                return Ok(set);
            }
            _ => log::warn!("ignoring unusable cache entry {}", path.display()),
        }
    }
    let outcome = summarize_corpus(corpus, &prompt, backend, endpoint, options).stage(Stage::Summarize)?;
    if !outcome.manifest.failures.is_empty() || !outcome.manifest.truncated.is_empty() {
        log::warn!(
            "{aspect}: {} failures, {} truncated",
            outcome.manifest.failures.len(),
            outcome.manifest.truncated.len()
        );
    }
    outcome.set.check_alignment(corpus).stage(Stage::Summarize)?;
    outcome.set.save(&path).stage(Stage::Summarize)?;
    Ok(outcome.set)
}

fn load_external(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<ExperimentResults, HarnessError> {
    let dir = cfg.predictions_dir.as_ref().expect("validated");
    let plan = Plan::from_config(cfg);
    let read = |cond: &str, seed: u64| -> Result<PredictionList, HarnessError> {
        let path = dir.join(prediction_file_name(cond, Some(seed)));
        ingest_predictions(&path, RunSource::new(cond, Some(seed), "external"))
            .map_err(|e| HarnessError::new(Stage::Train, format!("{}: {e}", path.display())))
    };
    let mut test = Vec::new();
    for &seed in &plan.seeds {
        let mut items = Vec::new();
        for a in &plan.aspects {
            items.push((a.to_string(), read(a.as_str(), seed)?));
        }
        if plan.has(Strategy::Merged) {
            items.push((MERGED.to_string(), read(MERGED, seed)?));
        }
        if plan.has_union() {
            let lists: Vec<PredictionList> = Aspect::ALL
                .iter()
                .map(|&a| read(&union_condition(a), seed))
                .collect::<Result<_, _>>()?;
            let refs = [&lists[0], &lists[1], &lists[2]];
            if plan.has(Strategy::UnionSoftvote) {
                items.push((SOFTVOTE.to_string(), soft_vote(refs).stage(Stage::Integrate)?));
            }
            if plan.has(Strategy::UnionAnyvote) {
                items.push((ANYVOTE.to_string(), any_vote(refs).stage(Stage::Integrate)?));
            }
            for (a, l) in Aspect::ALL.into_iter().zip(lists) {
                items.push((union_condition(a), l));
            }
        }
        push_runs(&mut test, items);
    }
    order_conditions(&mut test, &plan.aspects);
    for c in &test {
        for r in &c.runs {
            gold_labels(r, corpus).stage(Stage::Train)?;
        }
    }
    Ok(ExperimentResults { test, dev: Vec::new() })
}

/// Writes every prediction list under `<out>/preds` (test) and
/// `<out>/preds/dev`.
pub fn write_predictions(out_dir: &Path, results: &ExperimentResults) -> Result<(), HarnessError> {
    for (sub, conds) in [("preds", &results.test), ("preds/dev", &results.dev)] {
        for c in conds {
            for r in &c.runs {
                let path = out_dir.join(sub).join(prediction_file_name(&c.condition, r.source().seed));
                r.write_csv(&path).stage(Stage::Train)?;
            }
        }
    }
    Ok(())
}

/// Per-seed metric rows for every condition and split.
pub fn metric_rows(corpus: &Corpus, results: &ExperimentResults) -> Result<Vec<MetricRow>, HarnessError> {
    let mut rows = Vec::new();
    for (split, conds) in [(Split::Test, &results.test), (Split::Dev, &results.dev)] {
        for c in conds {
            for r in &c.runs {
                let gold = gold_labels(r, corpus).stage(Stage::Metrics)?;
                let report = evaluate(r, &gold).stage(Stage::Metrics)?;
                rows.push(MetricRow {
                    condition: c.condition.clone(),
                    split,
                    seed: r.source().seed,
                    metrics: report,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn collect_files(dir: &Path, skip: &[PathBuf], out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if skip.iter().any(|s| s == &path) {
            continue;
        }
        if path.is_dir() {
            collect_files(&path, skip, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Checksums of every artifact under `out_dir`, excluding the manifest
/// itself and `skip` directories. Paths are relative and `/`-separated.
pub fn checksum_tree(out_dir: &Path, skip: &[PathBuf]) -> std::io::Result<Vec<ManifestEntry>> {
    let mut skip = skip.to_vec();
    skip.push(out_dir.join(MANIFEST_FILE));
    let mut files = Vec::new();
    collect_files(out_dir, &skip, &mut files)?;
    let mut entries = files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p)?;
            let rel = p
                .strip_prefix(out_dir)
                .unwrap_or(&p)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            Ok(ManifestEntry {
                path: rel,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

fn write_manifest(cfg: &ExperimentConfig, err: Option<&HarnessError>) -> std::io::Result<RunManifest> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let files = checksum_tree(&cfg.out_dir, &[cfg.cache_dir()])?;
    let manifest = RunManifest {
        status: if err.is_some() { "failed" } else { "ok" }.to_string(),
        failed_stage: err.map(|e| e.stage),
        error: err.map(|e| e.message.clone()),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(cfg.out_dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Runs the configured pipeline and writes all artifacts under `out_dir`:
///
/// - `summaries/<aspect>.jsonl`
/// - `preds/<condition>_seed<N>.csv` (test split), `preds/dev/...`
/// - `infodiff/report.json`, `infodiff/pairs.csv`, `infodiff/scores.csv`
/// - `metrics/per_seed.csv`, `metrics/per_seed.json`
/// - `report/*.csv`, `report/summary.md`
/// - `manifest.json` with a checksum per artifact
///
/// On failure the artifacts written so far are kept and the manifest
/// records the failed stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    let result = run_stages(cfg);
    let manifest = write_manifest(cfg, result.as_ref().err()).stage(Stage::Report);
    result?;
    manifest
}

fn run_stages(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    cfg.validate().stage(Stage::Config)?;
    let corpus = load_corpus(&cfg.corpus).stage(Stage::Corpus)?;
    if corpus.split_documents(Split::Test).next().is_none() {
        return Err(HarnessError::new(Stage::Corpus, "corpus has no test documents"));
    }
    let out = &cfg.out_dir;
    let plan = Plan::from_config(cfg);

    let mut results = match cfg.model_kind {
        ModelKind::BowSvm => {
            let backend = backend_for(cfg)?;
            let endpoint = cfg.endpoint_config();
            let mut needed = cfg.aspects.clone();
            if plan.strategies.iter().any(|s| *s != Strategy::None) {
                for a in Aspect::ALL {
                    if !needed.contains(&a) {
                        needed.push(a);
                    }
                }
            }
            let mut summaries = BTreeMap::new();
            for a in needed {
                let set = cached_summaries(&corpus, a, backend.as_ref(), &endpoint, &cfg.summarizer, &cfg.cache_dir())?;
                set.save(&out.join("summaries").join(format!("{a}.jsonl"))).stage(Stage::Summarize)?;
                summaries.insert(a, set);
            }
            train_and_predict(&corpus, &summaries, &plan)?
        }
        ModelKind::ExternalPredictions => load_external(cfg, &corpus)?,
    };

    if cfg.zero_shot {
        let backend = backend_for(cfg)?;
        let docs: Vec<_> = corpus.split_documents(Split::Test).collect();
        let outcome = zero_shot_predict(&docs, backend.as_ref(), &cfg.endpoint_config(), ZERO_SHOT_TEMPLATE)
            .stage(Stage::Summarize)?;
        if !outcome.unparseable.is_empty() {
            log::warn!("{} zero-shot responses unparseable", outcome.unparseable.len());
        }
        results.test.push(ConditionRuns {
            condition: ZEROSHOT.to_string(),
            runs: vec![outcome.predictions],
        });
    }

    write_predictions(out, &results)?;

    let infodiff = difference_report(&results, &plan.aspects)?;
    if let Some(r) = &infodiff {
        let dir = out.join("infodiff");
        r.write_json(&dir.join("report.json")).stage(Stage::Infodiff)?;
        r.write_pairs_csv(&dir.join("pairs.csv")).stage(Stage::Infodiff)?;
        r.write_scores_csv(&dir.join("scores.csv")).stage(Stage::Infodiff)?;
    }

    let rows = metric_rows(&corpus, &results)?;
    let inputs = ReportInputs {
        rows,
        infodiff,
        gold_ratio: Split::ALL
            .iter()
            .map(|&s| (s, corpus.split_positive_ratio(s)))
            .collect(),
        aspects: plan.aspects.clone(),
    };
    emit_report(out, &inputs).stage(Stage::Report)?;
    Ok(())
}

/// Rebuilds metrics and reports from a finished run directory.
pub fn report_from_run_dir(run_dir: &Path, corpus: &Corpus, aspects: &[Aspect]) -> Result<(), HarnessError> {
    let mut results = ExperimentResults::default();
    for (sub, target) in [("preds", &mut results.test), ("preds/dev", &mut results.dev)] {
        let dir = run_dir.join(sub);
        if !dir.is_dir() {
            continue;
        }
        let mut names: Vec<String> = std::fs::read_dir(&dir)
            .stage(Stage::Report)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            let Some((cond, seed)) = parse_prediction_file_name(&name) else {
                continue;
            };
            let list = ingest_predictions(&dir.join(&name), RunSource::new(cond.clone(), seed, "file"))
                .map_err(|e| HarnessError::new(Stage::Report, format!("{name}: {e}")))?;
            push_runs(target, vec![(cond, list)]);
        }
        order_conditions(target, aspects);
    }
    if results.test.is_empty() {
        return Err(HarnessError::new(Stage::Report, format!("no prediction files under {}", run_dir.join("preds").display())));
    }
    let infodiff_path = run_dir.join("infodiff").join("report.json");
    let infodiff = if infodiff_path.is_file() {
        Some(serde_json::from_slice(&std::fs::read(&infodiff_path).stage(Stage::Report)?).stage(Stage::Report)?)
    } else {
        difference_report(&results, aspects)?
    };
    let rows = metric_rows(corpus, &results)?;
    let inputs = ReportInputs {
        rows,
        infodiff,
        gold_ratio: Split::ALL.iter().map(|&s| (s, corpus.split_positive_ratio(s))).collect(),
        aspects: aspects.to_vec(),
    };
    emit_report(run_dir, &inputs).stage(Stage::Report)
}
