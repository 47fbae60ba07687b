//! Aspect-oriented summarization and zero-shot prediction through a
//! chat-completion backend.

mod backend;
mod mock;
mod prompt;
mod zero_shot;

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::util::{self, JsonlError};

pub use backend::{
    parse_completion, request_body, BackendError, ChatBackend, ChatRequest, HttpBackend,
    LlmEndpointConfig, Task, API_KEY_ENV,
};
pub use mock::{MockBackend, MockMode};
pub use prompt::{
    render_prompt, render_template, Aspect, AspectPrompt, NOTE_PLACEHOLDER, SYSTEM_MESSAGE,
    ZERO_SHOT_TEMPLATE,
};
pub use zero_shot::{parse_binary_response, zero_shot_predict, ZeroShotOutcome};

/// Upper bound on summary length, in whitespace-delimited tokens.
pub const MAX_SUMMARY_TOKENS: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum SummarizerError {
    #[error("template must contain exactly one {{note}} placeholder, found {0}")]
    BadTemplate(usize),
    #[error("note text is empty")]
    EmptyNote,
    #[error("unknown aspect {0:?}")]
    UnknownAspect(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("{} document(s) failed after retries (first: {})", .0.failures.len(), .0.failures.first().map(|f| f.doc_id.as_str()).unwrap_or("-"))]
    GenerationFailed(Box<ErrorManifest>),
    #[error("{truncated} of {total} summaries were truncated, above the allowed fraction {allowed}")]
    TooManyTruncated {
        truncated: usize,
        total: usize,
        allowed: f64,
    },
    #[error("all {0} zero-shot responses were unparseable")]
    AllUnparseable(usize),
    #[error("summary set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed summary record on line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl From<JsonlError> for SummarizerError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io(e) => SummarizerError::Io(e),
            JsonlError::Malformed { line, source } => SummarizerError::Malformed {
                line,
                message: source.to_string(),
            },
        }
    }
}

/// Whitespace-delimited token count.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Cuts `text` after its `max_tokens`-th whitespace token, keeping the
/// original spacing of the retained prefix. Returns the text and whether it
/// was shortened.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> (&str, bool) {
    let mut seen = 0;
    let mut in_token = false;
    let mut cut = 0;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_token {
                in_token = false;
                if seen == max_tokens {
                    cut = i;
                }
            }
        } else if !in_token {
            in_token = true;
            seen += 1;
            if seen > max_tokens {
                return (&text[..cut], true);
            }
        }
    }
    (text, false)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub doc_id: String,
    pub aspect: Aspect,
    pub summary_text: String,
    #[serde(skip)]
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl SummaryRecord {
    pub fn new(doc_id: impl Into<String>, aspect: Aspect, summary_text: impl Into<String>) -> Self {
        let summary_text = summary_text.into();
        Self {
            doc_id: doc_id.into(),
            aspect,
            token_count: count_tokens(&summary_text),
            summary_text,
            truncated: false,
        }
    }
}

/// All summaries of one aspect, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummarySet {
    pub aspect: Aspect,
    pub records: Vec<SummaryRecord>,
}

impl SummarySet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.records.iter().map(|r| r.doc_id.as_str())
    }

    /// Checks aspect tags and doc_id uniqueness.
    pub fn validate(&self) -> Result<(), SummarizerError> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if r.aspect != self.aspect {
                return Err(SummarizerError::InvalidSet(format!(
                    "record {} tagged {} in a {} set",
                    r.doc_id, r.aspect, self.aspect
                )));
            }
            if !seen.insert(r.doc_id.as_str()) {
                return Err(SummarizerError::InvalidSet(format!(
                    "duplicate ({}, {})",
                    r.doc_id, r.aspect
                )));
            }
        }
        Ok(())
    }

    /// Checks that the set covers exactly the corpus documents, in order.
    pub fn check_alignment(&self, corpus: &Corpus) -> Result<(), SummarizerError> {
        self.validate()?;
        if self.records.len() != corpus.len() {
            return Err(SummarizerError::InvalidSet(format!(
                "{} summaries for {} documents",
                self.records.len(),
                corpus.len()
            )));
        }
        for (r, d) in self.records.iter().zip(corpus.documents()) {
            if r.doc_id != d.doc_id {
                return Err(SummarizerError::InvalidSet(format!(
                    "summary {} aligned with document {}",
                    r.doc_id, d.doc_id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), SummarizerError> {
        util::write_jsonl(path, &self.records)?;
        Ok(())
    }

    /// Loads a single-aspect JSONL summary file.
    pub fn load(path: &Path) -> Result<Self, SummarizerError> {
        let mut records: Vec<SummaryRecord> = util::read_jsonl(path)?;
        for r in &mut records {
            r.token_count = count_tokens(&r.summary_text);
        }
        let aspect = records
            .first()
            .map(|r| r.aspect)
            .ok_or_else(|| SummarizerError::InvalidSet(format!("{} is empty", path.display())))?;
        let set = Self { aspect, records };
        set.validate()?;
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub doc_id: String,
    pub attempts: u32,
    pub last_error: String,
    #[serde(skip)]
    pub unreachable: bool,
}

/// Per-run record of generation failures and truncations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorManifest {
    pub failures: Vec<FailureEntry>,
    pub truncated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeOptions {
    #[serde(default = "default_max_tokens")]
    pub max_summary_tokens: usize,
    /// Keep going when documents fail; the set then lacks those documents.
    #[serde(default)]
    pub permit_partial: bool,
    /// Fail when more than this fraction of summaries had to be truncated.
    #[serde(default = "default_truncation_fraction")]
    pub max_truncated_fraction: f64,
}

fn default_max_tokens() -> usize {
    MAX_SUMMARY_TOKENS
}

fn default_truncation_fraction() -> f64 {
    0.5
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        Self {
            max_summary_tokens: MAX_SUMMARY_TOKENS,
            permit_partial: false,
            max_truncated_fraction: default_truncation_fraction(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SummaryOutcome {
    pub set: SummarySet,
    pub manifest: ErrorManifest,
}

/// Calls the backend with up to `1 + retries` attempts.
pub(crate) fn complete_with_retries(
    backend: &dyn ChatBackend,
    request: &ChatRequest<'_>,
    retries: u32,
) -> Result<String, (u32, BackendError)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(request) {
            Ok(text) => return Ok(text),
            Err(e) => {
                log::warn!(
                    "request for {} failed (attempt {attempt}/{}): {e}",
                    request.doc_id,
                    retries + 1
                );
                if attempt > retries {
                    return Err((attempt, e));
                }
            }
        }
    }
}

pub(crate) fn thread_pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool")
}

/// Summarizes every corpus document with one aspect prompt.
///
/// Requests run concurrently up to `endpoint.parallelism`; results are
/// reassembled in corpus order.
pub fn summarize_corpus(
    corpus: &Corpus,
    prompt: &AspectPrompt,
    backend: &dyn ChatBackend,
    endpoint: &LlmEndpointConfig,
    options: &SummarizeOptions,
) -> Result<SummaryOutcome, SummarizerError> {
    endpoint.validate().map_err(SummarizerError::InvalidConfig)?;
    let aspect = prompt.aspect();

    let results: Vec<Result<SummaryRecord, FailureEntry>> =
        thread_pool(endpoint.parallelism).install(|| {
            corpus
                .documents()
                .par_iter()
                .map(|doc| {
                    let user = render_prompt(prompt, &doc.text).map_err(|e| FailureEntry {
                        doc_id: doc.doc_id.clone(),
                        attempts: 0,
                        last_error: e.to_string(),
                        unreachable: false,
                    })?;
                    let request = ChatRequest {
                        doc_id: &doc.doc_id,
                        task: Task::Summarize(aspect),
                        system: SYSTEM_MESSAGE,
                        user: &user,
                        max_tokens: endpoint.max_output_tokens,
                        temperature: endpoint.temperature,
                    };
                    let text = complete_with_retries(backend, &request, endpoint.retries)
                        .map_err(|(attempts, e)| FailureEntry {
                            doc_id: doc.doc_id.clone(),
                            attempts,
                            last_error: e.to_string(),
                            unreachable: matches!(e, BackendError::Unreachable(_)),
                        })?;
                    let (kept, truncated) = truncate_tokens(text.trim(), options.max_summary_tokens);
                    let mut rec = SummaryRecord::new(doc.doc_id.clone(), aspect, kept);
                    rec.truncated = truncated;
                    Ok(rec)
                })
                .collect()
        });

    let mut manifest = ErrorManifest::default();
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rec) => {
                if rec.truncated {
                    manifest.truncated.push(rec.doc_id.clone());
                }
                records.push(rec);
            }
            Err(f) => manifest.failures.push(f),
        }
    }

    if !corpus.is_empty() && records.is_empty() && manifest.failures.iter().all(|f| f.unreachable)
    {
        return Err(SummarizerError::EndpointUnreachable(
            manifest.failures[0].last_error.clone(),
        ));
    }
    if !manifest.failures.is_empty() && !options.permit_partial {
        return Err(SummarizerError::GenerationFailed(Box::new(manifest)));
    }
    if !records.is_empty() {
        let frac = manifest.truncated.len() as f64 / records.len() as f64;
        if frac > options.max_truncated_fraction {
            return Err(SummarizerError::TooManyTruncated {
                truncated: manifest.truncated.len(),
                total: records.len(),
                allowed: options.max_truncated_fraction,
            });
        }
    }
    for t in &manifest.truncated {
        log::info!("summary for {t} truncated to {} tokens", options.max_summary_tokens);
    }
    Ok(SummaryOutcome {
        set: SummarySet { aspect, records },
        manifest,
    })
}
