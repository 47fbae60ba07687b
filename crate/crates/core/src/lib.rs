//! Aspect-oriented summarization toolkit.
//!
//! Long documents are summarized under several aspect prompts, a seeded
//! classifier is trained per aspect, and the resulting prediction lists are
//! compared with a tie-corrected Kendall's tau distance. Aspect signals are
//! then integrated either by merging summaries per document or by training on
//! the union of the summary sets and pooling predictions with soft or any
//! voting.
//!
//! Modules map onto pipeline stages:
//!
//! - [`corpus`]: labeled documents, patient-disjoint splits, JSONL I/O, and a
//!   synthetic corpus generator with per-aspect planted signal.
//! - [`summarizer`]: aspect prompt templates, chat-completion backends (HTTP
//!   and a deterministic mock), and zero-shot binary prediction.
//! - [`classifier`]: tokenization, bag-of-words features, a linear SVM trained
//!   by stochastic subgradient descent, sigmoid calibration, prediction lists.
//! - [`infodiff`]: Kendall's tau-b, the tau distance, and intra-/inter-aspect
//!   difference scores over groups of seeded runs.
//! - [`integration`]: merged and union datasets, soft and any voting.
//! - [`metrics`]: AUROC, average precision, F1 family at a fixed 0.5 threshold.
//! - [`harness`]: experiment configuration, orchestration, aggregation and
//!   report emission.

pub mod classifier;
pub mod corpus;
pub mod harness;
pub mod infodiff;
pub mod integration;
pub mod metrics;
pub mod summarizer;
pub mod util;

pub use classifier::{LinearModel, PredictionEntry, PredictionList, RunSource};
pub use corpus::{Corpus, Document, Split, SyntheticSpec};
pub use summarizer::{Aspect, AspectPrompt, SummaryRecord, SummarySet};

/// Probability threshold used for every binary decision in the toolkit.
/// Inclusive: a probability equal to the threshold is labeled positive.
pub const DECISION_THRESHOLD: f64 = 0.5;
