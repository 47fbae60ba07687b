//! Combining aspect signals: merged inputs, the union dataset, and soft/any
//! voting over per-aspect predictions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classifier::{PredictionEntry, PredictionError, PredictionList, RunSource};
use crate::summarizer::{Aspect, SummaryRecord, SummarySet};
use crate::DECISION_THRESHOLD;

/// Text placed between adjacent summaries of a merged record.
pub const MERGE_SEPARATOR: &str = " Another summary ";

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error("expected a {expected} summary set, got {found}")]
    WrongAspect { expected: Aspect, found: Aspect },
    #[error("inputs are not aligned: {0}")]
    Misaligned(String),
    #[error("duplicate ({doc_id}, {aspect}) record")]
    Duplicate { doc_id: String, aspect: Aspect },
    #[error("prediction list {0} has binary-only probabilities; soft voting needs real-valued scores")]
    Degenerate(String),
    #[error(transparent)]
    Predictions(#[from] PredictionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub doc_id: String,
    pub text: String,
}

/// One concatenated input per document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergedDataset {
    pub records: Vec<MergedRecord>,
}

impl MergedDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn check_set(set: &SummarySet, expected: Aspect) -> Result<(), IntegrationError> {
    if set.aspect != expected {
        return Err(IntegrationError::WrongAspect {
            expected,
            found: set.aspect,
        });
    }
    let mut seen = HashSet::with_capacity(set.len());
    for r in &set.records {
        if r.aspect != expected {
            return Err(IntegrationError::WrongAspect {
                expected,
                found: r.aspect,
            });
        }
        if !seen.insert(r.doc_id.as_str()) {
            return Err(IntegrationError::Duplicate {
                doc_id: r.doc_id.clone(),
                aspect: expected,
            });
        }
    }
    Ok(())
}

fn check_aligned(plain: &SummarySet, risk: &SummarySet, time: &SummarySet) -> Result<(), IntegrationError> {
    check_set(plain, Aspect::Plain)?;
    check_set(risk, Aspect::Riskfactor)?;
    check_set(time, Aspect::Timeline)?;
    for other in [risk, time] {
        if other.len() != plain.len() {
            return Err(IntegrationError::Misaligned(format!(
                "{} has {} records, plain has {}",
                other.aspect,
                other.len(),
                plain.len()
            )));
        }
        if let Some((a, b)) = plain.doc_ids().zip(other.doc_ids()).find(|(a, b)| a != b) {
            return Err(IntegrationError::Misaligned(format!(
                "plain {a} vs {} {b}",
                other.aspect
            )));
        }
    }
    Ok(())
}

/// Concatenates the three summaries of each document in the order
/// plain → riskfactor → timeline with `separator` between them.
pub fn build_merged(
    plain: &SummarySet,
    risk: &SummarySet,
    time: &SummarySet,
    separator: &str,
) -> Result<MergedDataset, IntegrationError> {
    check_aligned(plain, risk, time)?;
    let records = plain
        .records
        .iter()
        .zip(&risk.records)
        .zip(&time.records)
        .map(|((p, r), t)| MergedRecord {
            doc_id: p.doc_id.clone(),
            text: [p.summary_text.as_str(), &r.summary_text, &t.summary_text].join(separator),
        })
        .collect();
    Ok(MergedDataset { records })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnionRecord {
    pub doc_id: String,
    pub aspect: Aspect,
    /// Position of the source document in the aligned summary sets.
    pub source_index: usize,
    pub text: String,
}

impl UnionRecord {
    /// Training text, optionally prefixed with an aspect header.
    pub fn training_text(&self, tag_aspect: bool) -> String {
        if tag_aspect {
            format!("[{}] {}", self.aspect, self.text)
        } else {
            self.text.clone()
        }
    }
}

/// The three summary sets stacked: all plain records, then riskfactor, then
/// timeline.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnionDataset {
    pub records: Vec<UnionRecord>,
}

impl UnionDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Recovers the summary set of one aspect.
    pub fn filter_aspect(&self, aspect: Aspect) -> SummarySet {
        SummarySet {
            aspect,
            records: self
                .records
                .iter()
                .filter(|r| r.aspect == aspect)
                .map(|r| SummaryRecord::new(r.doc_id.clone(), aspect, r.text.clone()))
                .collect(),
        }
    }
}

pub fn build_union(plain: &SummarySet, risk: &SummarySet, time: &SummarySet) -> Result<UnionDataset, IntegrationError> {
    check_aligned(plain, risk, time)?;
    let records = [plain, risk, time]
        .into_iter()
        .flat_map(|set| {
            set.records.iter().enumerate().map(|(i, r)| UnionRecord {
                doc_id: r.doc_id.clone(),
                aspect: set.aspect,
                source_index: i,
                text: r.summary_text.clone(),
            })
        })
        .collect();
    Ok(UnionDataset { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteStrategy {
    Softvote,
    Anyvote,
}

impl VoteStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            VoteStrategy::Softvote => "softvote",
            VoteStrategy::Anyvote => "anyvote",
        }
    }
}

fn check_lists(lists: &[&PredictionList; 3]) -> Result<(), IntegrationError> {
    for l in &lists[1..] {
        if !l.same_documents(lists[0]) {
            return Err(IntegrationError::Misaligned(format!(
                "{} and {} cover different documents",
                lists[0].source().label(),
                l.source().label()
            )));
        }
    }
    Ok(())
}

fn pooled_source(lists: &[&PredictionList; 3], strategy: VoteStrategy) -> RunSource {
    let seed = lists[0].source().seed;
    let same_seed = lists.iter().all(|l| l.source().seed == seed);
    RunSource {
        aspect: strategy.as_str().to_string(),
        seed: if same_seed { seed } else { None },
        model_kind: lists[0].source().model_kind.clone(),
    }
}

/// Mean of the three probabilities per document; label by the inclusive 0.5
/// threshold. The values are summed in sorted order, so the result does not
/// depend on the order of the lists.
pub fn soft_vote(lists: [&PredictionList; 3]) -> Result<PredictionList, IntegrationError> {
    check_lists(&lists)?;
    if let Some(l) = lists.iter().find(|l| l.degenerate_probabilities()) {
        return Err(IntegrationError::Degenerate(l.source().label()));
    }
    let entries = (0..lists[0].len())
        .map(|i| {
            let mut p = lists.map(|l| l.entries()[i].probability);
            p.sort_by(|a, b| a.partial_cmp(b).expect("probabilities are finite"));
            let mean = ((p[0] + p[1] + p[2]) / 3.0).clamp(p[0], p[2]);
            PredictionEntry {
                doc_id: lists[0].entries()[i].doc_id.clone(),
                probability: mean,
                label: u8::from(mean >= DECISION_THRESHOLD),
            }
        })
        .collect();
    Ok(PredictionList::new(entries, pooled_source(&lists, VoteStrategy::Softvote))?)
}

/// Maximum probability and logical OR of the labels per document.
///
/// Input labels that disagree with the 0.5 threshold are accepted with a
/// warning; the pooled list then carries the threshold-inconsistency flag.
pub fn any_vote(lists: [&PredictionList; 3]) -> Result<PredictionList, IntegrationError> {
    check_lists(&lists)?;
    for l in &lists {
        if l.threshold_inconsistent() {
            log::warn!("{}: labels disagree with the 0.5 threshold", l.source().label());
        }
    }
    let entries: Vec<PredictionEntry> = (0..lists[0].len())
        .map(|i| {
            let es = lists.map(|l| &l.entries()[i]);
            PredictionEntry {
                doc_id: es[0].doc_id.clone(),
                probability: es.iter().map(|e| e.probability).fold(f64::NEG_INFINITY, f64::max),
                label: es.iter().map(|e| e.label).max().unwrap_or(0),
            }
        })
        .collect();
    let source = pooled_source(&lists, VoteStrategy::Anyvote);
    if lists.iter().all(|l| l.degenerate_probabilities()) {
        Ok(PredictionList::from_binary(entries, source)?)
    } else {
        Ok(PredictionList::new(entries, source)?)
    }
}

/// Applies one pooling strategy.
pub fn pool(strategy: VoteStrategy, lists: [&PredictionList; 3]) -> Result<PredictionList, IntegrationError> {
    match strategy {
        VoteStrategy::Softvote => soft_vote(lists),
        VoteStrategy::Anyvote => any_vote(lists),
    }
}

/// True when every pooled label equals `[p ≥ 0.5]`.
pub fn threshold_consistent(list: &PredictionList) -> bool {
    list.entries()
        .iter()
        .all(|e| (e.probability >= DECISION_THRESHOLD) == (e.label == 1))
}
