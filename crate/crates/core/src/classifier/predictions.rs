//! Per-document prediction lists and their CSV form.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::fmt_f64;
use crate::DECISION_THRESHOLD;

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header doc_id,probability,label, found {0:?}")]
    BadHeader(Vec<String>),
    #[error("row {row}: probability {value} outside [0,1]")]
    ProbabilityOutOfRange { row: usize, value: f64 },
    #[error("row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: unparseable probability {value:?}")]
    BadProbability { row: usize, value: String },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub doc_id: String,
    pub probability: f64,
    pub label: u8,
}

/// Describes the run that produced a prediction list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSource {
    pub aspect: String,
    pub seed: Option<u64>,
    pub model_kind: String,
}

impl RunSource {
    pub fn new(aspect: impl Into<String>, seed: Option<u64>, model_kind: impl Into<String>) -> Self {
        Self {
            aspect: aspect.into(),
            seed,
            model_kind: model_kind.into(),
        }
    }

    /// Short identifier such as `plain-seed3`.
    pub fn label(&self) -> String {
        match self.seed {
            Some(s) => format!("{}-seed{}", self.aspect, s),
            None => self.aspect.clone(),
        }
    }
}

/// Ordered per-document probabilities and labels from one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionList {
    entries: Vec<PredictionEntry>,
    source: RunSource,
    degenerate_probabilities: bool,
    threshold_inconsistent: bool,
}

fn check_entries(entries: &[PredictionEntry]) -> Result<(), PredictionError> {
    let mut seen = HashSet::with_capacity(entries.len());
    for (row, e) in entries.iter().enumerate() {
        if !(0.0..=1.0).contains(&e.probability) {
            return Err(PredictionError::ProbabilityOutOfRange {
                row: row + 1,
                value: e.probability,
            });
        }
        if e.label > 1 {
            return Err(PredictionError::BadLabel {
                row: row + 1,
                value: e.label.to_string(),
            });
        }
        if !seen.insert(e.doc_id.as_str()) {
            return Err(PredictionError::DuplicateDocId(e.doc_id.clone()));
        }
    }
    Ok(())
}

impl PredictionList {
    /// Builds a list from real-valued scores and their labels. Labels that
    /// disagree with the inclusive 0.5 threshold set `threshold_inconsistent`.
    pub fn new(entries: Vec<PredictionEntry>, source: RunSource) -> Result<Self, PredictionError> {
        check_entries(&entries)?;
        let threshold_inconsistent = entries
            .iter()
            .any(|e| (e.probability >= DECISION_THRESHOLD) != (e.label == 1));
        Ok(Self {
            entries,
            source,
            degenerate_probabilities: false,
            threshold_inconsistent,
        })
    }

    /// Labels from thresholding probabilities at 0.5 (inclusive).
    pub fn from_probabilities(
        doc_ids: impl IntoIterator<Item = String>,
        probabilities: impl IntoIterator<Item = f64>,
        source: RunSource,
    ) -> Result<Self, PredictionError> {
        let entries = doc_ids
            .into_iter()
            .zip(probabilities)
            .map(|(doc_id, p)| PredictionEntry {
                doc_id,
                probability: p,
                label: u8::from(p >= DECISION_THRESHOLD),
            })
            .collect();
        Self::new(entries, source)
    }

    /// A binary-only list (probabilities exactly 0 or 1), as produced by
    /// zero-shot prompting. Ranking metrics are unavailable for it.
    pub fn from_binary(
        entries: Vec<PredictionEntry>,
        source: RunSource,
    ) -> Result<Self, PredictionError> {
        let entries: Vec<PredictionEntry> = entries
            .into_iter()
            .map(|e| PredictionEntry {
                probability: e.label as f64,
                ..e
            })
            .collect();
        check_entries(&entries)?;
        Ok(Self {
            entries,
            source,
            degenerate_probabilities: true,
            threshold_inconsistent: false,
        })
    }

    pub fn entries(&self) -> &[PredictionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source(&self) -> &RunSource {
        &self.source
    }

    pub fn with_source(mut self, source: RunSource) -> Self {
        self.source = source;
        self
    }

    pub fn degenerate_probabilities(&self) -> bool {
        self.degenerate_probabilities
    }

    pub fn threshold_inconsistent(&self) -> bool {
        self.threshold_inconsistent
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// True when both lists cover the same documents in the same order.
    pub fn same_documents(&self, other: &PredictionList) -> bool {
        self.len() == other.len() && self.doc_ids().eq(other.doc_ids())
    }

    /// Writes `doc_id,probability,label` CSV. Probabilities use the shortest
    /// representation that parses back to the identical value.
    pub fn write_csv(&self, path: &Path) -> Result<(), PredictionError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "doc_id,probability,label")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", csv_field(&e.doc_id), fmt_f64(e.probability), e.label)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads an externally produced prediction CSV.
///
/// Rows whose label disagrees with the 0.5 threshold are accepted and flag
/// the list as threshold-inconsistent. A list whose probabilities are all
/// exactly 0 or 1 is treated as binary-only.
pub fn ingest_predictions(path: &Path, source: RunSource) -> Result<PredictionList, PredictionError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ["doc_id", "probability", "label"] {
        return Err(PredictionError::BadHeader(header));
    }
    let mut entries = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let rown = i + 1;
        let p_raw = &row[1];
        let probability: f64 = p_raw.parse().map_err(|_| PredictionError::BadProbability {
            row: rown,
            value: p_raw.to_string(),
        })?;
        let label = match &row[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(PredictionError::BadLabel {
                    row: rown,
                    value: other.to_string(),
                })
            }
        };
        entries.push(PredictionEntry {
            doc_id: row[0].to_string(),
            probability,
            label,
        });
    }
    let binary_only = !entries.is_empty()
        && entries
            .iter()
            .all(|e| e.probability == 0.0 || e.probability == 1.0);
    let list = if binary_only {
        check_entries(&entries)?;
        if entries.iter().any(|e| e.probability != e.label as f64) {
            PredictionList::new(entries, source)?
        } else {
            PredictionList::from_binary(entries, source)?
        }
    } else {
        PredictionList::new(entries, source)?
    };
    if list.threshold_inconsistent() {
        log::warn!("{}: threshold-inconsistent labels", path.display());
    }
    Ok(list)
}
