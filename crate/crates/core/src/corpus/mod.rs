//! Labeled documents, patient-aware splits and corpus file I/O.
//!
//! A corpus file is JSONL with one record per line:
//!
//! ```text
//! {"doc_id":"D1","patient_id":"P1","text":"...","label":0,"split":"train"}
//! ```

mod split;
mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::util::{self, JsonlError};

pub use split::{split_by_patient, DEFAULT_SPLIT_FRACTIONS};
pub use synthetic::{
    aspect_section_header, default_signal_tokens, generate_synthetic, SyntheticSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("patient split violation: patient {patient_id:?} appears in both {first} and {second}")]
    PatientSplitViolation {
        patient_id: String,
        first: Split,
        second: Split,
    },
    #[error("label {label} of document {doc_id:?} is not 0 or 1")]
    InvalidLabel { doc_id: String, label: i64 },
    #[error("document {0:?} has no split assignment")]
    MissingSplit(String),
    #[error("split assignment references unknown document {0:?}")]
    UnknownDocument(String),
    #[error("fewer patients ({patients}) than splits ({splits})")]
    TooFewPatients { patients: usize, splits: usize },
    #[error("invalid split fractions {0:?}: must be positive and sum to 1")]
    InvalidFractions([f64; 3]),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

impl From<JsonlError> for CorpusError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io(e) => CorpusError::Io(e),
            JsonlError::Malformed { line, source } => CorpusError::Malformed {
                line,
                message: source.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One note: the unit of prediction. `label` is 1 when the outcome occurred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub patient_id: String,
    pub text: String,
    pub label: u8,
}

/// On-disk corpus record. The label is read as a signed integer so that
/// out-of-range values can be reported instead of failing to parse.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusRecord {
    doc_id: String,
    patient_id: String,
    text: String,
    label: i64,
    split: Split,
}

/// An ordered, validated document collection with a patient-disjoint split
/// assignment. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    splits: Vec<Split>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from documents and a doc_id → split map, checking
    /// every invariant.
    pub fn new(
        documents: Vec<Document>,
        assignment: &BTreeMap<String, Split>,
    ) -> Result<Self, CorpusError> {
        let mut splits = Vec::with_capacity(documents.len());
        for doc in &documents {
            let split = assignment
                .get(&doc.doc_id)
                .copied()
                .ok_or_else(|| CorpusError::MissingSplit(doc.doc_id.clone()))?;
            splits.push(split);
        }
        let corpus = Self::from_parts(documents, splits)?;
        if let Some(unknown) = assignment.keys().find(|id| !corpus.index.contains_key(*id)) {
            return Err(CorpusError::UnknownDocument(unknown.clone()));
        }
        Ok(corpus)
    }

    /// Builds a corpus from documents and a parallel split vector.
    pub fn from_parts(documents: Vec<Document>, splits: Vec<Split>) -> Result<Self, CorpusError> {
        assert_eq!(documents.len(), splits.len(), "documents and splits must align");
        let mut index = HashMap::with_capacity(documents.len());
        let mut patient_split: HashMap<&str, Split> = HashMap::new();
        for (i, (doc, &split)) in documents.iter().zip(&splits).enumerate() {
            if doc.label > 1 {
                return Err(CorpusError::InvalidLabel {
                    doc_id: doc.doc_id.clone(),
                    label: doc.label as i64,
                });
            }
            if index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
            match patient_split.get(doc.patient_id.as_str()) {
                Some(&first) if first != split => {
                    return Err(CorpusError::PatientSplitViolation {
                        patient_id: doc.patient_id.clone(),
                        first,
                        second: split,
                    })
                }
                Some(_) => {}
                None => {
                    patient_split.insert(&doc.patient_id, split);
                }
            }
        }
        Ok(Self {
            documents,
            splits,
            index,
        })
    }

    pub fn empty() -> Self {
        Self {
            documents: Vec::new(),
            splits: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn split_of(&self, doc_id: &str) -> Option<Split> {
        self.index.get(doc_id).map(|&i| self.splits[i])
    }

    /// The doc_id → split map.
    pub fn split_assignment(&self) -> BTreeMap<String, Split> {
        self.documents
            .iter()
            .zip(&self.splits)
            .map(|(d, &s)| (d.doc_id.clone(), s))
            .collect()
    }

    /// Documents in one split, in corpus order.
    pub fn split_documents(&self, split: Split) -> impl Iterator<Item = &Document> + '_ {
        self.documents
            .iter()
            .zip(&self.splits)
            .filter(move |(_, &s)| s == split)
            .map(|(d, _)| d)
    }

    /// Distinct patient ids in a split.
    pub fn split_patients(&self, split: Split) -> HashSet<&str> {
        self.split_documents(split)
            .map(|d| d.patient_id.as_str())
            .collect()
    }

    /// Fraction of positive labels over the whole corpus; NaN when empty.
    pub fn positive_ratio(&self) -> f64 {
        ratio(self.documents.iter())
    }

    /// Fraction of positive labels within a split; NaN when the split is empty.
    pub fn split_positive_ratio(&self, split: Split) -> f64 {
        ratio(self.split_documents(split))
    }

    /// Per-split document counts and positive ratios.
    pub fn split_report(&self) -> SplitReport {
        let count = |s| self.split_documents(s).count();
        SplitReport {
            train: count(Split::Train),
            dev: count(Split::Dev),
            test: count(Split::Test),
            total: self.len(),
            positive_ratio: self.positive_ratio(),
            train_positive_ratio: self.split_positive_ratio(Split::Train),
            dev_positive_ratio: self.split_positive_ratio(Split::Dev),
            test_positive_ratio: self.split_positive_ratio(Split::Test),
        }
    }

    /// SHA-256 over the serialized corpus, used as a cache key.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for rec in self.records() {
            serde_json::to_writer(&mut bytes, &rec).expect("corpus record serializes");
            bytes.push(b'\n');
        }
        util::sha256_hex(&bytes)
    }

    fn records(&self) -> impl Iterator<Item = CorpusRecord> + '_ {
        self.documents
            .iter()
            .zip(&self.splits)
            .map(|(d, &split)| CorpusRecord {
                doc_id: d.doc_id.clone(),
                patient_id: d.patient_id.clone(),
                text: d.text.clone(),
                label: d.label as i64,
                split,
            })
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let records: Vec<CorpusRecord> = self.records().collect();
        util::write_jsonl(path, &records)?;
        Ok(())
    }
}

fn ratio<'a>(docs: impl Iterator<Item = &'a Document>) -> f64 {
    let (pos, total) = docs.fold((0usize, 0usize), |(p, t), d| (p + d.label as usize, t + 1));
    if total == 0 {
        f64::NAN
    } else {
        pos as f64 / total as f64
    }
}

/// Table-1-style split summary. Ratios are NaN for empty splits.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub total: usize,
    pub positive_ratio: f64,
    pub train_positive_ratio: f64,
    pub dev_positive_ratio: f64,
    pub test_positive_ratio: f64,
}

/// Loads JSONL documents without split assignments (any `split` field is
/// ignored), preserving line order.
pub fn load_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let records: Vec<UnsplitRecord> = util::read_jsonl(path)?;
    records
        .into_iter()
        .map(|rec| {
            if !(0..=1).contains(&rec.label) {
                return Err(CorpusError::InvalidLabel {
                    doc_id: rec.doc_id,
                    label: rec.label,
                });
            }
            Ok(Document {
                doc_id: rec.doc_id,
                patient_id: rec.patient_id,
                text: rec.text,
                label: rec.label as u8,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct UnsplitRecord {
    doc_id: String,
    patient_id: String,
    text: String,
    label: i64,
}

/// Loads a JSONL corpus, preserving line order.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let records: Vec<CorpusRecord> = util::read_jsonl(path)?;
    let mut documents = Vec::with_capacity(records.len());
    let mut splits = Vec::with_capacity(records.len());
    for rec in records {
        if !(0..=1).contains(&rec.label) {
            return Err(CorpusError::InvalidLabel {
                doc_id: rec.doc_id,
                label: rec.label,
            });
        }
        documents.push(Document {
            doc_id: rec.doc_id,
            patient_id: rec.patient_id,
            text: rec.text,
            label: rec.label as u8,
        });
        splits.push(rec.split);
    }
    Corpus::from_parts(documents, splits)
}
