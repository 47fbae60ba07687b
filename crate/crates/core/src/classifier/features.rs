//! Tokenization and bag-of-words featurization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::Split;

/// Lowercases, splits on runs of non-alphanumeric characters and drops empty
/// pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Raw term frequency.
    #[default]
    Counts,
    /// Term frequency times smoothed inverse document frequency,
    /// `ln((1 + n) / (1 + df)) + 1`.
    TfIdf,
}

/// Token → feature index map built from training documents only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    min_frequency: usize,
    built_from: Split,
    weighting: Weighting,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    min_frequency: usize,
    built_from: Split,
    weighting: Weighting,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        let index = f
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens: f.tokens,
            index,
            doc_freq: f.doc_freq,
            n_docs: f.n_docs,
            min_frequency: f.min_frequency,
            built_from: f.built_from,
            weighting: f.weighting,
        }
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens,
            doc_freq: v.doc_freq,
            n_docs: v.n_docs,
            min_frequency: v.min_frequency,
            built_from: v.built_from,
            weighting: v.weighting,
        }
    }
}

/// Builds a vocabulary from training documents. A token is kept when its
/// total count across all documents is at least `min_frequency`; indices
/// follow first-occurrence order.
pub fn build_vocabulary<S: AsRef<str>>(
    train_docs: &[S],
    min_frequency: usize,
) -> Result<Vocabulary, ClassifierError> {
    if train_docs.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let mut order: Vec<String> = Vec::new();
    let mut stats: HashMap<String, (usize, u32)> = HashMap::new();
    for doc in train_docs {
        let mut seen_here: HashMap<&str, ()> = HashMap::new();
        let tokens = tokenize(doc.as_ref());
        for tok in &tokens {
            let entry = stats.entry(tok.clone()).or_insert_with(|| {
                order.push(tok.clone());
                (0, 0)
            });
            entry.0 += 1;
            if seen_here.insert(tok, ()).is_none() {
                entry.1 += 1;
            }
        }
    }
    let mut tokens = Vec::new();
    let mut doc_freq = Vec::new();
    for tok in order {
        let (count, df) = stats[&tok];
        if count >= min_frequency.max(1) {
            tokens.push(tok);
            doc_freq.push(df);
        }
    }
    if tokens.is_empty() {
        return Err(ClassifierError::EmptyVocabulary { min_frequency });
    }
    Ok(VocabularyFile {
        tokens,
        doc_freq,
        n_docs: train_docs.len(),
        min_frequency,
        built_from: Split::Train,
        weighting: Weighting::Counts,
    }
    .into())
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn built_from(&self) -> Split {
        self.built_from
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    fn idf(&self, idx: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[idx] as f64)).ln() + 1.0
    }

    /// Sparse representation of `text`. Tokens outside the vocabulary are
    /// ignored.
    pub fn featurize(&self, text: &str) -> FeatureVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for tok in tokenize(text) {
            if let Some(i) = self.index_of(&tok) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
        entries.sort_unstable_by_key(|&(i, _)| i);
        if self.weighting == Weighting::TfIdf {
            for (i, v) in &mut entries {
                *v *= self.idf(*i);
            }
        }
        FeatureVector { entries }
    }
}

/// Sparse feature vector with strictly increasing indices and positive values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// Builds a vector from (index, value) pairs. Duplicate indices are summed;
    /// zero values are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        Self { entries: merged }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.iter().copied().enumerate())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Largest index plus one, or 0 for an empty vector.
    pub fn dim_hint(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i + 1)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(
            tokenize("Patient re-admitted TWICE."),
            vec!["patient", "re", "admitted", "twice"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A1c 7.2%"), vec!["a1c", "7", "2"]);
    }

    #[test]
    fn vocabulary_thresholds() {
        let docs = ["a b a", "b c"];
        let v = build_vocabulary(&docs, 2).unwrap();
        assert_eq!(v.tokens(), ["a", "b"]);
        assert_eq!(v.index_of("a"), Some(0));
        assert_eq!(v.index_of("b"), Some(1));
        let v = build_vocabulary(&docs, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert!(matches!(
            build_vocabulary(&docs, 10),
            Err(ClassifierError::EmptyVocabulary { min_frequency: 10 })
        ));
        let none: [&str; 0] = [];
        assert!(matches!(
            build_vocabulary(&none, 1),
            Err(ClassifierError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn held_out_tokens_add_no_features() {
        let train = ["alpha beta", "beta gamma"];
        let v = build_vocabulary(&train, 1).unwrap();
        let before = v.len();
        let fv = v.featurize("delta epsilon alpha alpha");
        assert_eq!(v.len(), before);
        assert_eq!(fv.entries(), &[(0, 2.0)]);
        assert!(fv.entries().iter().all(|&(i, c)| i < v.len() && c > 0.0));
        assert_eq!(v.built_from(), Split::Train);
    }

    #[test]
    fn tfidf_downweights_common_terms() {
        let v = build_vocabulary(&["a b", "a c", "a d"], 1)
            .unwrap()
            .with_weighting(Weighting::TfIdf);
        let fv = v.featurize("a b");
        let (a, b) = (fv.entries()[0].1, fv.entries()[1].1);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - (2.0f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_serde_round_trip() {
        let v = build_vocabulary(&["x y z", "y"], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("z"), Some(2));
    }

    #[test]
    fn sparse_construction() {
        let fv = FeatureVector::from_pairs([(3, 1.0), (1, 2.0), (3, 1.0), (2, 0.0)]);
        assert_eq!(fv.entries(), &[(1, 2.0), (3, 2.0)]);
        assert_eq!(fv.dot(&[0.0, 1.0, 0.0, 0.5]), 3.0);
        assert_eq!(fv.norm_sq(), 8.0);
    }
}
