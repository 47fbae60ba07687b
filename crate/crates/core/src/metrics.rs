//! Evaluation metrics: AUROC, average precision, and the F1 family at the
//! fixed 0.5 threshold.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifier::PredictionList;
use crate::corpus::Corpus;
use crate::infodiff::average_ranks;
use crate::DECISION_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("ranking unavailable: predictions are binary-only")]
    RankingUnavailable,
    #[error("undefined: gold labels contain a single class")]
    SingleClass,
    #[error("undefined: no positive gold labels")]
    NoPositives,
    #[error("prediction list is empty")]
    Empty,
    #[error("{predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("no gold label for document {0:?}")]
    UnknownDocument(String),
}

impl MetricError {
    /// Marker written in place of an undefined metric value.
    pub fn marker(&self) -> &'static str {
        match self {
            MetricError::RankingUnavailable => "ranking unavailable",
            MetricError::SingleClass => "undefined: single class",
            MetricError::NoPositives => "undefined: no positives",
            _ => "undefined",
        }
    }
}

/// A metric value or an explicit marker explaining why it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Score {
    Value(f64),
    Undefined(String),
}

impl Score {
    pub fn value(&self) -> Option<f64> {
        match self {
            Score::Value(v) => Some(*v),
            Score::Undefined(_) => None,
        }
    }
}

impl From<Result<f64, MetricError>> for Score {
    fn from(r: Result<f64, MetricError>) -> Self {
        match r {
            Ok(v) => Score::Value(v),
            Err(e) => Score::Undefined(e.marker().to_string()),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Value(v) => write!(f, "{v}"),
            Score::Undefined(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

fn check_len(preds: &PredictionList, gold: &[u8]) -> Result<(), MetricError> {
    if preds.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            predictions: preds.len(),
            gold: gold.len(),
        });
    }
    Ok(())
}

/// Counts predicted labels against gold labels given in the same order.
pub fn confusion_counts(preds: &PredictionList, gold: &[u8]) -> Result<ConfusionCounts, MetricError> {
    check_len(preds, gold)?;
    let mut c = ConfusionCounts::default();
    for (e, &g) in preds.entries().iter().zip(gold) {
        match (e.label, g) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.r#fn += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Family {
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub f1_neg: f64,
    pub f1_macro: f64,
    /// Names of ratios that were 0/0 and set to 0.
    pub zero_division: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 for both classes; `f1_macro` is the mean of the
/// two F1 scores. Any 0/0 ratio is reported as 0 and listed in
/// `zero_division`.
pub fn f1_family(c: ConfusionCounts) -> F1Family {
    let mut flags = Vec::new();
    let precision_pos = ratio(c.tp, c.tp + c.fp, "precision_pos", &mut flags);
    let recall_pos = ratio(c.tp, c.tp + c.r#fn, "recall_pos", &mut flags);
    let f1_pos = ratio(2 * c.tp, 2 * c.tp + c.fp + c.r#fn, "f1_pos", &mut flags);
    let f1_neg = ratio(2 * c.tn, 2 * c.tn + c.r#fn + c.fp, "f1_neg", &mut flags);
    F1Family {
        precision_pos,
        recall_pos,
        f1_pos,
        f1_neg,
        f1_macro: (f1_pos + f1_neg) / 2.0,
        zero_division: flags,
    }
}

fn class_counts(gold: &[u8]) -> (usize, usize) {
    let pos = gold.iter().filter(|&&g| g == 1).count();
    (pos, gold.len() - pos)
}

/// Area under the ROC curve via the rank-sum statistic: the probability that
/// a random positive outscores a random negative, ties counting one half.
pub fn auroc(preds: &PredictionList, gold: &[u8]) -> Result<f64, MetricError> {
    check_len(preds, gold)?;
    if preds.degenerate_probabilities() {
        return Err(MetricError::RankingUnavailable);
    }
    auroc_scores(&preds.probabilities(), gold)
}

/// [`auroc`] on raw scores.
pub fn auroc_scores(scores: &[f64], gold: &[u8]) -> Result<f64, MetricError> {
    let (pos, neg) = class_counts(gold);
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(gold).filter(|(_, &g)| g == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: Σ precision × recall increment over the score
/// thresholds, visiting scores in descending order. Tied scores form one
/// block and share the precision at the end of the block.
pub fn auprc(preds: &PredictionList, gold: &[u8]) -> Result<f64, MetricError> {
    check_len(preds, gold)?;
    if preds.degenerate_probabilities() {
        return Err(MetricError::RankingUnavailable);
    }
    auprc_scores(&preds.probabilities(), gold)
}

/// [`auprc`] on raw scores.
pub fn auprc_scores(scores: &[f64], gold: &[u8]) -> Result<f64, MetricError> {
    let (pos, _) = class_counts(gold);
    if pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).expect("finite scores"));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let mut block_pos = 0;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if gold[order[end]] == 1 {
                block_pos += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        tp += block_pos;
        if block_pos > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += precision * block_pos as f64 / pos as f64;
        }
        start = end;
    }
    Ok(ap)
}

/// Fraction of positive predicted labels.
pub fn positive_ratio(preds: &PredictionList) -> Result<f64, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(preds.labels().iter().map(|&y| y as f64).sum::<f64>() / preds.len() as f64)
}

/// Gold labels for the documents of a prediction list, in its order.
pub fn gold_labels(preds: &PredictionList, corpus: &Corpus) -> Result<Vec<u8>, MetricError> {
    let by_id: HashMap<&str, u8> = corpus
        .documents()
        .iter()
        .map(|d| (d.doc_id.as_str(), d.label))
        .collect();
    preds
        .doc_ids()
        .map(|id| by_id.get(id).copied().ok_or_else(|| MetricError::UnknownDocument(id.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "AUROC")]
    pub auroc: Score,
    #[serde(rename = "AUPRC")]
    pub auprc: Score,
    #[serde(rename = "MaAvg F1")]
    pub f1_macro: f64,
    #[serde(rename = "Neg F1")]
    pub f1_neg: f64,
    #[serde(rename = "Pos F1")]
    pub f1_pos: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub positive_prediction_ratio: f64,
    pub k: usize,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_division: Vec<String>,
}

/// Full metric suite for one prediction list.
pub fn evaluate(preds: &PredictionList, gold: &[u8]) -> Result<MetricsReport, MetricError> {
    let counts = confusion_counts(preds, gold)?;
    let f = f1_family(counts);
    Ok(MetricsReport {
        auroc: auroc(preds, gold).into(),
        auprc: auprc(preds, gold).into(),
        f1_macro: f.f1_macro,
        f1_neg: f.f1_neg,
        f1_pos: f.f1_pos,
        precision_pos: f.precision_pos,
        recall_pos: f.recall_pos,
        positive_prediction_ratio: positive_ratio(preds)?,
        k: preds.len(),
        threshold: DECISION_THRESHOLD,
        zero_division: f.zero_division,
    })
}

impl MetricsReport {
    /// Named metric values in a fixed order; undefined ranking metrics are
    /// `None`.
    pub fn named_values(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("AUROC", self.auroc.value()),
            ("AUPRC", self.auprc.value()),
            ("MaAvg F1", Some(self.f1_macro)),
            ("Neg F1", Some(self.f1_neg)),
            ("Pos F1", Some(self.f1_pos)),
            ("positive_prediction_ratio", Some(self.positive_prediction_ratio)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{PredictionEntry, RunSource};
    use proptest::prelude::*;

    fn scored(p: &[f64]) -> PredictionList {
        PredictionList::from_probabilities((0..p.len()).map(|i| format!("D{i}")), p.iter().copied(), RunSource::default())
            .unwrap()
    }

    fn labeled(y: &[u8]) -> PredictionList {
        PredictionList::new(
            y.iter()
                .enumerate()
                .map(|(i, &l)| PredictionEntry { doc_id: format!("D{i}"), probability: l as f64 * 0.9, label: l })
                .collect(),
            RunSource::default(),
        )
        .unwrap()
    }

    /// Pair-counting reference for AUROC.
    fn auroc_pairs(s: &[f64], y: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    /// Rank-walk reference for average precision: for each distinct score,
    /// count predictions at or above it directly.
    fn ap_walk(s: &[f64], y: &[u8]) -> f64 {
        let mut thresholds: Vec<f64> = s.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let pos = y.iter().filter(|&&v| v == 1).count() as f64;
        let mut prev_recall = 0.0;
        let mut ap = 0.0;
        for t in thresholds {
            let tp = (0..s.len()).filter(|&i| s[i] >= t && y[i] == 1).count() as f64;
            let sel = (0..s.len()).filter(|&i| s[i] >= t).count() as f64;
            let recall = tp / pos;
            ap += (recall - prev_recall) * (tp / sel);
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn confusion_examples() {
        let c = confusion_counts(&labeled(&[1, 0, 1, 0]), &[1, 0, 0, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.r#fn), (1, 1, 2, 0));
        let c = confusion_counts(&labeled(&[1, 0, 1]), &[1, 0, 1]).unwrap();
        assert_eq!((c.fp, c.r#fn), (0, 0));
        let c = confusion_counts(&labeled(&[0, 0, 0, 0]), &[1, 0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.r#fn), (0, 0, 2, 2));
        assert_eq!(c.total(), 4);
        assert!(confusion_counts(&labeled(&[0]), &[0, 1]).is_err());
    }

    #[test]
    fn f1_examples() {
        let f = f1_family(ConfusionCounts { tp: 1, fp: 1, tn: 2, r#fn: 0 });
        assert_eq!(f.precision_pos, 0.5);
        assert_eq!(f.recall_pos, 1.0);
        assert!((f.f1_pos - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.f1_neg - 0.8).abs() < 1e-15);
        assert!((f.f1_macro - 0.733_333_333_333_333_3).abs() < 1e-15);
        assert_eq!(f.f1_macro, (f.f1_pos + f.f1_neg) / 2.0);

        let f = f1_family(ConfusionCounts { tp: 0, fp: 0, tn: 4, r#fn: 0 });
        assert_eq!(f.f1_pos, 0.0);
        assert!(f.zero_division.contains(&"f1_pos".to_string()));
        assert_eq!(f.f1_neg, 1.0);

        let f = f1_family(ConfusionCounts { tp: 3, fp: 0, tn: 2, r#fn: 0 });
        assert_eq!((f.precision_pos, f.recall_pos, f.f1_pos, f.f1_neg, f.f1_macro), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn ranking_examples() {
        let p = scored(&[0.9, 0.8, 0.4, 0.2]);
        let y = [1, 0, 1, 0];
        assert_eq!(auroc(&p, &y).unwrap(), 0.75);
        assert!((auprc(&p, &y).unwrap() - 0.8333333333333333).abs() < 1e-15);
        let perfect = scored(&[0.9, 0.8, 0.2, 0.1]);
        assert_eq!(auroc(&perfect, &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auprc(&perfect, &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auroc(&scored(&[0.3; 4]), &y).unwrap(), 0.5);
    }

    #[test]
    fn tied_scores_match_reference_values() {
        // reference values from scikit-learn (roc_auc_score, average_precision_score)
        let s = [0.5, 0.5, 0.3, 0.8, 0.3, 0.1, 0.5, 0.9];
        let y = [1, 0, 1, 1, 0, 0, 1, 0];
        assert!((auroc_scores(&s, &y).unwrap() - 0.59375).abs() < 1e-15);
        assert!((auprc_scores(&s, &y).unwrap() - 0.5678571428571428).abs() < 1e-15);
    }

    #[test]
    fn undefined_cases_are_explicit() {
        let bin = PredictionList::from_binary(
            vec![
                PredictionEntry { doc_id: "a".into(), probability: 1.0, label: 1 },
                PredictionEntry { doc_id: "b".into(), probability: 0.0, label: 0 },
            ],
            RunSource::default(),
        )
        .unwrap();
        assert_eq!(auroc(&bin, &[1, 0]), Err(MetricError::RankingUnavailable));
        assert_eq!(auprc(&bin, &[1, 0]), Err(MetricError::RankingUnavailable));
        let r = evaluate(&bin, &[1, 0]).unwrap();
        assert_eq!(r.auroc, Score::Undefined("ranking unavailable".into()));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["AUROC"], "ranking unavailable");
        assert_eq!(json["MaAvg F1"], 1.0);

        let p = scored(&[0.2, 0.4]);
        assert_eq!(auroc(&p, &[0, 0]), Err(MetricError::SingleClass));
        assert_eq!(auprc(&p, &[0, 0]), Err(MetricError::NoPositives));
        assert_eq!(auprc(&p, &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn positive_ratio_examples() {
        assert_eq!(positive_ratio(&labeled(&[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(positive_ratio(&labeled(&[0, 0])).unwrap(), 0.0);
        assert_eq!(
            positive_ratio(&PredictionList::new(vec![], RunSource::default()).unwrap()),
            Err(MetricError::Empty)
        );
    }

    #[test]
    fn random_scores_ap_near_prevalence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut total = 0.0;
        let reps = 400;
        for _ in 0..reps {
            let y: Vec<u8> = (0..200).map(|i| u8::from(i % 10 < 3)).collect();
            let s: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
            total += auprc_scores(&s, &y).unwrap();
        }
        let mean = total / reps as f64;
        assert!((mean - 0.3).abs() < 0.03, "{mean}");
    }

    fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..120).prop_flat_map(|k| {
            (
                prop::collection::vec((0u32..12).prop_map(|v| v as f64 / 12.0), k),
                prop::collection::vec(0u8..2, k),
            )
        })
    }

    proptest! {
        #[test]
        fn auroc_matches_pair_counting((s, y) in labeled_scores()) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            prop_assert!((auroc_scores(&s, &y).unwrap() - auroc_pairs(&s, &y)).abs() < 1e-12);
        }

        #[test]
        fn auprc_matches_rank_walk((s, y) in labeled_scores()) {
            prop_assume!(y.contains(&1));
            prop_assert!((auprc_scores(&s, &y).unwrap() - ap_walk(&s, &y)).abs() < 1e-12);
        }

        #[test]
        fn auroc_transform_and_flip_symmetry((s, y) in labeled_scores()) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let a = auroc_scores(&s, &y).unwrap();
            let t: Vec<f64> = s.iter().map(|x| (x + 0.5).ln() * 3.0).collect();
            prop_assert_eq!(a, auroc_scores(&t, &y).unwrap());
            let flipped_s: Vec<f64> = s.iter().map(|x| 1.0 - x).collect();
            let flipped_y: Vec<u8> = y.iter().map(|v| 1 - v).collect();
            prop_assert!((a - auroc_scores(&flipped_s, &flipped_y).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn macro_is_mean(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
            let f = f1_family(ConfusionCounts { tp, fp, tn, r#fn: fn_ });
            prop_assert_eq!(f.f1_macro, (f.f1_pos + f.f1_neg) / 2.0);
            for v in [f.precision_pos, f.recall_pos, f.f1_pos, f.f1_neg, f.f1_macro] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
