//! Average ranks and Kendall's tau-b.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::InfodiffError;
use crate::classifier::PredictionList;

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("NaN in ranked values")
}

/// Average ranks (1-based): tied values share the mean of the positions they
/// occupy, so the ranks always sum to k(k+1)/2.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| cmp_f64(values[i], values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Ranks of a prediction list's probabilities.
///
/// Binary-only lists are refused unless `allow_degenerate` is set, since
/// their ranks are almost entirely ties.
pub fn to_ranks(predictions: &PredictionList, allow_degenerate: bool) -> Result<Vec<f64>, InfodiffError> {
    if predictions.is_empty() {
        return Err(InfodiffError::EmptyList);
    }
    if predictions.degenerate_probabilities() {
        if !allow_degenerate {
            return Err(InfodiffError::Degenerate(predictions.source().label()));
        }
        log::warn!(
            "ranking binary-only predictions of {}",
            predictions.source().label()
        );
    }
    Ok(average_ranks(&predictions.probabilities()))
}

/// Kendall's tau-b between two rankings plus the pair counts it is built
/// from.
///
/// `ties_a` and `ties_b` count every pair tied in the respective list,
/// including pairs tied in both (`joint_ties`); the tau-b denominator is
/// `sqrt((n_pairs − ties_a)(n_pairs − ties_b))`. `tau` and `distance` are
/// `None` when either list is entirely tied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub tau: Option<f64>,
    pub distance: Option<f64>,
    pub concordant: u64,
    pub discordant: u64,
    pub n_pairs: u64,
    pub ties_a: u64,
    pub ties_b: u64,
    pub joint_ties: u64,
}

impl PairSimilarity {
    fn from_counts(concordant: u64, discordant: u64, n_pairs: u64, ties_a: u64, ties_b: u64, joint_ties: u64) -> Self {
        let ra = n_pairs - ties_a;
        let rb = n_pairs - ties_b;
        let tau = if ra == 0 || rb == 0 {
            None
        } else {
            let t = (concordant as f64 - discordant as f64) / ((ra as f64) * (rb as f64)).sqrt();
            Some(t.clamp(-1.0, 1.0))
        };
        Self {
            tau,
            distance: tau.map(tau_distance),
            concordant,
            discordant,
            n_pairs,
            ties_a,
            ties_b,
            joint_ties,
        }
    }
}

/// `d = (1 − τ) / 2`, mapping τ ∈ [−1, 1] onto [0, 1].
pub fn tau_distance(tau: f64) -> f64 {
    (1.0 - tau) / 2.0
}

fn tied_pairs(group_len: u64) -> u64 {
    group_len * (group_len - 1) / 2
}

/// Sum of c(c−1)/2 over runs of equal keys in an already sorted sequence.
fn count_tied_runs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += tied_pairs(run);
            run = 1;
        }
    }
    if !sorted.is_empty() {
        total += tied_pairs(run);
    }
    total
}

/// Sorts `v` and returns the number of strict inversions (i < j, v[i] > v[j]).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

/// Kendall's tau-b of two equally long value sequences in O(k log k).
pub fn kendall_tau_values(a: &[f64], b: &[f64]) -> Result<PairSimilarity, InfodiffError> {
    if a.len() != b.len() {
        return Err(InfodiffError::LengthMismatch(a.len(), b.len()));
    }
    let k = a.len();
    if k < 2 {
        return Err(InfodiffError::TooFewDocuments(k));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| cmp_f64(x.0, y.0).then(cmp_f64(x.1, y.1)));

    let ties_a = count_tied_runs(&pairs, |x, y| x.0 == y.0);
    let joint_ties = count_tied_runs(&pairs, |x, y| x.0 == y.0 && x.1 == y.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; k];
    let discordant = merge_count(&mut ys, &mut buf);
    let ties_b = count_tied_runs(&ys, |x, y| x == y);

    let n_pairs = tied_pairs(k as u64);
    let concordant = n_pairs + joint_ties - discordant - ties_a - ties_b;
    Ok(PairSimilarity::from_counts(
        concordant, discordant, n_pairs, ties_a, ties_b, joint_ties,
    ))
}

/// Kendall's tau-b between the probability rankings of two prediction lists
/// over the same documents.
pub fn kendall_tau(a: &PredictionList, b: &PredictionList) -> Result<PairSimilarity, InfodiffError> {
    if !a.same_documents(b) {
        return Err(InfodiffError::DocumentMismatch {
            a: a.source().label(),
            b: b.source().label(),
        });
    }
    let ra = to_ranks(a, false)?;
    let rb = to_ranks(b, false)?;
    kendall_tau_values(&ra, &rb)
}
