//! Sigmoid (Platt-style) calibration of decision margins.

use serde::{Deserialize, Serialize};

/// Scale `a` used when the likelihood fit does not produce a negative slope.
/// Keeping `a < 0` guarantees probabilities increase with the margin.
pub const FALLBACK_SCALE: f64 = -1e-3;

/// `p = 1 / (1 + exp(a·m + b))`. With the fitting convention used here `a` is
/// always negative, so `p` is increasing in the margin `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { a: -1.0, b: 0.0 }
    }
}

impl Calibration {
    pub fn probability(&self, margin: f64) -> f64 {
        sigmoid_neg(self.a * margin + self.b)
    }
}

/// `1 / (1 + exp(z))`, evaluated without overflow.
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Negative log-likelihood of smoothed targets under `(a, b)`.
fn nll(margins: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    margins
        .iter()
        .zip(targets)
        .map(|(&m, &t)| {
            let z = a * m + b;
            // t·z + log(1 + exp(-z)), stable in both tails
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

fn smoothed_targets(labels: &[u8]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&y| if y == 1 { hi } else { lo }).collect()
}

/// Newton iterations with backtracking line search on the calibration
/// likelihood, following the Lin–Lin–Weng refinement of Platt's method.
/// When `fix_a` is given only `b` is optimized.
fn newton(margins: &[f64], targets: &[f64], start: (f64, f64), fix_a: Option<f64>) -> (f64, f64) {
    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let (mut a, mut b) = match fix_a {
        Some(fa) => (fa, start.1),
        None => start,
    };
    let mut fval = nll(margins, targets, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&m, &t) in margins.iter().zip(targets) {
            let p = sigmoid_neg(a * m + b);
            let q = 1.0 - p;
            let d2 = p * q;
            h11 += m * m * d2;
            h22 += d2;
            h21 += m * d2;
            let d1 = t - p;
            g1 += m * d1;
            g2 += d1;
        }
        let (da, db) = match fix_a {
            Some(_) => {
                if g2.abs() < EPS {
                    break;
                }
                (0.0, -g2 / h22)
            }
            None => {
                if g1.abs() < EPS && g2.abs() < EPS {
                    break;
                }
                let det = h11 * h22 - h21 * h21;
                (
                    -(h22 * g1 - h21 * g2) / det,
                    -(-h21 * g1 + h11 * g2) / det,
                )
            }
        };
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut accepted = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll(margins, targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    (a, b)
}

/// Fits `(a, b)` by maximum likelihood on training margins.
///
/// If the fitted slope is not negative (margins carry no usable signal, or
/// are anti-correlated with the labels) the slope is fixed at
/// [`FALLBACK_SCALE`] and only the offset is refit, so the calibrated
/// probability stays monotone increasing in the margin.
pub fn fit_platt(margins: &[f64], labels: &[u8]) -> Calibration {
    debug_assert_eq!(margins.len(), labels.len());
    if margins.is_empty() {
        return Calibration::default();
    }
    let targets = smoothed_targets(labels);
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let b0 = ((neg + 1.0) / (pos + 1.0)).ln();
    let (a, b) = newton(margins, &targets, (0.0, b0), None);
    if a < 0.0 && a.is_finite() && b.is_finite() {
        return Calibration { a, b };
    }
    let (a, b) = newton(margins, &targets, (FALLBACK_SCALE, b0), Some(FALLBACK_SCALE));
    Calibration { a, b }
}
