//! Linear SVM trained by stochastic subgradient descent on the regularized
//! hinge loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::calibration::{fit_platt, Calibration};
use super::features::FeatureVector;
use super::predictions::{PredictionEntry, PredictionList, RunSource};
use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmHyperParams {
    /// L2 regularization strength λ.
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; the step at update `t` is `eta0 / (1 + λ·eta0·t)`.
    pub eta0: f64,
}

impl Default for SvmHyperParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            eta0: 0.01,
        }
    }
}

impl SvmHyperParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let ok = self.lambda > 0.0
            && self.lambda.is_finite()
            && self.eta0 > 0.0
            && self.eta0 * self.lambda < 1.0
            && self.epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(ClassifierError::InvalidHyperParams(format!("{self:?}")))
        }
    }

    pub fn step_size(&self, t: u64) -> f64 {
        self.eta0 / (1.0 + self.lambda * self.eta0 * t as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibration: Calibration,
    pub train_seed: u64,
}

/// Label in {0,1} mapped to {-1,+1}.
fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `λ/2·‖w‖² + mean(max(0, 1 − y(w·x + b)))`.
pub fn svm_objective(weights: &[f64], bias: f64, examples: &[(FeatureVector, u8)], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    if examples.is_empty() {
        return reg;
    }
    let hinge: f64 = examples
        .iter()
        .map(|(x, y)| (1.0 - sign(*y) * (x.dot(weights) + bias)).max(0.0))
        .sum();
    reg + hinge / examples.len() as f64
}

/// Subgradient of [`svm_objective`] with respect to `(weights, bias)`. At a
/// hinge kink the zero branch is taken.
pub fn hinge_subgradient(
    weights: &[f64],
    bias: f64,
    examples: &[(FeatureVector, u8)],
    lambda: f64,
) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut gb = 0.0;
    let n = examples.len().max(1) as f64;
    for (x, y) in examples {
        let ys = sign(*y);
        if ys * (x.dot(weights) + bias) < 1.0 {
            for &(i, v) in x.entries() {
                gw[i] -= ys * v / n;
            }
            gb -= ys / n;
        }
    }
    (gw, gb)
}

/// Result of training, with the regularized objective after every epoch.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub model: LinearModel,
    pub epoch_objectives: Vec<f64>,
}

/// Trains on `(features, label)` pairs with labels in {0,1}; see
/// [`train_svm_traced`].
pub fn train_svm(
    examples: &[(FeatureVector, u8)],
    dim: usize,
    hyper: &SvmHyperParams,
    seed: u64,
) -> Result<LinearModel, ClassifierError> {
    train_svm_traced(examples, dim, hyper, seed).map(|t| t.model)
}

/// Seeded SGD over shuffled epochs, then sigmoid calibration on the training
/// margins. `dim` is the feature-space size; every index must be below it.
///
/// The weight vector is stored as `scale · v` so that the shrink step of the
/// regularizer costs O(1) per update. The bias is not regularized.
pub fn train_svm_traced(
    examples: &[(FeatureVector, u8)],
    dim: usize,
    hyper: &SvmHyperParams,
    seed: u64,
) -> Result<TrainTrace, ClassifierError> {
    hyper.validate()?;
    let pos = examples.iter().filter(|(_, y)| *y == 1).count();
    if pos == 0 || pos == examples.len() {
        return Err(ClassifierError::SingleClass);
    }
    for (x, y) in examples {
        if *y > 1 {
            return Err(ClassifierError::InvalidLabel(*y));
        }
        if x.dim_hint() > dim {
            return Err(ClassifierError::FeatureOutOfRange {
                index: x.dim_hint() - 1,
                dim,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut v = vec![0.0; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0;
    let mut t: u64 = 0;
    let mut epoch_objectives = Vec::with_capacity(hyper.epochs);
    let mut w = vec![0.0; dim];

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (x, y) = &examples[idx];
            let ys = sign(*y);
            let eta = hyper.step_size(t);
            let margin = scale * x.dot(&v) + bias;
            scale *= 1.0 - eta * hyper.lambda;
            if ys * margin < 1.0 {
                let c = eta * ys / scale;
                for &(i, val) in x.entries() {
                    v[i] += c * val;
                }
                bias += eta * ys;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|vi| *vi *= scale);
                scale = 1.0;
            }
            t += 1;
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = scale * vi;
        }
        let obj = svm_objective(&w, bias, examples, hyper.lambda);
        if !obj.is_finite() {
            return Err(ClassifierError::NonFiniteLoss);
        }
        epoch_objectives.push(obj);
    }

    let margins: Vec<f64> = examples.iter().map(|(x, _)| x.dot(&w) + bias).collect();
    let labels: Vec<u8> = examples.iter().map(|(_, y)| *y).collect();
    let calibration = fit_platt(&margins, &labels);
    Ok(TrainTrace {
        model: LinearModel {
            weights: w,
            bias,
            calibration,
            train_seed: seed,
        },
        epoch_objectives,
    })
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &FeatureVector) -> Result<f64, ClassifierError> {
        if x.dim_hint() > self.dim() {
            return Err(ClassifierError::FeatureOutOfRange {
                index: x.dim_hint() - 1,
                dim: self.dim(),
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    pub fn probability(&self, x: &FeatureVector) -> Result<f64, ClassifierError> {
        Ok(self.calibration.probability(self.margin(x)?))
    }

    /// Calibrated probabilities and inclusive-0.5 labels for `(doc_id, x)`.
    pub fn predict<'a, I>(&self, items: I, source: RunSource) -> Result<PredictionList, ClassifierError>
    where
        I: IntoIterator<Item = (&'a str, &'a FeatureVector)>,
    {
        let mut entries = Vec::new();
        for (doc_id, x) in items {
            let p = self.probability(x)?;
            entries.push(PredictionEntry {
                doc_id: doc_id.to_string(),
                probability: p,
                label: u8::from(p >= crate::DECISION_THRESHOLD),
            });
        }
        Ok(PredictionList::new(entries, source)?)
    }
}
