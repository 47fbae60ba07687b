//! Bag-of-words features, a linear SVM with sigmoid calibration, and
//! prediction lists.

mod calibration;
mod features;
mod predictions;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::{fit_platt, Calibration, FALLBACK_SCALE};
pub use features::{build_vocabulary, tokenize, FeatureVector, Vocabulary, Weighting};
pub use predictions::{
    ingest_predictions, PredictionEntry, PredictionError, PredictionList, RunSource,
};
pub use svm::{
    hinge_subgradient, svm_objective, train_svm, train_svm_traced, LinearModel, SvmHyperParams,
    TrainTrace,
};

/// Identifies the model file layout.
pub const MODEL_FORMAT: &str = "aspectsum-bow-svm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("no token reaches min_frequency {min_frequency}")]
    EmptyVocabulary { min_frequency: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("feature index {index} out of range for dimension {dim}")]
    FeatureOutOfRange { index: usize, dim: usize },
    #[error("training loss became non-finite")]
    NonFiniteLoss,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("unsupported model file (format {format:?}, version {version})")]
    UnsupportedModel { format: String, version: u32 },
    #[error(transparent)]
    Predictions(#[from] PredictionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Featurization and training settings for the bag-of-words SVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BowSvmConfig {
    pub min_frequency: usize,
    pub weighting: Weighting,
    #[serde(flatten)]
    pub svm: SvmHyperParams,
}

impl Default for BowSvmConfig {
    fn default() -> Self {
        Self {
            min_frequency: 2,
            weighting: Weighting::Counts,
            svm: SvmHyperParams::default(),
        }
    }
}

/// A trained text classifier: vocabulary plus linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowSvmModel {
    pub format: String,
    pub version: u32,
    pub vocabulary: Vocabulary,
    pub model: LinearModel,
}

impl BowSvmModel {
    /// Builds the vocabulary from the training texts and trains the SVM.
    pub fn train<S: AsRef<str>>(
        texts: &[S],
        labels: &[u8],
        config: &BowSvmConfig,
        seed: u64,
    ) -> Result<Self, ClassifierError> {
        assert_eq!(texts.len(), labels.len(), "texts and labels must align");
        let vocabulary = build_vocabulary(texts, config.min_frequency)?.with_weighting(config.weighting);
        let examples: Vec<(FeatureVector, u8)> = texts
            .iter()
            .zip(labels)
            .map(|(t, &y)| (vocabulary.featurize(t.as_ref()), y))
            .collect();
        let model = train_svm(&examples, vocabulary.len(), &config.svm, seed)?;
        Ok(Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            vocabulary,
            model,
        })
    }

    /// Predicts `(doc_id, text)` pairs in the given order.
    pub fn predict_texts<'a, I>(&self, items: I, source: RunSource) -> Result<PredictionList, ClassifierError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let feats: Vec<(&str, FeatureVector)> = items
            .into_iter()
            .map(|(id, text)| (id, self.vocabulary.featurize(text)))
            .collect();
        self.model
            .predict(feats.iter().map(|(id, x)| (*id, x)), source)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let model: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(ClassifierError::UnsupportedModel {
                format: model.format,
                version: model.version,
            });
        }
        if model.model.weights.len() != model.vocabulary.len() {
            return Err(ClassifierError::FeatureOutOfRange {
                index: model.vocabulary.len(),
                dim: model.model.weights.len(),
            });
        }
        Ok(model)
    }
}
