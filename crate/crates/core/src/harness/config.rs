//! Declarative experiment configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::BowSvmConfig;
use crate::summarizer::{Aspect, LlmEndpointConfig, MockBackend, SummarizeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Train the bag-of-words SVM on summaries.
    BowSvm,
    /// Read prediction CSVs produced elsewhere (e.g. fine-tuned transformers).
    ExternalPredictions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One model per aspect.
    None,
    /// One model on per-document concatenated summaries.
    Merged,
    /// One model on the union of the summary sets, soft-voted at test time.
    UnionSoftvote,
    /// One model on the union of the summary sets, any-voted at test time.
    UnionAnyvote,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Merged => "merged",
            Strategy::UnionSoftvote => "union_softvote",
            Strategy::UnionAnyvote => "union_anyvote",
        })
    }
}

fn default_aspects() -> Vec<Aspect> {
    Aspect::ALL.to_vec()
}

fn default_strategies() -> Vec<Strategy> {
    vec![
        Strategy::None,
        Strategy::Merged,
        Strategy::UnionSoftvote,
        Strategy::UnionAnyvote,
    ]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_workers() -> usize {
    4
}

fn default_model_kind() -> ModelKind {
    ModelKind::BowSvm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// JSONL corpus with split assignments.
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_aspects")]
    pub aspects: Vec<Aspect>,
    #[serde(default = "default_model_kind")]
    pub model_kind: ModelKind,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Mock backend spec such as `seed=7`; takes precedence over `endpoint`.
    #[serde(default)]
    pub mock: Option<String>,
    #[serde(default)]
    pub endpoint: Option<LlmEndpointConfig>,
    #[serde(default)]
    pub summarizer: SummarizeOptions,
    #[serde(default)]
    pub classifier: BowSvmConfig,
    /// Directory of `{condition}_seed{N}.csv` files for `external_predictions`.
    #[serde(default)]
    pub predictions_dir: Option<PathBuf>,
    /// Summary cache; defaults to `<out_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Prefix union training records with their aspect name.
    #[serde(default)]
    pub union_tag_aspect: bool,
    /// Also run zero-shot prediction on the full test notes.
    #[serde(default)]
    pub zero_shot: bool,
    /// Concurrent training jobs.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    /// Reads a TOML (or, by extension, JSON) config. Relative paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.out_dir);
        if let Some(p) = self.predictions_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.cache_dir.as_mut() {
            fix(p);
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn mock_backend(&self) -> Result<Option<MockBackend>, ConfigError> {
        self.mock
            .as_deref()
            .map(|s| s.parse().map_err(ConfigError::Invalid))
            .transpose()
    }

    pub fn endpoint_config(&self) -> LlmEndpointConfig {
        self.endpoint.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return invalid("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return invalid(format!("seeds must be distinct: {:?}", self.seeds));
        }
        if self.aspects.is_empty() {
            return invalid("at least one aspect is required".into());
        }
        if self.aspects.iter().collect::<HashSet<_>>().len() != self.aspects.len() {
            return invalid(format!("aspects must be distinct: {:?}", self.aspects));
        }
        let needs_all = self.strategies.iter().any(|s| *s != Strategy::None);
        if needs_all && Aspect::ALL.iter().any(|a| !self.aspects.contains(a)) {
            return invalid("merged and union strategies need all three aspects".into());
        }
        if self.workers == 0 {
            return invalid("workers must be >= 1".into());
        }
        if !self.corpus.is_file() {
            return invalid(format!("corpus {} does not exist", self.corpus.display()));
        }
        match self.model_kind {
            ModelKind::BowSvm => {
                if self.mock.is_none() && self.endpoint.is_none() {
                    return invalid("bow_svm needs `mock` or `endpoint` to produce summaries".into());
                }
                self.mock_backend()?;
                self.classifier
                    .svm
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            ModelKind::ExternalPredictions => match &self.predictions_dir {
                Some(dir) if dir.is_dir() => {}
                Some(dir) => return invalid(format!("predictions_dir {} does not exist", dir.display())),
                None => return invalid("external_predictions needs predictions_dir".into()),
            },
        }
        if self.zero_shot && self.mock.is_none() && self.endpoint.is_none() {
            return invalid("zero_shot needs `mock` or `endpoint`".into());
        }
        self.endpoint_config()
            .validate()
            .map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_toml_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "corpus = \"c.jsonl\"\nout_dir = \"out\"\nmock = \"seed=1\"\n").unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.aspects, Aspect::ALL.to_vec());
        assert_eq!(cfg.strategies.len(), 4);
        assert_eq!(cfg.corpus, dir.path().join("c.jsonl"));
        assert_eq!(cfg.cache_dir(), dir.path().join("out").join("cache"));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_invalid_configs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
        let base = |extra: &str| {
            let path = dir.path().join("exp.toml");
            std::fs::write(
                &path,
                format!("corpus = \"c.jsonl\"\nout_dir = \"out\"\nmock = \"seed=1\"\n{extra}"),
            )
            .unwrap();
            ExperimentConfig::load(&path)
        };
        assert!(base("seeds = []").unwrap().validate().is_err());
        assert!(base("seeds = [1, 1]").unwrap().validate().is_err());
        assert!(base("aspects = [\"plain\"]").unwrap().validate().is_err());
        assert!(base("aspects = [\"plain\"]\nstrategies = [\"none\"]")
            .unwrap()
            .validate()
            .is_ok());
        assert!(base("model_kind = \"external_predictions\"").unwrap().validate().is_err());
        assert!(matches!(base("bogus = 1"), Err(ConfigError::Parse { .. })));
        let mut cfg = base("").unwrap();
        cfg.corpus = dir.path().join("missing.jsonl");
        assert!(cfg.validate().is_err());
    }
}
