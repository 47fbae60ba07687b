//! Synthetic discharge-note corpus with planted per-aspect label signal.
//!
//! Each note has one section per aspect, introduced by a fixed header. Noise
//! tokens fill every section. For positive notes each signal token of an
//! aspect is planted in that aspect's section with probability
//! `signal_strength`; for negative notes the rate is
//! `signal_strength × negative_signal_factor` (strictly lower whenever the
//! strength is positive).

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{split_by_patient, DEFAULT_SPLIT_FRACTIONS};
use super::{Corpus, CorpusError, Document};

const SYLLABLES: [&str; 24] = [
    "ba", "ke", "mi", "to", "ru", "sa", "le", "no", "vi", "da", "po", "gu", "fe", "ha", "jo",
    "ly", "ze", "wu", "ri", "co", "ne", "ta", "si", "mo",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_documents: usize,
    pub n_patients: usize,
    pub positive_ratio: f64,
    /// Aspect name → label-informative tokens. Sets must be pairwise disjoint.
    pub aspect_signal_tokens: BTreeMap<String, Vec<String>>,
    /// Probability that a given signal token appears in a positive note.
    pub signal_strength: f64,
    pub noise_vocab_size: usize,
    pub seed: u64,
    /// Noise tokens per aspect section.
    #[serde(default = "default_section_length")]
    pub section_length: usize,
    /// Signal rate in negatives relative to positives; must be in [0, 1).
    #[serde(default = "default_negative_signal_factor")]
    pub negative_signal_factor: f64,
    #[serde(default = "default_fractions")]
    pub split_fractions: [f64; 3],
}

fn default_section_length() -> usize {
    40
}

fn default_negative_signal_factor() -> f64 {
    0.25
}

fn default_fractions() -> [f64; 3] {
    DEFAULT_SPLIT_FRACTIONS
}

/// Default planted tokens for the three shipped aspects.
pub fn default_signal_tokens() -> BTreeMap<String, Vec<String>> {
    let mk = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut m = BTreeMap::new();
    m.insert(
        "plain".to_string(),
        mk(&["noncompliant", "eloped", "homeless", "unemployed", "isolated", "discord"]),
    );
    m.insert(
        "riskfactor".to_string(),
        mk(&["suicidal", "substance", "overdose", "impulsive", "hopeless", "trauma"]),
    );
    m.insert(
        "timeline".to_string(),
        mk(&["relapsed", "restarted", "discontinued", "readmitted", "escalated", "abrupt"]),
    );
    m
}

/// Section header that introduces an aspect's region of a synthetic note.
pub fn aspect_section_header(aspect: &str) -> String {
    match aspect {
        "plain" => "HOSPITAL COURSE:".to_string(),
        "riskfactor" => "RISK FACTORS:".to_string(),
        "timeline" => "COURSE TIMELINE:".to_string(),
        other => format!("{}:", other.to_uppercase()),
    }
}

impl SyntheticSpec {
    /// A spec over the three default aspects.
    pub fn with_defaults(n_documents: usize, positive_ratio: f64, seed: u64) -> Self {
        Self {
            n_documents,
            n_patients: (n_documents * 4 / 5).max(3),
            positive_ratio,
            aspect_signal_tokens: default_signal_tokens(),
            signal_strength: 0.3,
            noise_vocab_size: 600,
            seed,
            section_length: default_section_length(),
            negative_signal_factor: default_negative_signal_factor(),
            split_fractions: DEFAULT_SPLIT_FRACTIONS,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if !(self.positive_ratio > 0.0 && self.positive_ratio < 1.0) {
            return bad(format!("positive_ratio {} not in (0,1)", self.positive_ratio));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad(format!("signal_strength {} not in [0,1]", self.signal_strength));
        }
        if !(0.0..1.0).contains(&self.negative_signal_factor) {
            return bad(format!(
                "negative_signal_factor {} not in [0,1)",
                self.negative_signal_factor
            ));
        }
        if self.noise_vocab_size == 0 {
            return bad("noise vocabulary is empty".to_string());
        }
        if self.n_patients == 0 || self.n_patients > self.n_documents {
            return bad(format!(
                "n_patients {} must be in 1..={}",
                self.n_patients, self.n_documents
            ));
        }
        if self.aspect_signal_tokens.is_empty() {
            return bad("no aspects".to_string());
        }
        let mut seen: BTreeMap<String, &str> = BTreeMap::new();
        for (aspect, tokens) in &self.aspect_signal_tokens {
            for t in tokens {
                if !is_single_token(t) {
                    return bad(format!("signal token {t:?} is not a single lowercase token"));
                }
                if let Some(other) = seen.insert(t.clone(), aspect) {
                    if other != aspect {
                        return bad(format!(
                            "overlapping aspect token sets: {t:?} in {other} and {aspect}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_single_token(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
}

/// Deterministic pseudo-word vocabulary disjoint from `exclude`.
fn noise_vocabulary(size: usize, exclude: &HashSet<String>) -> Result<Vec<String>, CorpusError> {
    let mut words = Vec::with_capacity(size);
    let n = SYLLABLES.len();
    'outer: for len in 2..=4u32 {
        for mut code in 0..n.pow(len) {
            let mut w = String::new();
            for _ in 0..len {
                w.push_str(SYLLABLES[code % n]);
                code /= n;
            }
            if !exclude.contains(&w) {
                words.push(w);
                if words.len() == size {
                    break 'outer;
                }
            }
        }
    }
    if words.len() < size {
        return Err(CorpusError::InvalidSpec(format!(
            "noise_vocab_size {size} exceeds the generator's capacity"
        )));
    }
    Ok(words)
}

/// Generates a labeled, patient-split corpus. Pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;

    let mut reserved: HashSet<String> = spec
        .aspect_signal_tokens
        .values()
        .flatten()
        .cloned()
        .collect();
    for aspect in spec.aspect_signal_tokens.keys() {
        for word in aspect_section_header(aspect).split(|c: char| !c.is_alphanumeric()) {
            if !word.is_empty() {
                reserved.insert(word.to_lowercase());
            }
        }
    }
    let noise = noise_vocabulary(spec.noise_vocab_size, &reserved)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n = spec.n_documents;
    let n_pos = (spec.positive_ratio * n as f64).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);

    let mut patient_of: Vec<usize> = (0..n)
        .map(|i| {
            if i < spec.n_patients {
                i
            } else {
                rng.gen_range(0..spec.n_patients)
            }
        })
        .collect();
    patient_of.shuffle(&mut rng);

    let id_width = digits(n);
    let pid_width = digits(spec.n_patients);
    let mut documents = Vec::with_capacity(n);
    for i in 0..n {
        let label = labels[i];
        let mut text = String::from("DISCHARGE NOTE");
        for (aspect, signal) in &spec.aspect_signal_tokens {
            let rate = if label == 1 {
                spec.signal_strength
            } else {
                spec.signal_strength * spec.negative_signal_factor
            };
            let mut section: Vec<&str> = (0..spec.section_length)
                .map(|_| noise[rng.gen_range(0..noise.len())].as_str())
                .collect();
            for tok in signal {
                // always draw so the stream does not depend on the label
                let u: f64 = rng.gen();
                let pos = rng.gen_range(0..=section.len());
                if u < rate {
                    section.insert(pos, tok);
                }
            }
            text.push('\n');
            text.push_str(&aspect_section_header(aspect));
            for tok in section {
                text.push(' ');
                text.push_str(tok);
            }
        }
        documents.push(Document {
            doc_id: format!("D{:0width$}", i, width = id_width),
            patient_id: format!("P{:0width$}", patient_of[i], width = pid_width),
            text,
            label,
        });
    }

    split_by_patient(documents, spec.split_fractions, spec.seed)
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    #[test]
    fn byte_identical_for_same_seed() {
        let spec = SyntheticSpec::with_defaults(200, 0.3, 7);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        generate_synthetic(&spec).unwrap().save(&a).unwrap();
        generate_synthetic(&spec).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let other = generate_synthetic(&SyntheticSpec::with_defaults(200, 0.3, 8)).unwrap();
        assert_ne!(other, generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn realized_ratio_close_to_target() {
        let c = generate_synthetic(&SyntheticSpec::with_defaults(1000, 0.3, 1)).unwrap();
        let positives = c.documents().iter().filter(|d| d.label == 1).count();
        let r = positives as f64 / 1000.0;
        assert!((0.28..=0.32).contains(&r), "{r}");
    }

    #[test]
    fn sections_present_and_signals_confined() {
        let spec = SyntheticSpec::with_defaults(300, 0.3, 2);
        let c = generate_synthetic(&spec).unwrap();
        for d in c.documents() {
            for aspect in spec.aspect_signal_tokens.keys() {
                let header = aspect_section_header(aspect);
                let start = d.text.find(&header).expect("header present");
                let line = d.text[start..].lines().next().unwrap();
                for other in spec.aspect_signal_tokens.iter().filter(|(a, _)| *a != aspect) {
                    for t in other.1 {
                        assert!(!line.split(' ').any(|w| w == t));
                    }
                }
            }
        }
        assert!(!c.split_patients(Split::Test).is_empty());
    }

    #[test]
    fn positives_carry_more_signal() {
        let spec = SyntheticSpec::with_defaults(1000, 0.3, 3);
        let c = generate_synthetic(&spec).unwrap();
        let signal: HashSet<&str> = spec
            .aspect_signal_tokens
            .values()
            .flatten()
            .map(|s| s.as_str())
            .collect();
        let mut per_class = [(0usize, 0usize); 2];
        for d in c.documents() {
            let hits = d.text.split_whitespace().filter(|w| signal.contains(w)).count();
            let e = &mut per_class[d.label as usize];
            e.0 += hits;
            e.1 += 1;
        }
        let neg = per_class[0].0 as f64 / per_class[0].1 as f64;
        let pos = per_class[1].0 as f64 / per_class[1].1 as f64;
        assert!(pos > 2.0 * neg, "pos {pos} neg {neg}");
    }

    #[test]
    fn zero_strength_has_no_signal_tokens() {
        let mut spec = SyntheticSpec::with_defaults(200, 0.3, 4);
        spec.signal_strength = 0.0;
        let c = generate_synthetic(&spec).unwrap();
        let signal: HashSet<&str> = spec
            .aspect_signal_tokens
            .values()
            .flatten()
            .map(|s| s.as_str())
            .collect();
        for d in c.documents() {
            assert!(!d.text.split_whitespace().any(|w| signal.contains(w)));
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = SyntheticSpec::with_defaults(100, 0.3, 0);
        spec.aspect_signal_tokens
            .get_mut("timeline")
            .unwrap()
            .push("suicidal".into());
        let err = generate_synthetic(&spec).unwrap_err();
        assert!(err.to_string().contains("overlapping"), "{err}");

        let mut spec = SyntheticSpec::with_defaults(100, 0.3, 0);
        spec.noise_vocab_size = 0;
        assert!(generate_synthetic(&spec).is_err());

        let mut spec = SyntheticSpec::with_defaults(100, 0.3, 0);
        spec.positive_ratio = 1.0;
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn spec_toml_uses_defaults() {
        let spec: SyntheticSpec = toml::from_str(
            r#"
            n_documents = 50
            n_patients = 40
            positive_ratio = 0.3
            signal_strength = 0.4
            noise_vocab_size = 100
            seed = 9
            [aspect_signal_tokens]
            plain = ["alpha"]
            riskfactor = ["beta"]
            timeline = ["gamma"]
            "#,
        )
        .unwrap();
        assert_eq!(spec.section_length, 40);
        assert_eq!(spec.split_fractions, DEFAULT_SPLIT_FRACTIONS);
        assert_eq!(generate_synthetic(&spec).unwrap().len(), 50);
    }
}
