//! Deterministic stand-in for an LLM endpoint.
//!
//! In extractive mode the mock locates the section of the note that matches
//! the requested aspect (by its section header) and returns most of its
//! tokens, plus a small random share of tokens from the other sections. All
//! keep/drop decisions are hashed from `(seed, doc_id, aspect, position)`, so
//! output does not depend on request order or concurrency.

use std::str::FromStr;

use super::backend::{BackendError, ChatBackend, ChatRequest, Task};
use super::Aspect;
use crate::corpus::aspect_section_header;
use crate::util::{derive_seed, unit_interval};

#[derive(Debug, Clone, PartialEq)]
pub enum MockMode {
    /// Keep target-section tokens with probability `keep` and other-section
    /// tokens with probability `leak`.
    Extractive { keep: f64, leak: f64 },
    /// Return the first `tokens` whitespace tokens of the user message.
    Echo { tokens: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockBackend {
    pub seed: u64,
    pub mode: MockMode,
    /// Probability of answering "Yes" to a zero-shot prediction request.
    pub yes_rate: f64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            mode: MockMode::Extractive {
                keep: 0.9,
                leak: 0.05,
            },
            yes_rate: 0.6,
        }
    }

    pub fn echo(seed: u64, tokens: usize) -> Self {
        Self {
            seed,
            mode: MockMode::Echo { tokens },
            yes_rate: 0.6,
        }
    }

    fn extract(&self, doc_id: &str, aspect: Aspect, user: &str, keep: f64, leak: f64) -> String {
        let sections = find_sections(user);
        if sections.is_empty() {
            return first_tokens(user, 64);
        }
        let mut kept: Vec<&str> = Vec::new();
        let mut leaked: Vec<&str> = Vec::new();
        for (section_aspect, body) in &sections {
            let target = *section_aspect == aspect;
            let rate = if target { keep } else { leak };
            for (pos, tok) in body.split_whitespace().enumerate() {
                let h = derive_seed(
                    self.seed,
                    &[
                        doc_id,
                        aspect.as_str(),
                        section_aspect.as_str(),
                        &pos.to_string(),
                    ],
                );
                if unit_interval(h) < rate {
                    if target {
                        kept.push(tok);
                    } else {
                        leaked.push(tok);
                    }
                }
            }
        }
        kept.extend(leaked);
        kept.join(" ")
    }
}

/// Splits a prompt into the bodies of the known aspect sections.
fn find_sections(text: &str) -> Vec<(Aspect, &str)> {
    let mut out = Vec::new();
    for aspect in Aspect::ALL {
        let header = aspect_section_header(aspect.as_str());
        if let Some(start) = text.find(&header) {
            let body_start = start + header.len();
            let rest = &text[body_start..];
            let end = rest.find('\n').unwrap_or(rest.len());
            out.push((aspect, &rest[..end]));
        }
    }
    out
}

fn first_tokens(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        match request.task {
            Task::Predict => {
                let h = derive_seed(self.seed, &[request.doc_id, "predict"]);
                Ok(if unit_interval(h) < self.yes_rate {
                    "Yes".to_string()
                } else {
                    "No".to_string()
                })
            }
            Task::Summarize(aspect) => match self.mode {
                MockMode::Echo { tokens } => Ok(first_tokens(request.user, tokens)),
                MockMode::Extractive { keep, leak } => {
                    Ok(self.extract(request.doc_id, aspect, request.user, keep, leak))
                }
            },
        }
    }

    fn fingerprint(&self) -> String {
        format!("mock|{}|{:?}|{}", self.seed, self.mode, self.yes_rate)
    }
}

/// Parses `seed=N[,mode=echo|extractive][,tokens=K][,keep=X][,leak=Y][,yes=Z]`.
impl FromStr for MockBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut seed = None;
        let mut mode = "extractive".to_string();
        let mut tokens = 20usize;
        let mut keep = 0.9;
        let mut leak = 0.05;
        let mut yes = 0.6;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let num_err = |e: &dyn std::fmt::Display| format!("bad value for {k}: {e}");
            match k {
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| num_err(&e))?),
                "mode" => mode = v.to_string(),
                "tokens" => tokens = v.parse().map_err(|e| num_err(&e))?,
                "keep" => keep = v.parse().map_err(|e| num_err(&e))?,
                "leak" => leak = v.parse().map_err(|e| num_err(&e))?,
                "yes" => yes = v.parse().map_err(|e| num_err(&e))?,
                other => return Err(format!("unknown mock option {other:?}")),
            }
        }
        let seed = seed.ok_or("mock spec needs seed=N")?;
        let mode = match mode.as_str() {
            "echo" => MockMode::Echo { tokens },
            "extractive" => MockMode::Extractive { keep, leak },
            other => return Err(format!("unknown mock mode {other:?}")),
        };
        Ok(Self {
            seed,
            mode,
            yes_rate: yes,
        })
    }
}
