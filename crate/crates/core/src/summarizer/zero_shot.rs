use rayon::prelude::*;

use super::{
    complete_with_retries, render_template, thread_pool, ChatBackend, ChatRequest,
    LlmEndpointConfig, SummarizerError, Task, SYSTEM_MESSAGE,
};
use crate::classifier::{PredictionEntry, PredictionList, RunSource};
use crate::corpus::Document;

const AFFIRMATIVE: &[&str] = &["yes", "y", "true", "positive", "likely", "readmitted", "1"];
const NEGATIVE: &[&str] = &["no", "n", "false", "negative", "unlikely", "not", "0"];

/// Maps a free-text answer to a label by its first word, case-insensitively.
/// Returns `None` for anything that does not start with a known phrasing.
pub fn parse_binary_response(response: &str) -> Option<u8> {
    let first = response
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .split(|c: char| !c.is_alphanumeric())
        .next()?
        .to_lowercase();
    if AFFIRMATIVE.contains(&first.as_str()) {
        Some(1)
    } else if NEGATIVE.contains(&first.as_str()) {
        Some(0)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct ZeroShotOutcome {
    /// Binary-only predictions; the degenerate-probability flag is set.
    pub predictions: PredictionList,
    /// Documents whose responses could not be parsed (mapped to label 0).
    pub unparseable: Vec<String>,
}

/// Asks the backend for a yes/no outcome per document.
///
/// `prediction_prompt` is a template with one `{note}` placeholder.
pub fn zero_shot_predict(
    documents: &[&Document],
    backend: &dyn ChatBackend,
    endpoint: &LlmEndpointConfig,
    prediction_prompt: &str,
) -> Result<ZeroShotOutcome, SummarizerError> {
    endpoint.validate().map_err(SummarizerError::InvalidConfig)?;
    super::prompt::check_template(prediction_prompt)?;

    let responses: Vec<Result<String, SummarizerError>> =
        thread_pool(endpoint.parallelism).install(|| {
            documents
                .par_iter()
                .map(|doc| {
                    let user = render_template(prediction_prompt, &doc.text)?;
                    let request = ChatRequest {
                        doc_id: &doc.doc_id,
                        task: Task::Predict,
                        system: SYSTEM_MESSAGE,
                        user: &user,
                        max_tokens: 8,
                        temperature: endpoint.temperature,
                    };
                    complete_with_retries(backend, &request, endpoint.retries).map_err(
                        |(_, e)| match e {
                            super::BackendError::Unreachable(m) => {
                                SummarizerError::EndpointUnreachable(m)
                            }
                            other => SummarizerError::InvalidSet(format!(
                                "zero-shot request for {} failed: {other}",
                                doc.doc_id
                            )),
                        },
                    )
                })
                .collect()
        });

    let mut entries = Vec::with_capacity(documents.len());
    let mut unparseable = Vec::new();
    for (doc, response) in documents.iter().zip(responses) {
        let response = response?;
        let label = parse_binary_response(&response).unwrap_or_else(|| {
            unparseable.push(doc.doc_id.clone());
            0
        });
        entries.push(PredictionEntry {
            doc_id: doc.doc_id.clone(),
            probability: label as f64,
            label,
        });
    }
    if !documents.is_empty() && unparseable.len() == documents.len() {
        return Err(SummarizerError::AllUnparseable(documents.len()));
    }
    if !unparseable.is_empty() {
        log::warn!(
            "{} zero-shot response(s) unparseable, counted as negative",
            unparseable.len()
        );
    }
    let source = RunSource {
        aspect: "fullnote".to_string(),
        seed: None,
        model_kind: "zeroshot_llm".to_string(),
    };
    let predictions = PredictionList::from_binary(entries, source)
        .map_err(|e| SummarizerError::InvalidSet(e.to_string()))?;
    Ok(ZeroShotOutcome {
        predictions,
        unparseable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summarizer::BackendError;
    use std::collections::HashMap;

    struct Scripted(HashMap<String, String>);

    impl ChatBackend for Scripted {
        fn complete(&self, r: &ChatRequest<'_>) -> Result<String, BackendError> {
            Ok(self.0[r.doc_id].clone())
        }
        fn fingerprint(&self) -> String {
            "scripted".into()
        }
    }

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document {
                doc_id: format!("D{i}"),
                patient_id: format!("P{i}"),
                text: "note".into(),
                label: 0,
            })
            .collect()
    }

    fn run(answers: &[&str]) -> Result<ZeroShotOutcome, SummarizerError> {
        let d = docs(answers.len());
        let refs: Vec<&Document> = d.iter().collect();
        let map = answers
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("D{i}"), a.to_string()))
            .collect();
        zero_shot_predict(
            &refs,
            &Scripted(map),
            &LlmEndpointConfig::default(),
            super::super::ZERO_SHOT_TEMPLATE,
        )
    }

    #[test]
    fn parser_mapping() {
        assert_eq!(parse_binary_response("Yes"), Some(1));
        assert_eq!(parse_binary_response("  no."), Some(0));
        assert_eq!(parse_binary_response("YES, the patient..."), Some(1));
        assert_eq!(parse_binary_response("\"Unlikely\""), Some(0));
        assert_eq!(parse_binary_response("The patient seems stable"), None);
        assert_eq!(parse_binary_response(""), None);
        assert_eq!(parse_binary_response("Yesterday"), None);
    }

    #[test]
    fn yes_no_yes() {
        let out = run(&["Yes", "No", "Yes"]).unwrap();
        assert_eq!(out.predictions.labels(), vec![1, 0, 1]);
        assert_eq!(out.predictions.probabilities(), vec![1.0, 0.0, 1.0]);
        assert!(out.predictions.degenerate_probabilities());
        assert!(out.unparseable.is_empty());
    }

    #[test]
    fn unparseable_falls_back_to_negative() {
        let out = run(&["The patient seems stable", "Yes"]).unwrap();
        assert_eq!(out.predictions.labels(), vec![0, 1]);
        assert_eq!(out.unparseable, vec!["D0".to_string()]);
    }

    #[test]
    fn all_unparseable_is_an_error() {
        assert!(matches!(
            run(&["maybe", "hmm"]),
            Err(SummarizerError::AllUnparseable(2))
        ));
    }
}
