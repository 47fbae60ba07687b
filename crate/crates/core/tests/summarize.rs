//! Summarization over scripted and mock backends.

use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;

use aspectsum::corpus::{generate_synthetic, Corpus, SyntheticSpec};
use aspectsum::summarizer::{
    count_tokens, summarize_corpus, Aspect, AspectPrompt, BackendError, ChatBackend, ChatRequest, LlmEndpointConfig,
    MockBackend, SummarizeOptions, SummarizerError, SummarySet, MAX_SUMMARY_TOKENS,
};

/// Fails every request.
struct Failing(AtomicUsize);

impl ChatBackend for Failing {
    fn complete(&self, _: &ChatRequest<'_>) -> Result<String, BackendError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(BackendError::Generation("model crashed".into()))
    }
    fn fingerprint(&self) -> String {
        "failing".into()
    }
}

/// Answers with `n` tokens for one document, a short reply otherwise.
struct Long {
    doc: String,
    n: usize,
}

impl ChatBackend for Long {
    fn complete(&self, r: &ChatRequest<'_>) -> Result<String, BackendError> {
        if r.doc_id == self.doc {
            Ok((0..self.n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" "))
        } else {
            Ok("short summary".into())
        }
    }
    fn fingerprint(&self) -> String {
        "long".into()
    }
}

fn corpus(n: usize, seed: u64) -> Corpus {
    generate_synthetic(&SyntheticSpec::with_defaults(n, 0.3, seed)).unwrap()
}

fn endpoint(retries: u32) -> LlmEndpointConfig {
    LlmEndpointConfig {
        retries,
        ..LlmEndpointConfig::default()
    }
}

fn run(c: &Corpus, backend: &dyn ChatBackend, retries: u32, options: &SummarizeOptions) -> Result<SummarySet, SummarizerError> {
    summarize_corpus(c, &AspectPrompt::shipped(Aspect::Riskfactor), backend, &endpoint(retries), options).map(|o| o.set)
}

#[test]
fn failures_are_retried_then_reported() {
    let c = corpus(5, 1);
    let backend = Failing(AtomicUsize::new(0));
    let err = run(&c, &backend, 2, &SummarizeOptions::default()).unwrap_err();
    // two retries → three attempts per document
    assert_eq!(backend.0.load(Ordering::SeqCst), 3 * c.len());
    match err {
        SummarizerError::GenerationFailed(m) => {
            assert_eq!(m.failures.len(), c.len());
            assert!(m.failures.iter().all(|f| f.attempts == 3 && f.last_error.contains("crashed")));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn partial_runs_keep_successful_documents() {
    let c = corpus(6, 2);
    struct FailOne(String);
    impl ChatBackend for FailOne {
        fn complete(&self, r: &ChatRequest<'_>) -> Result<String, BackendError> {
            if r.doc_id == self.0 {
                Err(BackendError::Generation("no".into()))
            } else {
                Ok("fine".into())
            }
        }
        fn fingerprint(&self) -> String {
            "fail-one".into()
        }
    }
    let bad = c.documents()[2].doc_id.clone();
    let options = SummarizeOptions {
        permit_partial: true,
        ..SummarizeOptions::default()
    };
    let out = summarize_corpus(
        &c,
        &AspectPrompt::shipped(Aspect::Plain),
        &FailOne(bad.clone()),
        &endpoint(0),
        &options,
    )
    .unwrap();
    assert_eq!(out.set.len(), c.len() - 1);
    assert_eq!(out.manifest.failures.len(), 1);
    assert_eq!(out.manifest.failures[0].doc_id, bad);
    assert!(out.set.check_alignment(&c).is_err());
}

#[test]
fn overlong_summary_is_truncated_and_recorded() {
    let c = corpus(8, 3);
    let doc = c.documents()[0].doc_id.clone();
    let out = summarize_corpus(
        &c,
        &AspectPrompt::shipped(Aspect::Timeline),
        &Long { doc: doc.clone(), n: 600 },
        &endpoint(0),
        &SummarizeOptions::default(),
    )
    .unwrap();
    assert_eq!(out.manifest.truncated, vec![doc]);
    let rec = &out.set.records[0];
    assert!(rec.truncated);
    assert_eq!(count_tokens(&rec.summary_text), MAX_SUMMARY_TOKENS);
    assert!(rec.summary_text.starts_with("w0 w1"));
    assert!(out.set.records.iter().all(|r| count_tokens(&r.summary_text) <= MAX_SUMMARY_TOKENS));
}

#[test]
fn too_many_truncations_fail() {
    let c = corpus(4, 4);
    struct AllLong;
    impl ChatBackend for AllLong {
        fn complete(&self, _: &ChatRequest<'_>) -> Result<String, BackendError> {
            Ok("x ".repeat(700))
        }
        fn fingerprint(&self) -> String {
            "all-long".into()
        }
    }
    let err = run(&c, &AllLong, 0, &SummarizeOptions::default()).unwrap_err();
    assert!(matches!(err, SummarizerError::TooManyTruncated { truncated: 4, total: 4, .. }), "{err}");
}

#[test]
fn summary_files_round_trip() {
    let c = corpus(10, 5);
    let set = run(&c, &MockBackend::new(3), 0, &SummarizeOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    set.save(&path).unwrap();
    assert_eq!(SummarySet::load(&path).unwrap(), set);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mock_summaries_are_pure_aligned_and_bounded(corpus_seed in 0u64..1000, mock_seed in 0u64..1000, n in 3usize..30) {
        let c = corpus(n, corpus_seed);
        let a = run(&c, &MockBackend::new(mock_seed), 0, &SummarizeOptions::default()).unwrap();
        let b = run(&c, &MockBackend::new(mock_seed), 0, &SummarizeOptions::default()).unwrap();
        prop_assert_eq!(&a, &b);
        a.check_alignment(&c).unwrap();
        let ids: Vec<&str> = a.doc_ids().collect();
        let expected: Vec<&str> = c.documents().iter().map(|d| d.doc_id.as_str()).collect();
        prop_assert_eq!(ids, expected);
        prop_assert!(a.records.iter().all(|r| count_tokens(&r.summary_text) <= MAX_SUMMARY_TOKENS));
    }
}
