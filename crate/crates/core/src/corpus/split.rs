use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, Document, Split};

/// Approximate train/dev/test proportions of the reference hospital datasets.
pub const DEFAULT_SPLIT_FRACTIONS: [f64; 3] = [0.7, 0.1, 0.2];

/// Assigns whole patients to train/dev/test.
///
/// Patients are taken in first-occurrence order, shuffled with the seed and
/// cut into contiguous blocks whose sizes come from largest-remainder
/// rounding of `fractions × n_patients`. Every split with a positive fraction
/// receives at least one patient.
pub fn split_by_patient(
    documents: Vec<Document>,
    fractions: [f64; 3],
    seed: u64,
) -> Result<Corpus, CorpusError> {
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0)
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(CorpusError::InvalidFractions(fractions));
    }

    let mut patients: Vec<&str> = Vec::new();
    let mut seen = HashMap::new();
    for doc in &documents {
        seen.entry(doc.patient_id.as_str()).or_insert_with(|| {
            patients.push(doc.patient_id.as_str());
        });
    }
    if patients.len() < Split::ALL.len() {
        return Err(CorpusError::TooFewPatients {
            patients: patients.len(),
            splits: Split::ALL.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let sizes = allocate(patients.len(), &fractions);
    let mut patient_split: HashMap<&str, Split> = HashMap::with_capacity(patients.len());
    let mut cursor = 0;
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        for p in &patients[cursor..cursor + size] {
            patient_split.insert(p, split);
        }
        cursor += size;
    }

    let splits: Vec<Split> = documents
        .iter()
        .map(|d| patient_split[d.patient_id.as_str()])
        .collect();
    Corpus::from_parts(documents, splits)
}

/// Largest-remainder apportionment of `n` items, with a floor of one item per
/// bucket (requires `n >= fractions.len()`).
fn allocate(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let targets: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, t) in sizes.iter_mut().zip(&targets) {
        *s = t.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = targets[a] - targets[a].floor();
        let rb = targets[b] - targets[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    for i in 0..3 {
        if sizes[i] == 0 {
            let donor = (0..3)
                .filter(|&j| sizes[j] >= 2)
                .max_by(|&a, &b| {
                    let sa = sizes[a] as f64 - targets[a];
                    let sb = sizes[b] as f64 - targets[b];
                    sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
                })
                .expect("n >= 3 leaves a bucket with two or more items");
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(patients: &[(&str, usize)]) -> Vec<Document> {
        let mut out = Vec::new();
        for (p, n) in patients {
            for k in 0..*n {
                out.push(Document {
                    doc_id: format!("{p}-{k}"),
                    patient_id: p.to_string(),
                    text: String::new(),
                    label: (k % 2) as u8,
                });
            }
        }
        out
    }

    #[test]
    fn ten_patients_eight_one_one() {
        let ids: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
        let spec: Vec<(&str, usize)> = ids.iter().map(|s| (s.as_str(), 1)).collect();
        let c = split_by_patient(docs(&spec), [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!(c.split_patients(Split::Train).len(), 8);
        assert_eq!(c.split_patients(Split::Dev).len(), 1);
        assert_eq!(c.split_patients(Split::Test).len(), 1);
    }

    #[test]
    fn multi_document_patient_stays_together() {
        let c = split_by_patient(docs(&[("P1", 5), ("P2", 1), ("P3", 1)]), [0.7, 0.1, 0.2], 3)
            .unwrap();
        let s = c.split_of("P1-0").unwrap();
        for k in 1..5 {
            assert_eq!(c.split_of(&format!("P1-{k}")), Some(s));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let ids: Vec<String> = (0..40).map(|i| format!("P{i}")).collect();
        let spec: Vec<(&str, usize)> = ids.iter().map(|s| (s.as_str(), 2)).collect();
        let a = split_by_patient(docs(&spec), DEFAULT_SPLIT_FRACTIONS, 11).unwrap();
        let b = split_by_patient(docs(&spec), DEFAULT_SPLIT_FRACTIONS, 11).unwrap();
        let c = split_by_patient(docs(&spec), DEFAULT_SPLIT_FRACTIONS, 12).unwrap();
        assert_eq!(a.split_assignment(), b.split_assignment());
        assert_ne!(a.split_assignment(), c.split_assignment());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            split_by_patient(docs(&[("P1", 1), ("P2", 1)]), DEFAULT_SPLIT_FRACTIONS, 0),
            Err(CorpusError::TooFewPatients { patients: 2, .. })
        ));
        assert!(matches!(
            split_by_patient(docs(&[("P1", 1), ("P2", 1), ("P3", 1)]), [0.5, 0.3, 0.3], 0),
            Err(CorpusError::InvalidFractions(_))
        ));
        assert!(matches!(
            split_by_patient(docs(&[("P1", 1), ("P2", 1), ("P3", 1)]), [1.0, 0.0, 0.0], 0),
            Err(CorpusError::InvalidFractions(_))
        ));
    }

    proptest! {
        #[test]
        fn patient_disjoint_and_near_target(
            counts in prop::collection::vec(1usize..4, 3..60),
            seed in any::<u64>(),
            a in 0.05f64..1.0, b in 0.05f64..1.0, c in 0.05f64..1.0,
        ) {
            let total = a + b + c;
            let fractions = [a / total, b / total, 1.0 - a / total - b / total];
            let ids: Vec<String> = (0..counts.len()).map(|i| format!("P{i}")).collect();
            let spec: Vec<(&str, usize)> = ids.iter().map(|s| s.as_str()).zip(counts.iter().copied()).collect();
            let corpus = split_by_patient(docs(&spec), fractions, seed).unwrap();
            let n = counts.len() as f64;
            let sets: Vec<_> = Split::ALL.iter().map(|&s| corpus.split_patients(s)).collect();
            for i in 0..3 {
                for j in (i + 1)..3 {
                    prop_assert!(sets[i].is_disjoint(&sets[j]));
                }
                prop_assert!(!sets[i].is_empty());
                // the one-patient floor can push a split off target by at most one more
                prop_assert!((sets[i].len() as f64 - fractions[i] * n).abs() <= 2.0);
            }
            prop_assert_eq!(sets.iter().map(|s| s.len()).sum::<usize>(), counts.len());
        }
    }

    #[test]
    fn allocation_within_one_of_target_when_floor_inactive() {
        for n in 3..200 {
            let sizes = allocate(n, &DEFAULT_SPLIT_FRACTIONS);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            if n >= 10 {
                for (s, f) in sizes.iter().zip(DEFAULT_SPLIT_FRACTIONS) {
                    assert!((*s as f64 - f * n as f64).abs() < 1.0, "n={n} {sizes:?}");
                }
            }
        }
    }
}
