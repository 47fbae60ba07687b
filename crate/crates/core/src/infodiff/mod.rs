//! Information difference between prediction lists: Kendall's tau-b, the
//! tau distance, and dataset-level intra-/inter-aspect scores.

mod kendall;
mod report;

use crate::classifier::PredictionList;

pub use kendall::{average_ranks, kendall_tau, kendall_tau_values, tau_distance, to_ranks, PairSimilarity};
pub use report::{build_difference_report, AspectDifferenceReport, InterScore, IntraScore, PairKind, PairRecord};

#[derive(Debug, thiserror::Error)]
pub enum InfodiffError {
    #[error("prediction list is empty")]
    EmptyList,
    #[error("need at least 2 documents, got {0}")]
    TooFewDocuments(usize),
    #[error("value lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("prediction lists {a} and {b} cover different documents")]
    DocumentMismatch { a: String, b: String },
    #[error("prediction list {0} has binary-only probabilities; ranking unavailable")]
    Degenerate(String),
    #[error("tau undefined between {a} and {b}: one list is entirely tied")]
    UndefinedTau { a: String, b: String },
    #[error("run group {0:?} has no runs")]
    EmptyGroup(String),
    #[error("run group {aspect:?} has {ids} run ids for {runs} runs")]
    RunIdMismatch { aspect: String, ids: usize, runs: usize },
    #[error("need at least 2 run groups, got {0}")]
    TooFewGroups(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Seeded runs of one model configuration (typically one summary aspect),
/// all evaluated on the same documents in the same order.
#[derive(Debug, Clone)]
pub struct RunGroup {
    aspect: String,
    ids: Vec<String>,
    runs: Vec<PredictionList>,
}

impl RunGroup {
    /// Run ids are taken from each list's source label.
    pub fn new(aspect: impl Into<String>, runs: Vec<PredictionList>) -> Result<Self, InfodiffError> {
        let ids = runs.iter().map(|r| r.source().label()).collect();
        Self::with_ids(aspect, ids, runs)
    }

    pub fn with_ids(
        aspect: impl Into<String>,
        ids: Vec<String>,
        runs: Vec<PredictionList>,
    ) -> Result<Self, InfodiffError> {
        let aspect = aspect.into();
        if runs.is_empty() {
            return Err(InfodiffError::EmptyGroup(aspect));
        }
        if ids.len() != runs.len() {
            return Err(InfodiffError::RunIdMismatch {
                aspect,
                ids: ids.len(),
                runs: runs.len(),
            });
        }
        for (id, run) in ids.iter().zip(&runs).skip(1) {
            if !run.same_documents(&runs[0]) {
                return Err(InfodiffError::DocumentMismatch {
                    a: ids[0].clone(),
                    b: id.clone(),
                });
            }
        }
        Ok(Self { aspect, ids, runs })
    }

    pub fn aspect(&self) -> &str {
        &self.aspect
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn runs(&self) -> &[PredictionList] {
        &self.runs
    }

    pub fn n(&self) -> usize {
        self.runs.len()
    }
}

/// Row-major matrix of tau distances between the runs of two groups (or of
/// one group with itself).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged distance matrix");
        Self {
            rows: r,
            cols: c,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }

    fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum over all entries divided by rows·cols. For a square self-distance
    /// matrix this is the intra-aspect score with the zero diagonal included.
    pub fn mean(&self) -> f64 {
        self.sum() / (self.rows * self.cols) as f64
    }

    /// Mean over off-diagonal entries of a square matrix; `None` for n < 2.
    pub fn off_diagonal_mean(&self) -> Option<f64> {
        let n = self.rows;
        if n < 2 {
            return None;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += self.get(i, j);
                }
            }
        }
        Some(s / (n * (n - 1)) as f64)
    }
}

fn defined_distance(
    a: &PredictionList,
    b: &PredictionList,
    a_id: &str,
    b_id: &str,
) -> Result<f64, InfodiffError> {
    kendall_tau(a, b)?.distance.ok_or_else(|| InfodiffError::UndefinedTau {
        a: a_id.to_string(),
        b: b_id.to_string(),
    })
}

/// Distances between every run of `group` and every other, diagonal zero.
pub fn self_distance_matrix(group: &RunGroup) -> Result<DistanceMatrix, InfodiffError> {
    let n = group.n();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = defined_distance(&group.runs[i], &group.runs[j], &group.ids[i], &group.ids[j])?;
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    Ok(DistanceMatrix::from_rows(rows))
}

/// Distances between every run of `a` (rows) and every run of `b` (columns).
pub fn cross_distance_matrix(a: &RunGroup, b: &RunGroup) -> Result<DistanceMatrix, InfodiffError> {
    let mut rows = Vec::with_capacity(a.n());
    for (ra, ia) in a.runs.iter().zip(&a.ids) {
        let mut row = Vec::with_capacity(b.n());
        for (rb, ib) in b.runs.iter().zip(&b.ids) {
            row.push(defined_distance(ra, rb, ia, ib)?);
        }
        rows.push(row);
    }
    Ok(DistanceMatrix::from_rows(rows))
}

/// Mean of the n² ordered-pair distances within a group, including the zero
/// self-distances on the diagonal. A single run gives 0.
pub fn intra_aspect_difference(group: &RunGroup) -> Result<f64, InfodiffError> {
    if group.n() == 1 {
        log::warn!("run group {:?} has a single run; intra-aspect score is 0", group.aspect);
    }
    Ok(self_distance_matrix(group)?.mean())
}

/// Mean over ordered pairs of distinct runs, `n(n−1)` denominator; `None`
/// for a single run.
pub fn intra_aspect_difference_offdiag(group: &RunGroup) -> Result<Option<f64>, InfodiffError> {
    Ok(self_distance_matrix(group)?.off_diagonal_mean())
}

/// Mean of the n·m cross-group distances. The summation order is fixed by the
/// aspect labels so the result is exactly symmetric in its arguments.
pub fn inter_aspect_difference(a: &RunGroup, b: &RunGroup) -> Result<f64, InfodiffError> {
    if !a.runs[0].same_documents(&b.runs[0]) {
        return Err(InfodiffError::DocumentMismatch {
            a: a.ids[0].clone(),
            b: b.ids[0].clone(),
        });
    }
    let (first, second) = if (a.aspect.as_str(), &a.ids) <= (b.aspect.as_str(), &b.ids) {
        (a, b)
    } else {
        (b, a)
    };
    Ok(cross_distance_matrix(first, second)?.mean())
}
