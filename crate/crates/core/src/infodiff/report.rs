//! Full pairwise comparison of several run groups.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kendall_tau, DistanceMatrix, InfodiffError, RunGroup};
use crate::util::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Intra,
    Inter,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Intra => "intra",
            PairKind::Inter => "inter",
        }
    }
}

/// One compared pair of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub kind: PairKind,
    pub aspect_a: String,
    pub run_a: String,
    pub aspect_b: String,
    pub run_b: String,
    pub tau: f64,
    pub distance: f64,
    pub concordant: u64,
    pub discordant: u64,
    pub ties_a: u64,
    pub ties_b: u64,
    pub joint_ties: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraScore {
    pub aspect: String,
    pub n: usize,
    /// Mean over all n² ordered pairs, zero diagonal included.
    pub d: f64,
    /// Mean over the n(n−1) off-diagonal pairs; absent for n = 1.
    pub d_offdiag: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterScore {
    pub aspect_a: String,
    pub aspect_b: String,
    pub n: usize,
    pub m: usize,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectDifferenceReport {
    /// Intra pairs (i < j within a group) followed by inter pairs (all
    /// cross-group combinations), in group order.
    pub pairs: Vec<PairRecord>,
    pub intra: Vec<IntraScore>,
    pub inter: Vec<InterScore>,
}

struct Job {
    kind: PairKind,
    ga: usize,
    ia: usize,
    gb: usize,
    ib: usize,
}

/// Compares every pair of runs within and across groups.
pub fn build_difference_report(groups: &[RunGroup]) -> Result<AspectDifferenceReport, InfodiffError> {
    if groups.len() < 2 {
        return Err(InfodiffError::TooFewGroups(groups.len()));
    }
    for g in &groups[1..] {
        if !g.runs()[0].same_documents(&groups[0].runs()[0]) {
            return Err(InfodiffError::DocumentMismatch {
                a: groups[0].ids()[0].clone(),
                b: g.ids()[0].clone(),
            });
        }
    }

    let mut jobs = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for i in 0..group.n() {
            for j in (i + 1)..group.n() {
                jobs.push(Job { kind: PairKind::Intra, ga: g, ia: i, gb: g, ib: j });
            }
        }
    }
    for a in 0..groups.len() {
        for b in (a + 1)..groups.len() {
            for i in 0..groups[a].n() {
                for j in 0..groups[b].n() {
                    jobs.push(Job { kind: PairKind::Inter, ga: a, ia: i, gb: b, ib: j });
                }
            }
        }
    }

    let pairs: Vec<PairRecord> = jobs
        .par_iter()
        .map(|job| {
            let (ga, gb) = (&groups[job.ga], &groups[job.gb]);
            let (run_a, run_b) = (&ga.ids()[job.ia], &gb.ids()[job.ib]);
            let s = kendall_tau(&ga.runs()[job.ia], &gb.runs()[job.ib])?;
            let (tau, distance) = match (s.tau, s.distance) {
                (Some(t), Some(d)) => (t, d),
                _ => {
                    return Err(InfodiffError::UndefinedTau {
                        a: run_a.clone(),
                        b: run_b.clone(),
                    })
                }
            };
            Ok(PairRecord {
                kind: job.kind,
                aspect_a: ga.aspect().to_string(),
                run_a: run_a.clone(),
                aspect_b: gb.aspect().to_string(),
                run_b: run_b.clone(),
                tau,
                distance,
                concordant: s.concordant,
                discordant: s.discordant,
                ties_a: s.ties_a,
                ties_b: s.ties_b,
                joint_ties: s.joint_ties,
            })
        })
        .collect::<Result<_, _>>()?;

    // Reassemble matrices from the pair list (same order as `jobs`).
    let mut cursor = pairs.iter();
    let mut intra = Vec::with_capacity(groups.len());
    for group in groups {
        let n = group.n();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = cursor.next().expect("pair count").distance;
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        let m = DistanceMatrix::from_rows(rows);
        if n == 1 {
            log::warn!("run group {:?} has a single run; intra-aspect score is 0", group.aspect());
        }
        intra.push(IntraScore {
            aspect: group.aspect().to_string(),
            n,
            d: m.mean(),
            d_offdiag: m.off_diagonal_mean(),
        });
    }
    let mut inter = Vec::new();
    for a in 0..groups.len() {
        for b in (a + 1)..groups.len() {
            let (ga, gb) = (&groups[a], &groups[b]);
            let rows: Vec<Vec<f64>> = (0..ga.n())
                .map(|_| (0..gb.n()).map(|_| cursor.next().expect("pair count").distance).collect())
                .collect();
            let m = DistanceMatrix::from_rows(rows);
            // same canonical orientation as inter_aspect_difference
            let m = if (ga.aspect(), ga.ids()) <= (gb.aspect(), gb.ids()) {
                m
            } else {
                m.transpose()
            };
            inter.push(InterScore {
                aspect_a: ga.aspect().to_string(),
                aspect_b: gb.aspect().to_string(),
                n: ga.n(),
                m: gb.n(),
                d: m.mean(),
            });
        }
    }
    Ok(AspectDifferenceReport { pairs, intra, inter })
}

impl AspectDifferenceReport {
    pub fn intra_pairs(&self) -> impl Iterator<Item = &PairRecord> {
        self.pairs.iter().filter(|p| p.kind == PairKind::Intra)
    }

    pub fn inter_pairs(&self) -> impl Iterator<Item = &PairRecord> {
        self.pairs.iter().filter(|p| p.kind == PairKind::Inter)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), InfodiffError> {
        ensure_parent(path)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Per-pair distances, one row per compared pair (boxplot data).
    pub fn write_pairs_csv(&self, path: &Path) -> Result<(), InfodiffError> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "kind", "aspect_a", "run_a", "aspect_b", "run_b", "tau", "distance", "concordant",
            "discordant", "ties_a", "ties_b", "joint_ties",
        ])?;
        for p in &self.pairs {
            w.write_record([
                p.kind.as_str().to_string(),
                p.aspect_a.clone(),
                p.run_a.clone(),
                p.aspect_b.clone(),
                p.run_b.clone(),
                fmt_f64(p.tau),
                fmt_f64(p.distance),
                p.concordant.to_string(),
                p.discordant.to_string(),
                p.ties_a.to_string(),
                p.ties_b.to_string(),
                p.joint_ties.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Dataset-level scores, one row per intra group and per inter pair (bar
    /// chart data).
    pub fn write_scores_csv(&self, path: &Path) -> Result<(), InfodiffError> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "label", "n", "m", "D", "D_offdiag"])?;
        for s in &self.intra {
            w.write_record([
                "intra".to_string(),
                s.aspect.clone(),
                s.n.to_string(),
                s.n.to_string(),
                fmt_f64(s.d),
                s.d_offdiag.map_or_else(|| "undefined".to_string(), fmt_f64),
            ])?;
        }
        for s in &self.inter {
            w.write_record([
                "inter".to_string(),
                format!("{}+{}", s.aspect_a, s.aspect_b),
                s.n.to_string(),
                s.m.to_string(),
                fmt_f64(s.d),
                fmt_f64(s.d),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{PredictionList, RunSource};
    use crate::infodiff::{inter_aspect_difference, intra_aspect_difference};

    fn group(aspect: &str, lists: &[&[f64]]) -> RunGroup {
        let runs = lists
            .iter()
            .enumerate()
            .map(|(i, p)| {
                PredictionList::from_probabilities(
                    (0..p.len()).map(|d| format!("D{d}")),
                    p.iter().copied(),
                    RunSource::new(aspect, Some(i as u64), "test"),
                )
                .unwrap()
            })
            .collect();
        RunGroup::new(aspect, runs).unwrap()
    }

    #[test]
    fn three_groups_of_two() {
        let groups = vec![
            group("plain", &[&[0.1, 0.2, 0.3, 0.4], &[0.2, 0.1, 0.3, 0.4]]),
            group("riskfactor", &[&[0.4, 0.3, 0.2, 0.1], &[0.3, 0.4, 0.2, 0.1]]),
            group("timeline", &[&[0.1, 0.4, 0.2, 0.3], &[0.1, 0.4, 0.3, 0.2]]),
        ];
        let r = build_difference_report(&groups).unwrap();
        assert_eq!(r.intra.len(), 3);
        assert_eq!(r.inter.len(), 3);
        assert_eq!(r.intra_pairs().count(), 3);
        assert_eq!(r.inter_pairs().count(), 12);
        for (s, g) in r.intra.iter().zip(&groups) {
            assert_eq!(s.d, intra_aspect_difference(g).unwrap());
        }
        assert_eq!(r.inter[0].d, inter_aspect_difference(&groups[0], &groups[1]).unwrap());
        assert_eq!(r.inter[2].d, inter_aspect_difference(&groups[2], &groups[1]).unwrap());
        assert!(r.intra.iter().all(|s| (0.0..=1.0).contains(&s.d)));
    }

    #[test]
    fn identical_everywhere_is_zero() {
        let p: &[f64] = &[0.3, 0.1, 0.2];
        let groups = vec![group("a", &[p, p]), group("b", &[p, p]), group("c", &[p])];
        let r = build_difference_report(&groups).unwrap();
        assert!(r.intra.iter().all(|s| s.d == 0.0));
        assert!(r.inter.iter().all(|s| s.d == 0.0));
        assert_eq!(r.intra[2].d_offdiag, None);
    }

    #[test]
    fn needs_two_groups() {
        let g = group("a", &[&[0.1, 0.2]]);
        assert!(matches!(
            build_difference_report(&[g]),
            Err(InfodiffError::TooFewGroups(1))
        ));
    }

    #[test]
    fn exports() {
        let groups = vec![
            group("a", &[&[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1]]),
            group("b", &[&[0.2, 0.1, 0.3]]),
        ];
        let r = build_difference_report(&groups).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(&dir.path().join("r.json")).unwrap();
        r.write_pairs_csv(&dir.path().join("pairs.csv")).unwrap();
        r.write_scores_csv(&dir.path().join("scores.csv")).unwrap();
        let back: AspectDifferenceReport =
            serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        let scores = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
        assert_eq!(scores.lines().count(), 1 + 2 + 1);
        assert!(scores.contains("undefined"));
        let pairs = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
        assert_eq!(pairs.lines().count(), 1 + 1 + 2);
    }
}
