//! Mean/standard-deviation aggregation across seeded runs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 when n = 1.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot aggregate an empty series")]
pub struct EmptySeries;

pub fn aggregate(values: &[f64]) -> Result<AggregateResult, EmptySeries> {
    let n = values.len();
    if n == 0 {
        return Err(EmptySeries);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    // a constant series aggregates to exactly that constant
    if values.iter().all(|&v| v == values[0]) {
        return Ok(AggregateResult {
            mean: values[0],
            std: 0.0,
            n,
        });
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(AggregateResult {
        mean,
        std: (ss / (n - 1) as f64).sqrt(),
        n,
    })
}

/// Quantile with linear interpolation between order statistics (the common
/// "type 7" definition). `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}
