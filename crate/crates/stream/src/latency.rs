//! Nearest-rank latency percentiles.

use serde::Serialize;

use crate::{Result, StreamError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentiles (rank = ⌈p·n⌉, 1-indexed) over latency samples
/// in milliseconds. Needs at least one finite sample.
pub fn latency_stats(samples_ms: &[f64]) -> Result<LatencyStats> {
    if samples_ms.is_empty() {
        return Err(StreamError::Usage("no latency samples".into()));
    }
    if samples_ms.iter().any(|v| !v.is_finite()) {
        return Err(StreamError::Usage("non-finite latency sample".into()));
    }
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = |p: f64| -> f64 {
        let r = (p * sorted.len() as f64).ceil() as usize;
        sorted[r.max(1) - 1]
    };
    Ok(LatencyStats {
        samples: sorted.len(),
        p50_ms: rank(0.50),
        p95_ms: rank(0.95),
        max_ms: *sorted.last().expect("non-empty"),
    })
}
