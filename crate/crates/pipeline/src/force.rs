//! Force target normalization: log-transform then min-max.

use serde::{Deserialize, Serialize};

use crate::{PipelineError, Result};

/// Normalized predictions occasionally overshoot 1; values are clipped
/// here rather than letting outliers stretch the target range.
pub const FORCE_CLIP_MAX: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    /// Log-domain bounds: y = (ln(1+f) − force_min)/(force_max − force_min).
    pub force_min: f64,
    pub force_max: f64,
}

impl NormalizationSpec {
    /// Bounds covering the sensor's 0..25 N range exactly.
    pub fn sensor_range() -> Self {
        NormalizationSpec {
            force_min: 0.0,          // ln(1 + 0)
            force_max: 26f64.ln(),   // ln(1 + 25)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.force_max <= self.force_min {
            return Err(PipelineError::Config(format!(
                "force_max {} must exceed force_min {}",
                self.force_max, self.force_min
            )));
        }
        Ok(())
    }
}

/// Newtons → normalized [0, 1.1]. Negative readings are treated as 0.
pub fn normalize_force(force_n: &[f64; 5], spec: &NormalizationSpec) -> [f64; 5] {
    force_n.map(|f| {
        let y = ((1.0 + f.max(0.0)).ln() - spec.force_min) / (spec.force_max - spec.force_min);
        y.clamp(0.0, FORCE_CLIP_MAX)
    })
}

/// Inverse of `normalize_force` for in-range values.
pub fn denormalize_force(y: &[f64; 5], spec: &NormalizationSpec) -> [f64; 5] {
    y.map(|v| {
        let logf = v * (spec.force_max - spec.force_min) + spec.force_min;
        (logf.exp() - 1.0).max(0.0)
    })
}
