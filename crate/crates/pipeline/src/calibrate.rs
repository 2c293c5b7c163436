//! Per-user EMG calibration from the two scripted reference trials.

use crate::emg::rectify_smooth;
use crate::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationProfile {
    pub user_id: u32,
    /// Rectified-mean amplitude at rest, mV.
    pub emg_rest_level: f64,
    /// 95th-percentile envelope during maximum contraction, mV.
    pub emg_mvc_level: f64,
}

/// Derive a user's EMG normalization anchors. `rest_mv` and `mvc_mv` are
/// the raw signals of the rest and maximum-contraction trials; both must
/// cover at least 2 s at 100 Hz.
pub fn calibrate(user_id: u32, rest_mv: &[f64], mvc_mv: &[f64]) -> Result<CalibrationProfile> {
    const MIN_SAMPLES: usize = 200; // 2 s at 100 Hz
    for got in [rest_mv.len(), mvc_mv.len()] {
        if got < MIN_SAMPLES {
            return Err(PipelineError::TooShort {
                need: MIN_SAMPLES,
                got,
            });
        }
    }

    let rest = rest_mv.iter().map(|v| v.abs()).sum::<f64>() / rest_mv.len() as f64;

    let mut envelope = rectify_smooth(mvc_mv)?;
    envelope.sort_by(|a, b| a.partial_cmp(b).expect("finite envelope"));
    let rank = ((envelope.len() - 1) as f64 * 0.95).round() as usize;
    let mvc = envelope[rank];

    if mvc <= rest || rest <= 0.0 {
        return Err(PipelineError::CalibrationFailed { rest, mvc });
    }
    Ok(CalibrationProfile {
        user_id,
        emg_rest_level: rest,
        emg_mvc_level: mvc,
    })
}

/// Map an envelope value into calibrated units: 0 at rest, 1 at MVC.
pub fn normalize_emg(envelope_mv: f64, cal: &CalibrationProfile) -> f64 {
    (envelope_mv - cal.emg_rest_level) / (cal.emg_mvc_level - cal.emg_rest_level)
}
