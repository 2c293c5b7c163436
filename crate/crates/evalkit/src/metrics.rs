//! Scalar metrics: landmark error, interior-angle error, force statistics.

use model::joint_angles_from_pose;

use crate::{EvalError, Result};

/// Finger order used everywhere a per-finger quantity appears.
pub const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "little"];

const JOINTS: usize = 21;

/// Mean per-joint position error, cm. Both poses are flattened 21×3
/// wrist-origin landmark sets; no alignment beyond that shared origin is
/// applied, so a uniform translation by `t` scores exactly `|t|`.
pub fn mpjpe(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != 3 * JOINTS || gt.len() != 3 * JOINTS {
        return Err(EvalError::Usage(format!(
            "mpjpe expects two 63-value poses, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut sum = 0.0;
    for j in 0..JOINTS {
        let dx = pred[3 * j] - gt[3 * j];
        let dy = pred[3 * j + 1] - gt[3 * j + 1];
        let dz = pred[3 * j + 2] - gt[3 * j + 2];
        sum += (dx * dx + dy * dy + dz * dz).sqrt();
    }
    Ok(sum / JOINTS as f64)
}

/// Mean absolute interior-angle difference over the 15 finger joints,
/// degrees. Degenerate poses (zero-length bones) are refused rather than
/// scored.
pub fn angle_diff(pred: &[f64], gt: &[f64]) -> Result<f64> {
    let a = joint_angles_from_pose(pred)?;
    let b = joint_angles_from_pose(gt)?;
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok((sum / a.len() as f64).to_degrees())
}

/// One finger's error statistics over a prediction series, normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerStats {
    pub rmse: f64,
    pub mae: f64,
    /// Pearson correlation; 0 when either series is constant (see
    /// [`FingerStats::degenerate`]).
    pub pearson: f64,
    /// True when the correlation was undefined because a series never moved.
    pub degenerate: bool,
}

/// Per-finger statistics plus their across-finger average.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceMetrics {
    pub per_finger: [FingerStats; 5],
    /// Field-wise mean over the five fingers; `degenerate` is true when any
    /// finger's correlation was.
    pub average: FingerStats,
}

/// Compare two T×5 force series. Needs T ≥ 2 — a single sample has no
/// variance to correlate.
pub fn force_metrics(pred: &[[f64; 5]], gt: &[[f64; 5]]) -> Result<ForceMetrics> {
    if pred.len() != gt.len() {
        return Err(EvalError::Usage(format!(
            "force series lengths differ: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(EvalError::Usage(format!(
            "force metrics need at least 2 samples, got {}",
            pred.len()
        )));
    }
    let per_finger: [FingerStats; 5] = std::array::from_fn(|f| {
        let x: Vec<f64> = pred.iter().map(|row| row[f]).collect();
        let y: Vec<f64> = gt.iter().map(|row| row[f]).collect();
        finger_stats(&x, &y)
    });
    let mean = |pick: fn(&FingerStats) -> f64| -> f64 {
        per_finger.iter().map(pick).sum::<f64>() / 5.0
    };
    Ok(ForceMetrics {
        average: FingerStats {
            rmse: mean(|s| s.rmse),
            mae: mean(|s| s.mae),
            pearson: mean(|s| s.pearson),
            degenerate: per_finger.iter().any(|s| s.degenerate),
        },
        per_finger,
    })
}

fn finger_stats(x: &[f64], y: &[f64]) -> FingerStats {
    let n = x.len() as f64;
    let mse: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let mae: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;

    // A constant series has no variance; its correlation is undefined, and
    // "constant" is decided exactly rather than by a variance threshold.
    let constant = |s: &[f64]| s.windows(2).all(|w| w[0] == w[1]);
    if constant(x) || constant(y) {
        return FingerStats {
            rmse: mse.sqrt(),
            mae,
            pearson: 0.0,
            degenerate: true,
        };
    }

    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    FingerStats {
        rmse: mse.sqrt(),
        mae,
        pearson: (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    }
}
