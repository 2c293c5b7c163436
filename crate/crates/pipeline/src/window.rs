//! Sliding-window extraction over 30 Hz trial features.

use crate::resample::IMU_COLS;

pub const WINDOW_SIZE: usize = 30;
pub const WINDOW_STEP: usize = 5;

/// One trial after resampling, calibration, and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Features30Hz {
    pub user_id: u32,
    pub gesture_id: u32,
    pub rep: u32,
    /// Unique across a whole dataset; ties windows back to their trial.
    pub trial_id: u32,
    /// Row-major T×24.
    pub imu: Vec<f64>,
    pub emg: Vec<[f64; 6]>,
    pub pose_cm: Vec<[f64; 63]>,
    pub force_norm: Vec<[f64; 5]>,
    pub timestamps_ms: Vec<f64>,
}

impl Features30Hz {
    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }
}

/// One model input/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// Row-major 30×24.
    pub imu: Vec<f64>,
    /// Row-major 30×6.
    pub emg: Vec<f64>,
    /// Wrist-origin landmark coordinates at the window's last frame, cm.
    pub pose_target: [f64; 63],
    /// Normalized per-finger force at the window's last frame.
    pub force_target: [f64; 5],
    pub user_id: u32,
    pub gesture_id: u32,
    pub rep: u32,
    pub trial_id: u32,
    pub t_end_ms: f64,
}

/// Cut a trial into 30-frame windows advancing 5 frames at a time, with
/// targets taken at each window's final frame. Trials shorter than one
/// window yield nothing (logged), so windows never span trial boundaries.
pub fn window(feat: &Features30Hz) -> Vec<WindowedSample> {
    let t = feat.len();
    if t < WINDOW_SIZE {
        log::warn!(
            "trial {} has {} frames (< {}), skipping",
            feat.trial_id,
            t,
            WINDOW_SIZE
        );
        return Vec::new();
    }
    let count = (t - WINDOW_SIZE) / WINDOW_STEP + 1;
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * WINDOW_STEP;
        let end = start + WINDOW_SIZE; // exclusive
        let last = end - 1;
        let mut emg = Vec::with_capacity(WINDOW_SIZE * 6);
        for row in &feat.emg[start..end] {
            emg.extend_from_slice(row);
        }
        out.push(WindowedSample {
            imu: feat.imu[start * IMU_COLS..end * IMU_COLS].to_vec(),
            emg,
            pose_target: feat.pose_cm[last],
            force_target: feat.force_norm[last],
            user_id: feat.user_id,
            gesture_id: feat.gesture_id,
            rep: feat.rep,
            trial_id: feat.trial_id,
            t_end_ms: feat.timestamps_ms[last],
        });
    }
    out
}
