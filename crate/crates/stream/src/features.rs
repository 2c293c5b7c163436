//! Causal per-frame feature extraction and window assembly.
//!
//! The transforms here are the frame-at-a-time versions of the offline
//! preprocessing — the same envelope definition, the same calibration
//! mapping, the same 6-lag expansion, the same 30/5 window arithmetic — so
//! a batch pass over identical frames reproduces the live path bit for bit
//! ([`features_from_frames`] is that batch pass).

use std::collections::VecDeque;

use pipeline::{
    expand_emg, normalize_emg, rectify_smooth_causal, CalibrationProfile, WindowedSample,
    SMOOTHING_WINDOW, WINDOW_SIZE, WINDOW_STEP,
};

use crate::sync::SyncedFrame;
use crate::Result;

/// Model-facing features of one synced frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub t_ms: f64,
    /// Ring then watch: accel + rotation each, 24 values.
    pub imu: [f64; 24],
    /// Calibrated EMG envelope at lags 0..=5.
    pub emg: [f64; 6],
    pub valid: bool,
}

/// Streaming feature state: trailing-RMS envelope over the raw EMG, user
/// calibration, and the lag history.
#[derive(Debug, Clone)]
pub struct FramePreprocessor {
    cal: CalibrationProfile,
    raw: VecDeque<f64>,
    lags: VecDeque<f64>,
    first_env: Option<f64>,
}

impl FramePreprocessor {
    pub fn new(cal: CalibrationProfile) -> Self {
        FramePreprocessor {
            cal,
            raw: VecDeque::with_capacity(SMOOTHING_WINDOW),
            lags: VecDeque::with_capacity(6),
            first_env: None,
        }
    }

    pub fn push(&mut self, frame: &SyncedFrame) -> FeatureFrame {
        if self.raw.len() == SMOOTHING_WINDOW {
            self.raw.pop_front();
        }
        self.raw.push_back(frame.emg_mv);
        // Trailing RMS over ≤ 15 samples, summed oldest-first — the same
        // order as the batch envelope, so the values match exactly.
        let power: f64 = self.raw.iter().map(|v| v * v).sum();
        let envelope = (power / self.raw.len() as f64).sqrt();
        let calibrated = normalize_emg(envelope, &self.cal);

        let first = *self.first_env.get_or_insert(calibrated);
        if self.lags.len() == 6 {
            self.lags.pop_front();
        }
        self.lags.push_back(calibrated);
        // Lag j is the envelope j frames ago, back-filled with the first
        // value near the stream start.
        let emg: [f64; 6] = std::array::from_fn(|j| {
            if j < self.lags.len() {
                self.lags[self.lags.len() - 1 - j]
            } else {
                first
            }
        });

        let mut imu = [0.0; 24];
        imu[..12].copy_from_slice(&frame.ring);
        imu[12..].copy_from_slice(&frame.watch);
        FeatureFrame {
            t_ms: frame.t_ms,
            imu,
            emg,
            valid: frame.valid,
        }
    }
}

/// Batch counterpart of [`FramePreprocessor`]: the offline envelope, lag
/// expansion, and feature layout over a full frame sequence (≥ 6 frames).
pub fn features_from_frames(
    frames: &[SyncedFrame],
    cal: &CalibrationProfile,
) -> Result<Vec<FeatureFrame>> {
    let raw: Vec<f64> = frames.iter().map(|f| f.emg_mv).collect();
    let calibrated: Vec<f64> = rectify_smooth_causal(&raw)
        .into_iter()
        .map(|v| normalize_emg(v, cal))
        .collect();
    let lagged = expand_emg(&calibrated)?;
    Ok(frames
        .iter()
        .zip(lagged)
        .map(|(f, emg)| {
            let mut imu = [0.0; 24];
            imu[..12].copy_from_slice(&f.ring);
            imu[12..].copy_from_slice(&f.watch);
            FeatureFrame {
                t_ms: f.t_ms,
                imu,
                emg,
                valid: f.valid,
            }
        })
        .collect())
}

/// Sliding 30-frame window with step 5, matching the offline windowing
/// grid: candidate windows end at frames 30, 35, 40, … and are emitted
/// only when every contained frame is valid.
#[derive(Debug, Clone)]
pub struct WindowAssembler {
    user_id: u32,
    buf: VecDeque<FeatureFrame>,
    pushed: usize,
}

impl WindowAssembler {
    pub fn new(user_id: u32) -> Self {
        WindowAssembler {
            user_id,
            buf: VecDeque::with_capacity(WINDOW_SIZE),
            pushed: 0,
        }
    }

    /// Number of frames accepted so far.
    pub fn frames(&self) -> usize {
        self.pushed
    }

    pub fn push(&mut self, frame: FeatureFrame) -> Option<WindowedSample> {
        if self.buf.len() == WINDOW_SIZE {
            self.buf.pop_front();
        }
        self.buf.push_back(frame);
        self.pushed += 1;

        let on_grid =
            self.pushed >= WINDOW_SIZE && (self.pushed - WINDOW_SIZE) % WINDOW_STEP == 0;
        if !on_grid || !self.buf.iter().all(|f| f.valid) {
            return None;
        }
        let mut imu = Vec::with_capacity(WINDOW_SIZE * 24);
        let mut emg = Vec::with_capacity(WINDOW_SIZE * 6);
        for f in &self.buf {
            imu.extend_from_slice(&f.imu);
            emg.extend_from_slice(&f.emg);
        }
        Some(WindowedSample {
            imu,
            emg,
            pose_target: [0.0; 63], // inference input; targets unused
            force_target: [0.0; 5],
            user_id: self.user_id,
            gesture_id: 0,
            rep: 0,
            trial_id: 0,
            t_end_ms: frame.t_ms,
        })
    }
}
