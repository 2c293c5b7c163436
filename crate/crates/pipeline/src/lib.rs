//! Preprocessing between raw 100 Hz sensor sessions and the model's
//! windowed 30 Hz tensors: resampling, EMG envelope extraction and lag
//! expansion, per-user calibration, force normalization, windowing, and
//! train/test splits. Also owns the on-disk formats (trial CSV, session
//! manifest, and the binary windowed-dataset file).

use thiserror::Error;

mod calibrate;
mod emg;
mod features;
mod force;
mod io;
mod resample;
mod split;
mod window;

pub use calibrate::{calibrate, normalize_emg, CalibrationProfile};
pub use emg::{expand_emg, rectify_smooth, rectify_smooth_causal, SMOOTHING_WINDOW};
pub use features::{preprocess_session, preprocess_trial, PipelineConfig, TrialRecord};
pub use force::{denormalize_force, normalize_force, NormalizationSpec, FORCE_CLIP_MAX};
pub use io::{
    load_manifest, load_trial_csv, load_windows, read_session_dir, save_manifest, save_windows,
    write_session_dir, write_trial_csv, Manifest, ManifestTrial, ManifestUser,
};
pub use resample::{resample, resample_imu, IMU_COLS};
pub use split::{split, DatasetSplit, SplitPolicy};
pub use window::{window, Features30Hz, WindowedSample, WINDOW_SIZE, WINDOW_STEP};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("signal too short: {got} samples, need at least {need}")]
    TooShort { need: usize, got: usize },
    #[error("calibration failed: mvc level {mvc} does not exceed rest level {rest}")]
    CalibrationFailed { rest: f64, mvc: f64 },
    #[error("{0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("bad file magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Sinusoidal positional encoding, row-major T×d. `d` must be even.
pub fn positional_encoding(t: usize, d: usize) -> Result<Vec<f64>> {
    tensorgrad::nn::positional_encoding(t, d).map_err(|e| PipelineError::Config(e.to_string()))
}
