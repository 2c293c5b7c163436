//! Synthetic hand-interaction sessions: a 21-landmark kinematic hand model,
//! a library of 20 scripted gestures, per-user variation, and simulated
//! sensor streams (ring/watch IMU at 100 Hz, single-channel wrist EMG).
//!
//! Everything is a pure function of (script, profile, seed); identical seeds
//! reproduce sessions bit-for-bit.

use thiserror::Error;

pub mod math;

mod dataset;
mod emg;
mod gesture;
mod imu;
mod skeleton;
mod trial;

pub use dataset::{generate_dataset, generate_user_session, sample_profile, GeneratorConfig};
pub use emg::{simulate_emg, EMG_FINGER_WEIGHTS, FORCE_CEILING_N};
pub use gesture::{builtin_gestures, GestureScript, GESTURE_COUNT};
pub use imu::{simulate_imu, ImuStream, GRAVITY_MPS2};
pub use skeleton::{
    flatten_pose, forward_kinematics, forward_kinematics_full, HandSkeleton, JointAngles, ABD,
    ABD_MAX, FINGER_NAMES, FLEX_DIP, FLEX_MAX, FLEX_MCP, FLEX_PIP, LANDMARKS, N_FINGERS,
};
pub use trial::{synthesize_trial, AngleTrajectory, ForceTrajectory, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SynthError {
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("trajectory too short: {got} samples, need at least {need}")]
    TooShort { need: usize, got: usize },
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Everything one simulated recording of one user contains.
#[derive(Debug, Clone)]
pub struct SyntheticSession {
    pub user: UserProfile,
    pub trials: Vec<Trial>,
}

/// Simulated characteristics of one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    pub hand_length_cm: f64,
    pub emg_gain: f64,
    pub emg_baseline_noise: f64,
    pub imu_noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    /// A scripted gesture repetition.
    Gesture { rep: u32 },
    /// Relaxed hand, no force: baseline for EMG calibration.
    RestCalibration,
    /// Maximum contraction: ceiling for EMG calibration.
    MvcCalibration,
}

/// One trial: all streams share the same 100 Hz timeline.
#[derive(Debug, Clone)]
pub struct Trial {
    pub kind: TrialKind,
    pub script: GestureScript,
    pub timestamps_ms: Vec<f64>,
    pub angles: Vec<JointAngles>,
    /// Per-finger fingertip force, newtons, thumb first.
    pub force_n: Vec<[f64; 5]>,
    /// Wrist-origin landmark positions, cm, 21×3 flattened per frame.
    pub pose_cm: Vec<[f64; 63]>,
    pub ring: ImuStream,
    pub watch: ImuStream,
    pub emg_mv: Vec<f64>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }
}
