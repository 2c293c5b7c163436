//! Shared fixtures: a tiny network and a memorizable synthetic dataset.
#![allow(dead_code)] // each test binary uses a different subset

use model::ModelConfig;
use pipeline::{DatasetSplit, SplitPolicy, WindowedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthhand::{flatten_pose, forward_kinematics, HandSkeleton, JointAngles};

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d_hidden: 16,
        heads: 2,
        encoder_layers: 1,
        lstm_layers: 1,
        cross_layers: 1,
        ff_expansion: 2,
        window: 10,
        ..ModelConfig::default()
    }
}

pub fn class_pose(class: u32) -> [f64; 63] {
    let flex = 0.3 + 0.2 * class as f64;
    let mut fingers = [[0.0; 4]; 5];
    for f in fingers.iter_mut() {
        *f = [flex, flex, flex * 0.6, 0.0];
    }
    let skeleton = HandSkeleton::for_hand_length(18.0).unwrap();
    flatten_pose(&forward_kinematics(&JointAngles { fingers }, &skeleton).unwrap())
}

/// `n_trials` trials of `per_trial` windows each. The targets depend only on
/// `trial % 4` and the inputs encode that class strongly, so a small network
/// can drive the loss toward zero by memorizing four patterns.
pub fn class_windows(cfg: &ModelConfig, n_trials: u32, per_trial: usize, seed: u64) -> Vec<WindowedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for trial in 0..n_trials {
        let class = trial % 4;
        let level = (class as f64 - 1.5) * 0.6;
        let pose = class_pose(class);
        let force = [0.2 * class as f64 + 0.1; 5];
        for k in 0..per_trial {
            out.push(WindowedSample {
                imu: (0..cfg.window * cfg.imu_dim)
                    .map(|_| level + rng.gen_range(-0.05..0.05))
                    .collect(),
                emg: (0..cfg.window * cfg.emg_dim)
                    .map(|_| level + rng.gen_range(-0.05..0.05))
                    .collect(),
                pose_target: pose,
                force_target: force,
                user_id: 1,
                gesture_id: class,
                rep: 0,
                trial_id: trial,
                t_end_ms: k as f64 * 33.0,
            });
        }
    }
    out
}

pub fn class_split(cfg: &ModelConfig, n_trials: u32, per_trial: usize, seed: u64) -> DatasetSplit {
    DatasetSplit {
        train: class_windows(cfg, n_trials, per_trial, seed),
        test: Vec::new(),
        policy: SplitPolicy::WithinUser,
    }
}
