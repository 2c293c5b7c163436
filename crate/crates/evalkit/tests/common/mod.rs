//! Shared fixture: a tiny network and a multi-user memorizable dataset.
#![allow(dead_code)] // each test binary uses a different subset

use model::ModelConfig;
use pipeline::{DatasetSplit, SplitPolicy, WindowedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthhand::{flatten_pose, forward_kinematics, HandSkeleton, JointAngles};
use train::TrainConfig;

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

pub fn quick_train() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        max_epochs: 1,
        ..TrainConfig::default()
    }
}

fn class_pose(class: u32) -> [f64; 63] {
    let flex = 0.3 + 0.2 * class as f64;
    let mut fingers = [[0.0; 4]; 5];
    for f in fingers.iter_mut() {
        *f = [flex, flex, flex * 0.6, 0.0];
    }
    let skeleton = HandSkeleton::for_hand_length(18.0).unwrap();
    flatten_pose(&forward_kinematics(&JointAngles { fingers }, &skeleton).unwrap())
}

/// `n_users` users, each contributing `trials_per_user` trials of
/// `per_trial` windows. Targets depend only on `trial % 4`; users are
/// interchangeable, which keeps leave-one-user-out folds balanced.
pub fn user_windows(
    cfg: &ModelConfig,
    n_users: u32,
    trials_per_user: u32,
    per_trial: usize,
    seed: u64,
) -> Vec<WindowedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for user in 1..=n_users {
        for t in 0..trials_per_user {
            let trial = (user - 1) * trials_per_user + t;
            let class = trial % 4;
            let level = (class as f64 - 1.5) * 0.6;
            let force = [0.2 * class as f64 + 0.1; 5];
            for k in 0..per_trial {
                out.push(WindowedSample {
                    imu: (0..cfg.window * cfg.imu_dim)
                        .map(|_| level + rng.gen_range(-0.05..0.05))
                        .collect(),
                    emg: (0..cfg.window * cfg.emg_dim)
                        .map(|_| level + rng.gen_range(-0.05..0.05))
                        .collect(),
                    pose_target: class_pose(class),
                    force_target: force,
                    user_id: user,
                    gesture_id: class,
                    rep: 0,
                    trial_id: trial,
                    t_end_ms: k as f64 * 33.0,
                });
            }
        }
    }
    out
}

/// A ready split: users 1..n−1 train, user n tests.
pub fn holdout_split(cfg: &ModelConfig, n_users: u32, seed: u64) -> DatasetSplit {
    let windows = user_windows(cfg, n_users, 3, 3, seed);
    let (test, train): (Vec<_>, Vec<_>) = windows.into_iter().partition(|w| w.user_id == n_users);
    DatasetSplit {
        train,
        test,
        policy: SplitPolicy::LeaveOneUserOut { fold: n_users },
    }
}
