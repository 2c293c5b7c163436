//! Dataset assembly: user profiles, calibration trials, and jittered
//! gesture repetitions, all reproducible from a single seed.
//!
//! Seeds fan out hierarchically (dataset → user → trial) with an odd
//! multiplicative constant, so any user or trial can be regenerated in
//! isolation and insertion order never shifts another trial's stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emg::simulate_emg;
use crate::gesture::{builtin_gestures, GestureScript};
use crate::imu::simulate_imu;
use crate::skeleton::{
    flatten_pose, forward_kinematics, HandSkeleton, JointAngles, ABD, ABD_MAX, FLEX_MAX,
};
use crate::trial::{synthesize_trial, SAMPLE_RATE_HZ};
use crate::{Result, SyntheticSession, Trial, TrialKind, UserProfile};

const USER_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;
const TRIAL_SEED_MIX: u64 = 0xD1B5_4A32_D192_ED03;

/// Relative jitter applied per repetition.
const ANGLE_JITTER: f64 = 0.05;
const FORCE_JITTER: f64 = 0.10;

/// Calibration scripts use ids outside the 0..20 gesture range.
const REST_ID: u32 = 100;
const MVC_ID: u32 = 101;
const MVC_FORCE_N: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_users: u32,
    pub reps_per_gesture: u32,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_users: 20,
            reps_per_gesture: 5,
            seed: 42,
        }
    }
}

fn user_seed(dataset_seed: u64, user_id: u32) -> u64 {
    dataset_seed ^ (user_id as u64).wrapping_mul(USER_SEED_MIX)
}

/// Draw one user's physiology. Pure function of (seed, user_id).
pub fn sample_profile(user_id: u32, dataset_seed: u64) -> UserProfile {
    let seed = user_seed(dataset_seed, user_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    UserProfile {
        user_id,
        hand_length_cm: rng.gen_range(15.5..=21.5),
        emg_gain: rng.gen_range(0.5..=2.0),
        emg_baseline_noise: rng.gen_range(0.005..=0.02),
        imu_noise_std: rng.gen_range(0.005..=0.05),
        seed,
    }
}

fn rest_script() -> GestureScript {
    GestureScript {
        gesture_id: REST_ID,
        name: "rest_calibration".to_string(),
        duration_s: 3.0,
        target_angles: JointAngles::REST,
        force_targets: [0.0; 5],
        onset_s: 0.5,
        offset_s: 0.5,
    }
}

fn mvc_script() -> GestureScript {
    // Maximum voluntary contraction: a hard full-hand squeeze.
    GestureScript {
        gesture_id: MVC_ID,
        name: "mvc_calibration".to_string(),
        duration_s: 3.0,
        target_angles: JointAngles {
            fingers: [
                [0.85, 0.95, 0.75, -0.15],
                [1.30, 1.40, 1.10, 0.00],
                [1.35, 1.45, 1.10, 0.00],
                [1.30, 1.40, 1.05, 0.00],
                [1.25, 1.35, 1.00, 0.00],
            ],
        },
        force_targets: [MVC_FORCE_N; 5],
        onset_s: 0.5,
        offset_s: 0.5,
    }
}

/// Perturb a base script for one repetition: joint targets within ±5 %,
/// force targets within ±10 %, clamped back into the articulation limits.
fn jitter_script(base: &GestureScript, rep: u32, rng: &mut impl Rng) -> GestureScript {
    let mut script = base.clone();
    script.name = format!("{}_rep{rep}", base.name);
    for f in 0..5 {
        for j in 0..4 {
            let scaled =
                script.target_angles.fingers[f][j] * (1.0 + rng.gen_range(-ANGLE_JITTER..=ANGLE_JITTER));
            script.target_angles.fingers[f][j] = if j == ABD {
                scaled.clamp(-ABD_MAX, ABD_MAX)
            } else {
                scaled.clamp(0.0, FLEX_MAX)
            };
        }
    }
    for f in &mut script.force_targets {
        *f = (*f * (1.0 + rng.gen_range(-FORCE_JITTER..=FORCE_JITTER))).clamp(0.0, 25.0);
    }
    script
}

fn build_trial(
    kind: TrialKind,
    script: GestureScript,
    skeleton: &HandSkeleton,
    profile: &UserProfile,
    rng: &mut impl Rng,
) -> Result<Trial> {
    let (timestamps_ms, angles, forces) = synthesize_trial(&script)?;
    let mut pose_cm = Vec::with_capacity(angles.samples.len());
    for a in &angles.samples {
        pose_cm.push(flatten_pose(&forward_kinematics(a, skeleton)?));
    }
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let (ring, watch) =
        simulate_imu(&angles.samples, skeleton, dt, profile.imu_noise_std, rng)?;
    let emg_mv = simulate_emg(
        &forces.samples,
        profile.emg_gain,
        profile.emg_baseline_noise,
        rng,
    )?;
    Ok(Trial {
        kind,
        script,
        timestamps_ms,
        angles: angles.samples,
        force_n: forces.samples,
        pose_cm,
        ring,
        watch,
        emg_mv,
    })
}

/// Generate one user's full recording session: rest and MVC calibration
/// first, then every gesture × repetition.
pub fn generate_user_session(user_id: u32, cfg: &GeneratorConfig) -> Result<SyntheticSession> {
    let profile = sample_profile(user_id, cfg.seed);
    let skeleton = HandSkeleton::for_hand_length(profile.hand_length_cm)?;
    let gestures = builtin_gestures();

    let n_trials = 2 + gestures.len() * cfg.reps_per_gesture as usize;
    let mut trials = Vec::with_capacity(n_trials);
    let trial_rng = |index: usize| {
        ChaCha8Rng::seed_from_u64(
            profile.seed ^ (index as u64 + 1).wrapping_mul(TRIAL_SEED_MIX),
        )
    };

    let mut index = 0usize;
    for (kind, script) in [
        (TrialKind::RestCalibration, rest_script()),
        (TrialKind::MvcCalibration, mvc_script()),
    ] {
        let mut rng = trial_rng(index);
        trials.push(build_trial(kind, script, &skeleton, &profile, &mut rng)?);
        index += 1;
    }

    for base in &gestures {
        for rep in 0..cfg.reps_per_gesture {
            let mut rng = trial_rng(index);
            let script = jitter_script(base, rep, &mut rng);
            trials.push(build_trial(
                TrialKind::Gesture { rep },
                script,
                &skeleton,
                &profile,
                &mut rng,
            )?);
            index += 1;
        }
    }

    Ok(SyntheticSession {
        user: profile,
        trials,
    })
}

/// Generate the full multi-user dataset.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Vec<SyntheticSession>> {
    (0..cfg.n_users)
        .map(|user_id| generate_user_session(user_id, cfg))
        .collect()
}
