//! Inertial measurement simulation for the finger ring and wrist watch.
//!
//! Both devices report orientation (rotation matrix, sensor→world) and
//! proper acceleration in the sensor frame. A stationary accelerometer
//! reads +g along world z once rotated back into its own frame; motion
//! adds the second derivative of sensor position.

use rand::Rng;

use crate::math::{self, Mat3, Vec3};
use crate::skeleton::{forward_kinematics_full, HandSkeleton, JointAngles};
use crate::{Result, SynthError};

pub const GRAVITY_MPS2: f64 = 9.81;

/// Wrist sway while "holding still": slow postural drift.
const SWAY_HZ: f64 = 0.2;
const SWAY_RAD: f64 = 0.035;

/// Index of the landmark the ring tracks (thumb tip).
const RING_TIP: usize = 4;
/// Finger whose distal segment carries the ring.
const RING_FINGER: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct ImuStream {
    /// Proper acceleration in the sensor frame, m/s².
    pub accel: Vec<[f64; 3]>,
    /// Sensor→world rotation, row-major 3×3.
    pub rot: Vec<Mat3>,
}

impl ImuStream {
    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }
}

fn noisy(v: Vec3, std: f64, rng: &mut impl Rng) -> [f64; 3] {
    [
        v[0] + std * math::standard_normal(rng),
        v[1] + std * math::standard_normal(rng),
        v[2] + std * math::standard_normal(rng),
    ]
}

/// Simulate one trial's ring and watch streams from the angle timeline.
///
/// `dt_s` is the sample spacing. Acceleration uses central second
/// differences of the ring-tip path (endpoints copy their neighbour), so
/// at least three samples are required.
pub fn simulate_imu(
    angles: &[JointAngles],
    skeleton: &HandSkeleton,
    dt_s: f64,
    noise_std: f64,
    rng: &mut impl Rng,
) -> Result<(ImuStream, ImuStream)> {
    if angles.len() < 3 {
        return Err(SynthError::TooShort {
            need: 3,
            got: angles.len(),
        });
    }
    if dt_s <= 0.0 {
        return Err(SynthError::Config(format!("dt_s {dt_s} must be positive")));
    }
    let n = angles.len();
    let gravity: Vec3 = [0.0, 0.0, GRAVITY_MPS2];

    // Forward pass: ring orientation + tip path in metres.
    let mut ring_rot = Vec::with_capacity(n);
    let mut tip_m: Vec<Vec3> = Vec::with_capacity(n);
    for a in angles {
        let (landmarks, distal) = forward_kinematics_full(a, skeleton)?;
        ring_rot.push(distal[RING_FINGER]);
        tip_m.push(math::scale(&landmarks[RING_TIP], 0.01));
    }

    // World-frame acceleration of the tip, then into the sensor frame.
    let mut ring_accel = Vec::with_capacity(n);
    for i in 0..n {
        let j = i.clamp(1, n - 2); // endpoints reuse the nearest interior stencil
        let lin = math::scale(
            &math::add(
                &math::add(&tip_m[j - 1], &tip_m[j + 1]),
                &math::scale(&tip_m[j], -2.0),
            ),
            1.0 / (dt_s * dt_s),
        );
        let world = math::add(&lin, &gravity);
        let sensed = math::mat_apply_transposed(&ring_rot[i], &world);
        ring_accel.push(noisy(sensed, noise_std, rng));
    }

    // Watch: wrist-mounted, near identity with slow sway about two axes.
    let phase_x = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_y = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut watch_rot = Vec::with_capacity(n);
    let mut watch_accel = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt_s;
        let wobble = std::f64::consts::TAU * SWAY_HZ * t;
        let rot = math::mat_mul(
            &math::rot_x(SWAY_RAD * (wobble + phase_x).sin()),
            &math::rot_y(SWAY_RAD * (wobble + phase_y).sin()),
        );
        // The wrist stays at the origin, so gravity is the whole signal.
        let sensed = math::mat_apply_transposed(&rot, &gravity);
        watch_accel.push(noisy(sensed, noise_std, rng));
        watch_rot.push(rot);
    }

    Ok((
        ImuStream {
            accel: ring_accel,
            rot: ring_rot,
        },
        ImuStream {
            accel: watch_accel,
            rot: watch_rot,
        },
    ))
}
