//! The 21-landmark hand model and its forward kinematics.
//!
//! Landmark layout (wrist-origin hand frame): index 0 is the wrist; each
//! finger contributes 4 landmarks in base→tip order — thumb 1–4, index 5–8,
//! middle 9–12, ring 13–16, little 17–20. The hand frame has +x along the
//! middle finger, +z out of the back of the hand; flexion folds landmarks
//! toward −z (the palm side).

use crate::math::{self, Mat3, Vec3};
use crate::{Result, SynthError};

pub const N_FINGERS: usize = 5;
pub const LANDMARKS: usize = 21;
pub const FINGER_NAMES: [&str; N_FINGERS] = ["thumb", "index", "middle", "ring", "little"];

/// Indices into a finger's 4-angle group.
pub const FLEX_MCP: usize = 0;
pub const FLEX_PIP: usize = 1;
pub const FLEX_DIP: usize = 2;
pub const ABD: usize = 3;

pub const FLEX_MAX: f64 = std::f64::consts::FRAC_PI_2;
pub const ABD_MAX: f64 = std::f64::consts::PI / 6.0;

/// Per-finger fan direction in the palm plane (radians about +z) and roll
/// of the flexion plane about the finger axis. The thumb both fans wide and
/// rolls its flexion plane, which is what lets a thumb-mounted sensor see
/// gesture identity.
const FAN_YAW: [f64; N_FINGERS] = [1.05, 0.26, 0.0, -0.26, -0.52];
const AXIS_ROLL: [f64; N_FINGERS] = [-0.7854, 0.0, 0.0, 0.0, 0.0];

/// Bone lengths in cm at the reference 18 cm hand, per finger:
/// [metacarpal offset, proximal, middle, distal].
const REFERENCE_SEGMENTS: [[f64; 4]; N_FINGERS] = [
    [4.0, 3.2, 2.8, 2.2], // thumb (CMC→MCP→IP→TIP)
    [8.5, 4.0, 2.5, 2.0], // index
    [8.2, 4.5, 2.8, 2.2], // middle
    [7.8, 4.2, 2.6, 2.1], // ring
    [7.5, 3.2, 2.0, 1.8], // little
];
const REFERENCE_HAND_LENGTH: f64 = 18.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HandSkeleton {
    /// [metacarpal, proximal, middle, distal] per finger, cm.
    pub segments: [[f64; 4]; N_FINGERS],
    pub hand_length_cm: f64,
}

impl HandSkeleton {
    /// Proportionally scaled skeleton for a given hand length.
    pub fn for_hand_length(hand_length_cm: f64) -> Result<Self> {
        if !(15.0..=22.0).contains(&hand_length_cm) {
            return Err(SynthError::OutOfRange {
                what: "hand_length_cm",
                value: hand_length_cm,
                min: 15.0,
                max: 22.0,
            });
        }
        let s = hand_length_cm / REFERENCE_HAND_LENGTH;
        let mut segments = REFERENCE_SEGMENTS;
        for finger in segments.iter_mut() {
            for len in finger.iter_mut() {
                *len *= s;
            }
        }
        Ok(HandSkeleton {
            segments,
            hand_length_cm,
        })
    }

    /// Total chain length wrist→tip for one finger.
    pub fn finger_reach(&self, finger: usize) -> f64 {
        self.segments[finger].iter().sum()
    }
}

/// 20 joint values: per finger [MCP flexion, PIP flexion, DIP flexion,
/// abduction] (thumb: CMC/MCP/IP flexion + CMC abduction). Radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub fingers: [[f64; 4]; N_FINGERS],
}

impl JointAngles {
    pub const REST: JointAngles = JointAngles {
        fingers: [[0.0; 4]; N_FINGERS],
    };

    pub fn validate(&self) -> Result<()> {
        for f in &self.fingers {
            for &flex in &f[..3] {
                if !(0.0..=FLEX_MAX).contains(&flex) {
                    return Err(SynthError::OutOfRange {
                        what: "flexion",
                        value: flex,
                        min: 0.0,
                        max: FLEX_MAX,
                    });
                }
            }
            if !(-ABD_MAX..=ABD_MAX).contains(&f[ABD]) {
                return Err(SynthError::OutOfRange {
                    what: "abduction",
                    value: f[ABD],
                    min: -ABD_MAX,
                    max: ABD_MAX,
                });
            }
        }
        Ok(())
    }

    /// Flat 20-value view, finger-major.
    pub fn as_flat(&self) -> [f64; 20] {
        let mut out = [0.0; 20];
        for (f, group) in self.fingers.iter().enumerate() {
            out[f * 4..f * 4 + 4].copy_from_slice(group);
        }
        out
    }

    pub fn from_flat(flat: &[f64; 20]) -> Self {
        let mut fingers = [[0.0; 4]; N_FINGERS];
        for (f, group) in fingers.iter_mut().enumerate() {
            group.copy_from_slice(&flat[f * 4..f * 4 + 4]);
        }
        JointAngles { fingers }
    }

    /// Elementwise linear blend, used for ramp interpolation.
    pub fn lerp(a: &JointAngles, b: &JointAngles, t: f64) -> JointAngles {
        let mut out = JointAngles::default();
        for f in 0..N_FINGERS {
            for j in 0..4 {
                out.fingers[f][j] = a.fingers[f][j] + (b.fingers[f][j] - a.fingers[f][j]) * t;
            }
        }
        out
    }
}

/// Base orientation of one finger chain in the hand frame.
fn finger_frame(finger: usize) -> Mat3 {
    math::mat_mul(&math::rot_z(FAN_YAW[finger]), &math::rot_x(AXIS_ROLL[finger]))
}

/// Landmark positions (21×3, cm, wrist at the origin) plus the cumulative
/// rotation of every finger's distal segment. The distal rotations feed the
/// IMU simulation (the ring rides the thumb's distal segment).
pub fn forward_kinematics_full(angles: &JointAngles, skeleton: &HandSkeleton) -> Result<([Vec3; LANDMARKS], [Mat3; N_FINGERS])> {
    angles.validate()?;
    let mut points = [[0.0; 3]; LANDMARKS];
    let mut distal = [math::IDENTITY; N_FINGERS];
    for f in 0..N_FINGERS {
        let [metacarpal, proximal, middle, dist_len] = skeleton.segments[f];
        let a = angles.fingers[f];
        let frame = finger_frame(f);

        // Metacarpal: rigid offset from the wrist along the fan direction.
        let base = math::mat_apply(&frame, &[metacarpal, 0.0, 0.0]);
        points[1 + f * 4] = base;

        // Base joint articulates abduction (about local z) then flexion
        // (about local y); the two interphalangeal joints flex only.
        let mut rot = math::mat_mul(&frame, &math::mat_mul(&math::rot_z(a[ABD]), &math::rot_y(a[FLEX_MCP])));
        let p1 = math::add(&base, &math::mat_apply(&rot, &[proximal, 0.0, 0.0]));
        points[2 + f * 4] = p1;

        rot = math::mat_mul(&rot, &math::rot_y(a[FLEX_PIP]));
        let p2 = math::add(&p1, &math::mat_apply(&rot, &[middle, 0.0, 0.0]));
        points[3 + f * 4] = p2;

        rot = math::mat_mul(&rot, &math::rot_y(a[FLEX_DIP]));
        let p3 = math::add(&p2, &math::mat_apply(&rot, &[dist_len, 0.0, 0.0]));
        points[4 + f * 4] = p3;

        distal[f] = rot;
    }
    Ok((points, distal))
}

/// Landmark positions only; see [`forward_kinematics_full`].
pub fn forward_kinematics(angles: &JointAngles, skeleton: &HandSkeleton) -> Result<[Vec3; LANDMARKS]> {
    Ok(forward_kinematics_full(angles, skeleton)?.0)
}

/// Flatten landmarks row-major to 63 values.
pub fn flatten_pose(points: &[Vec3; LANDMARKS]) -> [f64; 63] {
    let mut out = [0.0; 63];
    for (i, p) in points.iter().enumerate() {
        out[i * 3..i * 3 + 3].copy_from_slice(p);
    }
    out
}
