//! The scripted gesture library: 20 desk-interaction hand shapes with
//! per-finger force targets. Every gesture carries a distinct thumb
//! configuration (flexions + abduction), which is what makes gesture
//! identity observable from a thumb-mounted inertial sensor.

use crate::skeleton::JointAngles;
use crate::{Result, SynthError};

pub const GESTURE_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GestureScript {
    pub gesture_id: u32,
    pub name: String,
    pub duration_s: f64,
    pub target_angles: JointAngles,
    /// Fingertip force targets in newtons, thumb first.
    pub force_targets: [f64; 5],
    pub onset_s: f64,
    pub offset_s: f64,
}

impl GestureScript {
    pub fn validate(&self) -> Result<()> {
        if !(2.0..=12.0).contains(&self.duration_s) {
            return Err(SynthError::OutOfRange {
                what: "duration_s",
                value: self.duration_s,
                min: 2.0,
                max: 12.0,
            });
        }
        for &f in &self.force_targets {
            if !(0.0..=25.0).contains(&f) {
                return Err(SynthError::OutOfRange {
                    what: "force_target",
                    value: f,
                    min: 0.0,
                    max: 25.0,
                });
            }
        }
        if self.onset_s + self.offset_s >= self.duration_s {
            return Err(SynthError::Config(format!(
                "ramps ({} + {} s) leave no hold inside {} s",
                self.onset_s, self.offset_s, self.duration_s
            )));
        }
        self.target_angles.validate()
    }
}

/// (name, per-finger [MCP, PIP, DIP, abd] angles, force targets N).
/// Finger order thumb → little; thumb rows are [CMC, MCP, IP, CMC-abd].
type GestureRow = (&'static str, [[f64; 4]; 5], [f64; 5]);

#[rustfmt::skip]
const GESTURES: [GestureRow; GESTURE_COUNT] = [
    ("open_rest", [
        [0.05, 0.05, 0.02,  0.10],
        [0.05, 0.05, 0.03,  0.02],
        [0.05, 0.05, 0.03,  0.00],
        [0.05, 0.05, 0.03, -0.02],
        [0.05, 0.05, 0.03, -0.04],
    ], [0.0, 0.0, 0.0, 0.0, 0.0]),
    ("fist_squeeze", [
        [0.80, 0.90, 0.70, -0.20],
        [1.30, 1.40, 1.10,  0.00],
        [1.35, 1.45, 1.10,  0.00],
        [1.30, 1.40, 1.05,  0.00],
        [1.25, 1.35, 1.00,  0.00],
    ], [8.0, 7.0, 7.0, 6.0, 5.0]),
    ("index_pinch", [
        [0.55, 0.60, 0.45,  0.35],
        [0.75, 0.80, 0.55,  0.05],
        [1.20, 1.25, 0.95,  0.00],
        [1.20, 1.25, 0.95,  0.00],
        [1.15, 1.20, 0.90,  0.00],
    ], [6.0, 6.0, 0.5, 0.3, 0.2]),
    ("middle_pinch", [
        [0.60, 0.70, 0.50,  0.20],
        [0.30, 0.25, 0.15,  0.10],
        [0.80, 0.85, 0.60,  0.00],
        [1.20, 1.25, 0.95,  0.00],
        [1.15, 1.20, 0.90,  0.00],
    ], [5.5, 0.4, 5.5, 0.3, 0.2]),
    ("ring_pinch", [
        [0.70, 0.75, 0.55,  0.08],
        [0.25, 0.20, 0.12,  0.08],
        [0.30, 0.25, 0.15,  0.00],
        [0.85, 0.90, 0.65,  0.00],
        [1.10, 1.15, 0.85,  0.00],
    ], [5.0, 0.3, 0.4, 5.0, 0.3]),
    ("little_pinch", [
        [0.78, 0.82, 0.62, -0.05],
        [0.25, 0.20, 0.12,  0.08],
        [0.28, 0.22, 0.14,  0.00],
        [0.32, 0.28, 0.18, -0.05],
        [0.92, 0.98, 0.72, -0.10],
    ], [4.5, 0.2, 0.3, 0.3, 4.5]),
    ("tripod_grip", [
        [0.50, 0.55, 0.40,  0.28],
        [0.72, 0.78, 0.55,  0.06],
        [0.75, 0.80, 0.58,  0.00],
        [1.15, 1.20, 0.90,  0.00],
        [1.10, 1.15, 0.85,  0.00],
    ], [7.0, 5.0, 5.0, 0.5, 0.3]),
    ("key_press", [
        [0.35, 0.45, 0.30, -0.35],
        [0.70, 0.75, 0.52,  0.04],
        [0.95, 1.00, 0.75,  0.00],
        [0.95, 1.00, 0.75,  0.00],
        [0.90, 0.95, 0.70,  0.00],
    ], [9.0, 4.0, 0.5, 0.3, 0.2]),
    ("cylinder_grip", [
        [0.65, 0.50, 0.35, -0.12],
        [0.90, 1.00, 0.80,  0.04],
        [0.92, 1.05, 0.82,  0.00],
        [0.90, 1.00, 0.80, -0.04],
        [0.85, 0.95, 0.75, -0.08],
    ], [10.0, 8.0, 9.0, 7.0, 6.0]),
    ("sphere_grip", [
        [0.45, 0.40, 0.28,  0.42],
        [0.70, 0.80, 0.60,  0.18],
        [0.72, 0.82, 0.62,  0.00],
        [0.70, 0.80, 0.60, -0.15],
        [0.65, 0.75, 0.55, -0.30],
    ], [7.0, 6.0, 6.0, 5.0, 4.0]),
    ("flat_press", [
        [0.12, 0.10, 0.08,  0.22],
        [0.18, 0.12, 0.08,  0.05],
        [0.18, 0.12, 0.08,  0.00],
        [0.18, 0.12, 0.08, -0.05],
        [0.18, 0.12, 0.08, -0.08],
    ], [3.0, 5.0, 6.0, 5.0, 3.0]),
    ("index_point_press", [
        [0.88, 0.95, 0.75, -0.28],
        [0.10, 0.08, 0.05,  0.06],
        [1.25, 1.30, 1.00,  0.00],
        [1.25, 1.30, 1.00,  0.00],
        [1.20, 1.25, 0.95,  0.00],
    ], [0.5, 8.0, 0.4, 0.3, 0.2]),
    ("thumb_press", [
        [0.25, 0.30, 0.18,  0.05],
        [0.30, 0.28, 0.18,  0.05],
        [0.32, 0.30, 0.20,  0.00],
        [0.30, 0.28, 0.18, -0.04],
        [0.28, 0.26, 0.16, -0.06],
    ], [12.0, 0.5, 0.4, 0.3, 0.2]),
    ("trigger_pull", [
        [0.42, 0.62, 0.52, -0.18],
        [1.00, 1.10, 0.90,  0.02],
        [0.85, 0.92, 0.70,  0.00],
        [0.82, 0.90, 0.68,  0.00],
        [0.80, 0.88, 0.65,  0.00],
    ], [4.0, 11.0, 1.0, 0.5, 0.3]),
    ("pen_grip", [
        [0.58, 0.48, 0.38,  0.16],
        [0.65, 0.72, 0.50,  0.06],
        [0.68, 0.75, 0.52,  0.00],
        [0.95, 1.00, 0.75,  0.00],
        [0.90, 0.95, 0.70,  0.00],
    ], [5.0, 6.0, 4.0, 0.5, 0.3]),
    ("card_pinch", [
        [0.30, 0.22, 0.12,  0.30],
        [0.45, 0.40, 0.25,  0.08],
        [0.50, 0.45, 0.28,  0.00],
        [0.55, 0.50, 0.32,  0.00],
        [0.52, 0.48, 0.30,  0.00],
    ], [3.0, 3.0, 0.3, 0.2, 0.2]),
    ("ok_sign", [
        [0.72, 0.88, 0.66,  0.24],
        [1.20, 1.30, 1.00,  0.04],
        [0.12, 0.10, 0.06,  0.00],
        [0.12, 0.10, 0.06, -0.04],
        [0.12, 0.10, 0.06, -0.08],
    ], [4.0, 4.0, 0.3, 0.2, 0.2]),
    ("scissor_grip", [
        [0.20, 0.15, 0.10, -0.42],
        [0.55, 0.50, 0.35,  0.30],
        [0.58, 0.52, 0.36, -0.25],
        [1.05, 1.10, 0.85,  0.00],
        [1.00, 1.05, 0.80,  0.00],
    ], [2.0, 6.0, 6.0, 0.4, 0.3]),
    ("phone_hold", [
        [0.38, 0.28, 0.20,  0.38],
        [0.78, 0.85, 0.62,  0.05],
        [0.80, 0.88, 0.64,  0.00],
        [0.78, 0.85, 0.62, -0.05],
        [0.75, 0.82, 0.60, -0.08],
    ], [6.0, 4.0, 4.0, 4.0, 3.0]),
    ("heavy_pinch", [
        [0.92, 1.05, 0.85,  0.12],
        [0.95, 1.05, 0.80,  0.04],
        [1.25, 1.30, 1.00,  0.00],
        [1.25, 1.30, 1.00,  0.00],
        [1.20, 1.25, 0.95,  0.00],
    ], [16.0, 14.0, 1.0, 0.5, 0.4]),
];

/// The full 20-gesture library with default timing.
pub fn builtin_gestures() -> Vec<GestureScript> {
    GESTURES
        .iter()
        .enumerate()
        .map(|(i, (name, fingers, forces))| GestureScript {
            gesture_id: i as u32,
            name: (*name).to_string(),
            duration_s: 4.0,
            target_angles: JointAngles { fingers: *fingers },
            force_targets: *forces,
            onset_s: 0.6,
            offset_s: 0.6,
        })
        .collect()
}
