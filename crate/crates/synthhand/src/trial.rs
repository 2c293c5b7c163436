//! Turning a gesture script into sampled joint-angle and force timelines.
//!
//! Angles ramp from rest to the scripted target with a cubic ease, hold,
//! and ramp back. Force trails an eased target through a first-order lag
//! (muscle can't step), which keeps the force derivative continuous.

use crate::gesture::GestureScript;
use crate::skeleton::JointAngles;
use crate::Result;

pub const SAMPLE_RATE_HZ: f64 = 100.0;

/// Time constant of the force first-order lag, seconds.
pub const FORCE_LAG_TAU_S: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct AngleTrajectory {
    pub samples: Vec<JointAngles>,
}

#[derive(Debug, Clone)]
pub struct ForceTrajectory {
    /// Per-sample fingertip forces in newtons, thumb first.
    pub samples: Vec<[f64; 5]>,
}

/// Smoothstep: 0 → 1 with zero slope at both ends.
fn ease01(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Activation level at time `t`: 0 at rest, 1 during the hold.
fn phase(script: &GestureScript, t: f64) -> f64 {
    if t < script.onset_s {
        ease01(t / script.onset_s)
    } else if t > script.duration_s - script.offset_s {
        ease01((script.duration_s - t) / script.offset_s)
    } else {
        1.0
    }
}

/// Sample a script at 100 Hz. Returns timestamps in milliseconds plus the
/// angle and force timelines (all the same length).
pub fn synthesize_trial(
    script: &GestureScript,
) -> Result<(Vec<f64>, AngleTrajectory, ForceTrajectory)> {
    script.validate()?;
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let n = (script.duration_s * SAMPLE_RATE_HZ).round() as usize + 1;

    let mut timestamps_ms = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    let mut forces = Vec::with_capacity(n);

    // Exponential-Euler step for f' = (u - f)/tau: exact when the target u
    // is held constant over the step, and unconditionally stable.
    let decay = (-dt / FORCE_LAG_TAU_S).exp();
    let mut force = [0.0f64; 5];

    for i in 0..n {
        let t = i as f64 * dt;
        let s = phase(script, t);
        timestamps_ms.push(t * 1000.0);
        angles.push(JointAngles::lerp(
            &JointAngles::REST,
            &script.target_angles,
            s,
        ));
        if i > 0 {
            for (f, &target) in force.iter_mut().zip(&script.force_targets) {
                let u = target * s;
                *f = u + (*f - u) * decay;
            }
        }
        forces.push(force);
    }

    Ok((
        timestamps_ms,
        AngleTrajectory { samples: angles },
        ForceTrajectory { samples: forces },
    ))
}
