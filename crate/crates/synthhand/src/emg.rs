//! Surface EMG simulation at the wrist.
//!
//! Fingertip force maps to muscle activation through a concave power law
//! (motor-unit recruitment saturates), the per-finger activations blend
//! with fixed weights reflecting electrode placement over the flexor
//! bundle, and the result amplitude-modulates a band-limited stochastic
//! carrier. Units are millivolts.

use rand::Rng;

use crate::math::standard_normal;
use crate::{Result, SynthError};

/// Electrode sensitivity per finger, thumb first. Sums to 1.
pub const EMG_FINGER_WEIGHTS: [f64; 5] = [0.30, 0.25, 0.20, 0.15, 0.10];

/// Force at which activation saturates to 1.
pub const FORCE_CEILING_N: f64 = 25.0;

/// Carrier band centre and width (RBJ bandpass at the sample rate).
const CARRIER_HZ: f64 = 25.0;
const CARRIER_Q: f64 = 0.7;
const SAMPLE_RATE_HZ: f64 = 100.0;

/// Recruitment curve: concave, 0 at rest, 1 at the ceiling.
fn finger_activation(force_n: f64) -> f64 {
    (force_n.clamp(0.0, FORCE_CEILING_N) / FORCE_CEILING_N).powf(2.0 / 3.0)
}

fn drive(force_n: &[f64; 5]) -> f64 {
    EMG_FINGER_WEIGHTS
        .iter()
        .zip(force_n)
        .map(|(w, &f)| w * finger_activation(f))
        .sum()
}

/// Direct-form-I biquad; RBJ audio-cookbook constant-peak bandpass.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    fn bandpass(f0: f64, q: f64, fs: f64) -> Self {
        let w0 = std::f64::consts::TAU * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: alpha / a0,
            b1: 0.0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Simulate one trial's raw EMG (mV) from its fingertip force timeline.
///
/// `gain` scales the contraction signal (electrode coupling varies per
/// user); `baseline_noise_mv` is the std of additive sensor noise.
pub fn simulate_emg(
    force_n: &[[f64; 5]],
    gain: f64,
    baseline_noise_mv: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if force_n.len() < 2 {
        return Err(SynthError::TooShort {
            need: 2,
            got: force_n.len(),
        });
    }
    if gain <= 0.0 {
        return Err(SynthError::Config(format!("gain {gain} must be positive")));
    }

    // Band-limited carrier: white noise through the bandpass, then
    // standardized over the trial so its power is independent of the
    // filter's gain and the trial length.
    let n = force_n.len();
    let mut filter = Biquad::bandpass(CARRIER_HZ, CARRIER_Q, SAMPLE_RATE_HZ);
    let mut carrier: Vec<f64> = (0..n)
        .map(|_| filter.process(standard_normal(rng)))
        .collect();
    let mean = carrier.iter().sum::<f64>() / n as f64;
    let var = carrier.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n as f64;
    if var < 1e-18 {
        return Err(SynthError::Config("degenerate EMG carrier".into()));
    }
    let inv_std = 1.0 / var.sqrt();
    for c in &mut carrier {
        *c = (*c - mean) * inv_std;
    }

    Ok(force_n
        .iter()
        .zip(&carrier)
        .map(|(f, c)| gain * drive(f) * c + baseline_noise_mv * standard_normal(rng))
        .collect())
}
