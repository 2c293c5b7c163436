//! A test client standing in for the BLE hardware: replays a recorded
//! trial as paced 55 Hz packet pairs, with optional timestamp jitter and
//! packet drops for exercising the sync layer.

use std::io::Write;
use std::time::{Duration, Instant};

use pipeline::{resample, resample_imu, TrialRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::packet::{encode_packet, matrix_to_quat, Device, SensorPacket};
use crate::{Result, StreamError};

/// Device transmission rate.
pub const PACKET_RATE_HZ: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    /// Wall-clock speed multiplier; stream timestamps are unaffected, so a
    /// fast replay emits byte-identical packets.
    pub speed: f64,
    /// Gaussian σ added to each packet's timestamp, ms.
    pub jitter_ms_std: f64,
    /// Probability a generated packet never hits the wire (its sequence
    /// number is still consumed, as a lossy link would).
    pub drop_rate: f64,
    pub seed: u64,
    /// Sleep to pace packets at 55 Hz × speed; off for batch tests.
    pub realtime: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            speed: 1.0,
            jitter_ms_std: 0.0,
            drop_rate: 0.0,
            seed: 0,
            realtime: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayStats {
    /// Packets written per device: [ring, watch].
    pub sent: [u64; 2],
    pub dropped: u64,
}

/// Resample one recorded trial to the device rate and write its packets in
/// timestamp order (ring then watch per sample instant).
pub fn replay_trial(
    record: &TrialRecord,
    out: &mut dyn Write,
    opts: &ReplayOptions,
) -> Result<ReplayStats> {
    if !(opts.speed > 0.0) {
        return Err(StreamError::Usage(format!("speed {} must be > 0", opts.speed)));
    }
    if !(0.0..1.0).contains(&opts.drop_rate) {
        return Err(StreamError::Usage(format!(
            "drop rate {} outside [0, 1)",
            opts.drop_rate
        )));
    }
    if opts.jitter_ms_std < 0.0 {
        return Err(StreamError::Usage("negative jitter".into()));
    }

    let imu = resample_imu(&record.imu, 100.0, PACKET_RATE_HZ)?;
    let emg = resample(&record.emg_mv, 1, 100.0, PACKET_RATE_HZ)?;
    let frames = emg.len();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut stats = ReplayStats {
        sent: [0, 0],
        dropped: 0,
    };
    let started = Instant::now();
    let period_us = 1e6 / PACKET_RATE_HZ;

    for k in 0..frames {
        if opts.realtime {
            let due = Duration::from_secs_f64(k as f64 * period_us / 1e6 / opts.speed);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        let base_us = (k as f64 * period_us).round();
        let row = &imu[k * 24..(k + 1) * 24];
        for device in [Device::Ring, Device::Watch] {
            let cols = match device {
                Device::Ring => &row[0..12],
                Device::Watch => &row[12..24],
            };
            let rot: [f64; 9] = cols[3..12].try_into().expect("9-wide block");
            let q = matrix_to_quat(&rot);
            let jitter_us = if opts.jitter_ms_std > 0.0 {
                gaussian(&mut rng) * opts.jitter_ms_std * 1000.0
            } else {
                0.0
            };
            let packet = SensorPacket {
                device,
                seq: k as u32,
                timestamp_us: (base_us + jitter_us).max(0.0) as u64,
                accel: [cols[0] as f32, cols[1] as f32, cols[2] as f32],
                quat: [q[0] as f32, q[1] as f32, q[2] as f32, q[3] as f32],
                emg_mv: match device {
                    Device::Ring => 0.0,
                    Device::Watch => emg[k] as f32,
                },
            };
            if opts.drop_rate > 0.0 && rng.gen::<f64>() < opts.drop_rate {
                stats.dropped += 1;
                continue;
            }
            out.write_all(&encode_packet(&packet))?;
            stats.sent[device as usize] += 1;
        }
    }
    out.flush()?;
    Ok(stats)
}

/// Standard normal via Box–Muller; two uniforms per draw keeps it simple
/// and deterministic under the seeded generator.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
