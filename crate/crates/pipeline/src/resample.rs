//! Rate conversion by linear interpolation. The 24-column IMU layout gets
//! its rotation blocks projected back onto SO(3) after interpolation,
//! since a blend of two rotation matrices is not itself a rotation.

use synthhand::math::{orthonormalize, Mat3};

use crate::{PipelineError, Result};

/// Feature order per frame: ring accel(3) + ring rot(9), then the same
/// for the watch.
pub const IMU_COLS: usize = 24;

/// Linearly resample a row-major T×k signal from `src_hz` to `dst_hz`.
/// Output length is floor((T−1)·dst/src)+1, so the last output timestamp
/// never extrapolates past the input.
pub fn resample(data: &[f64], k: usize, src_hz: f64, dst_hz: f64) -> Result<Vec<f64>> {
    if k == 0 || data.len() % k != 0 {
        return Err(PipelineError::Config(format!(
            "data length {} is not a multiple of width {k}",
            data.len()
        )));
    }
    let t = data.len() / k;
    if t < 4 {
        return Err(PipelineError::TooShort { need: 4, got: t });
    }
    if !(src_hz > 0.0) || !(dst_hz > 0.0) {
        return Err(PipelineError::Config(format!(
            "rates must be positive: {src_hz} -> {dst_hz}"
        )));
    }

    let t_out = ((t - 1) as f64 * dst_hz / src_hz).floor() as usize + 1;
    let step = src_hz / dst_hz; // source samples per output sample
    let mut out = Vec::with_capacity(t_out * k);
    for i in 0..t_out {
        let x = i as f64 * step;
        let lo = (x.floor() as usize).min(t - 1);
        let hi = (lo + 1).min(t - 1);
        let frac = x - lo as f64;
        for c in 0..k {
            let a = data[lo * k + c];
            let b = data[hi * k + c];
            out.push(a + (b - a) * frac);
        }
    }
    Ok(out)
}

/// Resample the 24-column IMU feature block and repair both rotation
/// sub-blocks (columns 3..12 and 15..24) on every output frame.
pub fn resample_imu(data: &[f64], src_hz: f64, dst_hz: f64) -> Result<Vec<f64>> {
    let mut out = resample(data, IMU_COLS, src_hz, dst_hz)?;
    let t = out.len() / IMU_COLS;
    for i in 0..t {
        for block in [3usize, 15] {
            let s = i * IMU_COLS + block;
            let m: Mat3 = out[s..s + 9].try_into().expect("9-wide block");
            out[s..s + 9].copy_from_slice(&orthonormalize(&m));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use synthhand::math::{orthonormality_error, rot_y, rot_z};

    #[test]
    fn hundred_frames_become_thirty() {
        let data = vec![0.0; 100 * 2];
        let out = resample(&data, 2, 100.0, 30.0).unwrap();
        assert_eq!(out.len() / 2, 30);
    }

    #[test]
    fn constant_signal_is_preserved_exactly() {
        let data = vec![3.25; 50 * 3];
        let out = resample(&data, 3, 100.0, 30.0).unwrap();
        assert!(out.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn ramp_matches_closed_form_line() {
        // value = 0.7·t_source + 2; output sample i sits at source index
        // i·100/30 exactly.
        let t = 200;
        let data: Vec<f64> = (0..t).map(|i| 0.7 * i as f64 + 2.0).collect();
        let out = resample(&data, 1, 100.0, 30.0).unwrap();
        for (i, &v) in out.iter().enumerate() {
            let x = i as f64 * 100.0 / 30.0;
            assert!((v - (0.7 * x + 2.0)).abs() < 1e-12, "sample {i}");
        }
    }

    #[test]
    fn too_short_rejected() {
        let err = resample(&[1.0, 2.0, 3.0], 1, 100.0, 30.0);
        assert!(matches!(err, Err(PipelineError::TooShort { need: 4, got: 3 })));
    }

    #[test]
    fn interpolated_rotations_are_reorthonormalized() {
        // A spinning sensor: interpolating between rotations drifts off
        // SO(3); the IMU-aware resampler must put every frame back on it.
        let t = 120;
        let mut data = Vec::with_capacity(t * IMU_COLS);
        for i in 0..t {
            let a = i as f64 * 0.21;
            let ring = rot_z(a);
            let watch = rot_y(-a * 0.5);
            data.extend_from_slice(&[0.1, 0.2, 9.7]);
            data.extend_from_slice(&ring);
            data.extend_from_slice(&[0.0, 0.0, 9.81]);
            data.extend_from_slice(&watch);
        }
        let plain = resample(&data, IMU_COLS, 100.0, 30.0).unwrap();
        let fixed = resample_imu(&data, 100.0, 30.0).unwrap();
        let frames = plain.len() / IMU_COLS;
        let mut plain_worst: f64 = 0.0;
        for i in 0..frames {
            for block in [3usize, 15] {
                let p: Mat3 = plain[i * IMU_COLS + block..i * IMU_COLS + block + 9]
                    .try_into()
                    .unwrap();
                let f: Mat3 = fixed[i * IMU_COLS + block..i * IMU_COLS + block + 9]
                    .try_into()
                    .unwrap();
                plain_worst = plain_worst.max(orthonormality_error(&p));
                assert!(orthonormality_error(&f) < 1e-12);
            }
        }
        assert!(plain_worst > 1e-3, "test needs real drift, saw {plain_worst}");
    }
}
