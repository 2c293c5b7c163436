//! EMG envelope extraction and the 1→6 lag-stack expansion.

use crate::{PipelineError, Result};

/// RMS smoothing span: 150 ms at the 100 Hz capture rate.
pub const SMOOTHING_WINDOW: usize = 15;

/// Rectified RMS envelope over a centered 15-sample window, computed at
/// the capture rate (before resampling). Edges shrink the window to the
/// available samples.
pub fn rectify_smooth(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < SMOOTHING_WINDOW {
        return Err(PipelineError::TooShort {
            need: SMOOTHING_WINDOW,
            got: raw.len(),
        });
    }
    let half = SMOOTHING_WINDOW / 2;
    let n = raw.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let power: f64 = raw[lo..hi].iter().map(|v| v * v).sum();
            (power / (hi - lo) as f64).sqrt()
        })
        .collect())
}

/// Causal envelope for live serving: RMS over the trailing 15 samples
/// (including the current one). Matches `rectify_smooth` once the window
/// is full of the same data, but never looks ahead.
pub fn rectify_smooth_causal(raw: &[f64]) -> Vec<f64> {
    let n = raw.len();
    (0..n)
        .map(|i| {
            let lo = (i + 1).saturating_sub(SMOOTHING_WINDOW);
            let power: f64 = raw[lo..=i].iter().map(|v| v * v).sum();
            (power / (i - lo + 1) as f64).sqrt()
        })
        .collect()
}

/// Expand a 1-channel envelope to 6 columns: column j is the envelope
/// delayed by j frames, edge-padded with the first value.
pub fn expand_emg(envelope: &[f64]) -> Result<Vec<[f64; 6]>> {
    if envelope.len() < 6 {
        return Err(PipelineError::TooShort {
            need: 6,
            got: envelope.len(),
        });
    }
    Ok(envelope
        .iter()
        .enumerate()
        .map(|(t, _)| {
            let mut row = [0.0; 6];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = envelope[t.saturating_sub(j)];
            }
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_gives_zero_envelope() {
        let env = rectify_smooth(&vec![0.0; 40]).unwrap();
        assert!(env.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alternating_sign_constant_magnitude() {
        let raw: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { 2.5 } else { -2.5 }).collect();
        let env = rectify_smooth(&raw).unwrap();
        for &v in &env {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_is_nonnegative() {
        let raw: Vec<f64> = (0..100).map(|i| ((i * 37) % 13) as f64 - 6.0).collect();
        assert!(rectify_smooth(&raw).unwrap().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn too_short_rejected() {
        let err = rectify_smooth(&[1.0; 14]);
        assert!(matches!(err, Err(PipelineError::TooShort { need: 15, got: 14 })));
    }

    #[test]
    fn causal_matches_centered_on_long_constant_runs() {
        let raw = vec![1.5; 50];
        let centered = rectify_smooth(&raw).unwrap();
        let causal = rectify_smooth_causal(&raw);
        for i in 20..40 {
            assert!((centered[i] - causal[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn causal_never_looks_ahead() {
        // A step at t=30 must not raise the causal envelope before t=30.
        let mut raw = vec![0.0; 60];
        for v in raw.iter_mut().skip(30) {
            *v = 4.0;
        }
        let causal = rectify_smooth_causal(&raw);
        assert!(causal[..30].iter().all(|&v| v == 0.0));
        assert!(causal[30] > 0.0);
    }

    #[test]
    fn expand_constant() {
        let rows = expand_emg(&vec![0.7; 20]).unwrap();
        for row in rows {
            assert_eq!(row, [0.7; 6]);
        }
    }

    #[test]
    fn expand_impulse_lags() {
        let mut env = vec![0.0; 30];
        env[10] = 1.0;
        let rows = expand_emg(&env).unwrap();
        for j in 0..6 {
            for (t, row) in rows.iter().enumerate() {
                let want = if t == 10 + j { 1.0 } else { 0.0 };
                assert_eq!(row[j], want, "lag {j} at t={t}");
            }
        }
    }

    #[test]
    fn expand_column_zero_is_identity() {
        let env: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).sin().abs()).collect();
        let rows = expand_emg(&env).unwrap();
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row[0], env[t]);
        }
    }

    #[test]
    fn expand_edge_padding_uses_first_value() {
        let env = vec![3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let rows = expand_emg(&env).unwrap();
        assert_eq!(rows[0], [3.0; 6]); // every lag clamps to index 0
        assert_eq!(rows[2][2], 3.0);
        assert_eq!(rows[2][1], 1.0);
    }
}
