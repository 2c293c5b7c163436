//! Metric oracles: hand-computed position errors, FK-generated angle
//! offsets, and definitional force statistics.

use evalkit::{angle_diff, force_metrics, mpjpe, EvalError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthhand::{
    flatten_pose, forward_kinematics, HandSkeleton, JointAngles, ABD, FLEX_DIP, FLEX_MCP,
    FLEX_PIP,
};

fn pose_from_flexion(fingers: [[f64; 4]; 5]) -> [f64; 63] {
    let skeleton = HandSkeleton::for_hand_length(18.0).unwrap();
    flatten_pose(&forward_kinematics(&JointAngles { fingers }, &skeleton).unwrap())
}

fn random_pose(rng: &mut ChaCha8Rng) -> [f64; 63] {
    let mut fingers = [[0.0; 4]; 5];
    for f in fingers.iter_mut() {
        f[FLEX_MCP] = rng.gen_range(0.2..1.2);
        f[FLEX_PIP] = rng.gen_range(0.2..1.2);
        f[FLEX_DIP] = rng.gen_range(0.2..1.2);
        f[ABD] = 0.0;
    }
    pose_from_flexion(fingers)
}

// ── MPJPE ────────────────────────────────────────────────────────────────

#[test]
fn identical_poses_score_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_pose(&mut rng);
    assert_eq!(mpjpe(&p, &p).unwrap(), 0.0);
}

#[test]
fn uniform_shift_scores_exactly_its_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gt = random_pose(&mut rng);
    let mut pred = gt;
    for j in 0..21 {
        pred[3 * j] += 1.0; // 1 cm along x, every joint
    }
    assert_eq!(mpjpe(&pred, &gt).unwrap(), 1.0);
}

#[test]
fn mpjpe_matches_a_hand_summed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let a: Vec<f64> = (0..63).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..63).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mut oracle = 0.0;
        for (pa, pb) in a.chunks(3).zip(b.chunks(3)) {
            oracle += ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2))
                .sqrt();
        }
        oracle /= 21.0;
        assert!((mpjpe(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn wrong_pose_length_is_a_usage_error() {
    let p = vec![0.0; 62];
    let q = vec![0.0; 63];
    assert!(matches!(mpjpe(&p, &q), Err(EvalError::Usage(_))));
}

// ── Angle difference ─────────────────────────────────────────────────────

#[test]
fn identical_poses_have_zero_angle_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_pose(&mut rng);
    assert_eq!(angle_diff(&p, &p).unwrap(), 0.0);
}

#[test]
fn one_right_angle_contributes_six_degrees() {
    let straight = pose_from_flexion([[0.0; 4]; 5]);
    let mut fingers = [[0.0; 4]; 5];
    fingers[1][FLEX_PIP] = std::f64::consts::FRAC_PI_2; // index PIP bent 90°
    let bent = pose_from_flexion(fingers);
    // 90° on one of 15 joints → 6° mean difference.
    assert!((angle_diff(&bent, &straight).unwrap() - 6.0).abs() < 1e-9);
}

#[test]
fn injected_flexion_offsets_are_recovered() {
    // With zero abduction the interior angle is π − flexion, so the metric
    // must equal the mean absolute injected offset exactly (up to FK/acos
    // round-trip noise).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut base = [[0.0f64; 4]; 5];
        let mut offset = [[0.0f64; 4]; 5];
        let mut sum = 0.0;
        for f in 0..5 {
            for j in [FLEX_MCP, FLEX_PIP, FLEX_DIP] {
                base[f][j] = rng.gen_range(0.3..1.1);
                offset[f][j] = rng.gen_range(-0.15..0.15);
                sum += offset[f][j].abs();
            }
        }
        let shifted: [[f64; 4]; 5] =
            std::array::from_fn(|f| std::array::from_fn(|j| base[f][j] + offset[f][j]));
        let a = pose_from_flexion(base);
        let b = pose_from_flexion(shifted);
        let expected = (sum / 15.0).to_degrees();
        assert!((angle_diff(&a, &b).unwrap() - expected).abs() < 1e-6);
    }
}

#[test]
fn degenerate_pose_is_refused() {
    let zero = [0.0; 63];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ok = random_pose(&mut rng);
    assert!(matches!(angle_diff(&zero, &ok), Err(EvalError::Model(_))));
}

// ── Force statistics ─────────────────────────────────────────────────────

fn random_series(rng: &mut ChaCha8Rng, t: usize) -> Vec<[f64; 5]> {
    (0..t)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
        .collect()
}

#[test]
fn perfect_prediction_scores_clean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gt = random_series(&mut rng, 40);
    let m = force_metrics(&gt, &gt).unwrap();
    for s in &m.per_finger {
        assert_eq!(s.rmse, 0.0);
        assert_eq!(s.mae, 0.0);
        assert!((s.pearson - 1.0).abs() < 1e-12);
        assert!(!s.degenerate);
    }
    assert_eq!(m.average.rmse, 0.0);
    assert!((m.average.pearson - 1.0).abs() < 1e-12);
}

#[test]
fn mirrored_prediction_is_perfectly_anticorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Zero-mean ground truth, prediction = −gt.
    let mut gt = random_series(&mut rng, 30);
    for f in 0..5 {
        let mean = gt.iter().map(|r| r[f]).sum::<f64>() / 30.0;
        for row in gt.iter_mut() {
            row[f] -= mean;
        }
    }
    let pred: Vec<[f64; 5]> = gt.iter().map(|r| std::array::from_fn(|f| -r[f])).collect();
    let m = force_metrics(&pred, &gt).unwrap();
    for s in &m.per_finger {
        assert!((s.pearson + 1.0).abs() < 1e-12);
    }
}

#[test]
fn matches_a_two_pass_definitional_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pred = random_series(&mut rng, 100);
    let gt = random_series(&mut rng, 100);
    let m = force_metrics(&pred, &gt).unwrap();
    for f in 0..5 {
        let x: Vec<f64> = pred.iter().map(|r| r[f]).collect();
        let y: Vec<f64> = gt.iter().map(|r| r[f]).collect();
        let n = 100.0;
        // Pass one: means. Pass two: central moments.
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        let rmse = (x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
        let mae = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        let s = &m.per_finger[f];
        assert!((s.rmse - rmse).abs() < 1e-12);
        assert!((s.mae - mae).abs() < 1e-12);
        assert!((s.pearson - cov / (vx.sqrt() * vy.sqrt())).abs() < 1e-12);
    }
    let avg = m.per_finger.iter().map(|s| s.pearson).sum::<f64>() / 5.0;
    assert!((m.average.pearson - avg).abs() < 1e-15);
}

#[test]
fn constant_series_is_flagged_not_nan() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pred = random_series(&mut rng, 25);
    let mut gt = random_series(&mut rng, 25);
    for row in gt.iter_mut() {
        row[2] = 0.5; // middle finger never moves
    }
    let m = force_metrics(&pred, &gt).unwrap();
    assert!(m.per_finger[2].degenerate);
    assert_eq!(m.per_finger[2].pearson, 0.0);
    assert!(m.per_finger[2].rmse.is_finite());
    for f in [0, 1, 3, 4] {
        assert!(!m.per_finger[f].degenerate);
    }
    assert!(m.average.degenerate);
    assert!(m.average.pearson.is_finite());
}

#[test]
fn short_or_mismatched_series_are_usage_errors() {
    let one = vec![[0.1; 5]];
    assert!(matches!(force_metrics(&one, &one), Err(EvalError::Usage(_))));
    let two = vec![[0.1; 5]; 2];
    let three = vec![[0.1; 5]; 3];
    assert!(matches!(force_metrics(&two, &three), Err(EvalError::Usage(_))));
}

#[test]
fn error_and_correlation_bounds_hold_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in [2, 3, 10, 64] {
        for _ in 0..50 {
            let pred = random_series(&mut rng, t);
            let gt = random_series(&mut rng, t);
            let m = force_metrics(&pred, &gt).unwrap();
            for s in m.per_finger.iter().chain([&m.average]) {
                assert!(s.rmse >= s.mae && s.mae >= 0.0, "rmse {} mae {}", s.rmse, s.mae);
                assert!((-1.0..=1.0).contains(&s.pearson));
            }
        }
    }
}
