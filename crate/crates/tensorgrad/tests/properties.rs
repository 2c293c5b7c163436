//! Property tests: finite-in/finite-out through a composite network and
//! softmax normalization across the documented magnitude range.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensorgrad::nn::{EncoderLayer, ParamSet};
use tensorgrad::Graph;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..8, scale in 0.0f64..1e3) {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| ((i as f64 * 0.7).sin()) * scale)
            .collect();
        let x = g.constant(data, vec![rows, cols]);
        let y = g.softmax(x, 1).unwrap();
        for row in g.data(y).chunks(cols) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            // At extreme magnitudes non-max entries may underflow to 0.
            prop_assert!(row.iter().all(|v| *v >= 0.0 && *v <= 1.0));
        }
    }

    #[test]
    fn finite_inputs_yield_finite_outputs_and_gradients(seed in 0u64..1000, amp in 0.01f64..10.0) {
        let d = 8;
        let t = 5;
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = EncoderLayer::new(&mut ps, &mut rng, "enc", d, 2, 4).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let data: Vec<f64> = (0..t * d).map(|i| ((i as f64 + seed as f64) * 0.31).sin() * amp).collect();
        let x = g.leaf(data, vec![t, d], true).unwrap();
        let y = enc.apply(&mut g, &b, x).unwrap();
        let sq = g.square(y);
        let loss = g.mean_all(sq);
        g.backward(loss).unwrap();

        prop_assert!(g.data(y).iter().all(|v| v.is_finite()));
        prop_assert!(g.grad(x).unwrap().iter().all(|v| v.is_finite()));
        for e in ps.entries() {
            let grad = g.grad(b.id(&e.name)).unwrap();
            prop_assert!(grad.iter().all(|v| v.is_finite()), "non-finite grad in {}", e.name);
        }
    }
}
