//! Adam and global-norm gradient clipping.

use std::collections::BTreeMap;

use tensorgrad::nn::ParamSet;

use crate::{Result, TrainError};

/// Gradients keyed by parameter name. Ordered so that every fold over the
/// map (norms, updates) is reproducible across runs.
pub type GradMap = BTreeMap<String, Vec<f64>>;

/// Global-norm ceiling applied before every optimizer step; recurrent gates
/// occasionally spike early in training and this keeps steps bounded.
pub const GRAD_CLIP_NORM: f64 = 5.0;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// First/second moment estimates, lazily allocated per parameter.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Steps taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update. Only parameters present in `grads` move;
/// anything absent (frozen components) is untouched, which is what makes
/// stage-wise fine-tuning a freeze rather than a zero-gradient no-op.
pub fn adam_step(params: &mut ParamSet, grads: &GradMap, state: &mut AdamState, lr: f64) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(TrainError::Config(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    for (name, g) in grads {
        let n = params
            .get(name)
            .ok_or_else(|| TrainError::Config(format!("gradient for unknown parameter {name}")))?
            .data
            .len();
        if g.len() != n {
            return Err(TrainError::Config(format!(
                "gradient shape mismatch for {name}: {} values for {n} parameters",
                g.len()
            )));
        }
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for (name, g) in grads {
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
        let p = params.data_mut(name).expect("validated above");
        for i in 0..g.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

/// Scale all gradients so their joint Euclidean norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut GradMap, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.values() {
        for &x in g {
            sq += x * x;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            for x in g.iter_mut() {
                *x *= s;
            }
        }
    }
    norm
}
