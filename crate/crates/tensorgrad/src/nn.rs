//! Parameter management and the layer zoo: linear, conv1d, layer norm,
//! LSTM stacks, multi-head attention, transformer encoder blocks, and the
//! sinusoidal positional encoding table.
//!
//! Layers own parameter *names*; the values live in a [`ParamSet`] so the
//! same weights can be bound as leaves into any number of graphs without
//! copying. Initialization is uniform(−√(1/fan_in), +√(1/fan_in)) from a
//! caller-supplied RNG, so a single seed reproduces a whole model.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::{numel, Graph, Padding, Result, TensorError, TensorId};

// ── Parameter storage ───────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Arc<Vec<f64>>,
}

/// Named, shape-tagged parameter tensors with shared storage.
#[derive(Debug, Default, Clone)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(TensorError::Config(format!("duplicate parameter name {name:?}")));
        }
        let expected = numel(&shape);
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape,
            data: Arc::new(data),
        });
        Ok(())
    }

    /// Register a tensor initialized uniform(−√(1/fan_in), +√(1/fan_in)).
    pub fn add_uniform(&mut self, rng: &mut impl Rng, name: &str, shape: Vec<usize>, fan_in: usize) -> Result<()> {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..numel(&shape)).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, shape, data)
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<()> {
        let n = numel(&shape);
        self.add(name, shape, vec![0.0; n])
    }

    pub fn add_ones(&mut self, name: &str, shape: Vec<usize>) -> Result<()> {
        let n = numel(&shape);
        self.add(name, shape, vec![1.0; n])
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Mutable access for optimizers; copy-on-write if graphs still hold the
    /// old values.
    pub fn data_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        let &i = self.index.get(name)?;
        Some(Arc::make_mut(&mut self.entries[i].data))
    }

    /// Replace a parameter's values (shape must match); used by checkpoints.
    pub fn set_data(&mut self, name: &str, data: Vec<f64>) -> Result<()> {
        let &i = self
            .index
            .get(name)
            .ok_or_else(|| TensorError::Config(format!("unknown parameter {name:?}")))?;
        let entry = &mut self.entries[i];
        let expected = numel(&entry.shape);
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape: entry.shape.clone(),
                expected,
                got: data.len(),
            });
        }
        entry.data = Arc::new(data);
        Ok(())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    /// Bind every parameter into `graph` as a leaf. Parameters for which
    /// `trainable` returns false are bound without gradient tracking.
    pub fn bind_where<F: Fn(&str) -> bool>(&self, graph: &mut Graph, trainable: F) -> Result<Bindings> {
        let mut map = HashMap::with_capacity(self.entries.len());
        for e in &self.entries {
            let id = graph.shared_leaf(Arc::clone(&e.data), e.shape.clone(), trainable(&e.name))?;
            map.insert(e.name.clone(), id);
        }
        Ok(Bindings { map })
    }

    pub fn bind(&self, graph: &mut Graph) -> Result<Bindings> {
        self.bind_where(graph, |_| true)
    }
}

/// Name → node mapping produced by [`ParamSet::bind`] for one graph.
#[derive(Debug, Clone)]
pub struct Bindings {
    map: HashMap<String, TensorId>,
}

impl Bindings {
    /// Node id for a parameter; panics on unknown names because a miss is a
    /// construction bug, not a runtime condition.
    pub fn id(&self, name: &str) -> TensorId {
        *self
            .map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name:?} not bound into this graph"))
    }

    pub fn get(&self, name: &str) -> Option<TensorId> {
        self.map.get(name).copied()
    }
}

// ── Layers ──────────────────────────────────────────────────────────────

/// y = x·W (+ b) with W stored input-major ([in, out]).
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: String,
    pub b: Option<String>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(ps: &mut ParamSet, rng: &mut impl Rng, prefix: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        let w = format!("{prefix}.w");
        let b = format!("{prefix}.b");
        ps.add_uniform(rng, &w, vec![in_dim, out_dim], in_dim)?;
        ps.add_uniform(rng, &b, vec![out_dim], in_dim)?;
        Ok(Linear {
            w,
            b: Some(b),
            in_dim,
            out_dim,
        })
    }

    pub fn new_unbiased(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        let w = format!("{prefix}.w");
        ps.add_uniform(rng, &w, vec![in_dim, out_dim], in_dim)?;
        Ok(Linear {
            w,
            b: None,
            in_dim,
            out_dim,
        })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        let y = g.matmul(x, b.id(&self.w))?;
        match &self.b {
            Some(bias) => g.add_row(y, b.id(bias)),
            None => Ok(y),
        }
    }
}

/// Temporal convolution stem: kernel w×c_in×c_out plus per-channel bias.
#[derive(Debug, Clone)]
pub struct Conv1dLayer {
    pub kernel: String,
    pub bias: String,
    pub width: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl Conv1dLayer {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        prefix: &str,
        width: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let kernel = format!("{prefix}.kernel");
        let bias = format!("{prefix}.bias");
        let fan_in = width * c_in;
        ps.add_uniform(rng, &kernel, vec![width, c_in, c_out], fan_in)?;
        ps.add_uniform(rng, &bias, vec![c_out], fan_in)?;
        Ok(Conv1dLayer {
            kernel,
            bias,
            width,
            stride,
            padding,
        })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        let y = g.conv1d(x, b.id(&self.kernel), self.stride, self.padding)?;
        g.add_row(y, b.id(&self.bias))
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormLayer {
    pub gamma: String,
    pub beta: String,
    pub eps: f64,
}

impl LayerNormLayer {
    pub fn new(ps: &mut ParamSet, prefix: &str, d: usize) -> Result<Self> {
        let gamma = format!("{prefix}.gamma");
        let beta = format!("{prefix}.beta");
        ps.add_ones(&gamma, vec![d])?;
        ps.add_zeros(&beta, vec![d])?;
        Ok(LayerNormLayer {
            gamma,
            beta,
            eps: 1e-5,
        })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        g.layer_norm(x, b.id(&self.gamma), b.id(&self.beta), self.eps)
    }
}

/// Stacked LSTM; each layer feeds its full hidden sequence to the next.
#[derive(Debug, Clone)]
pub struct LstmStack {
    layers: Vec<(String, String, String)>, // (w_ih, w_hh, bias) names
    pub hidden: usize,
}

impl LstmStack {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        prefix: &str,
        d_in: usize,
        hidden: usize,
        layers: usize,
    ) -> Result<Self> {
        if layers < 1 {
            return Err(TensorError::Config("lstm needs at least one layer".into()));
        }
        let mut names = Vec::with_capacity(layers);
        for l in 0..layers {
            let in_dim = if l == 0 { d_in } else { hidden };
            let w_ih = format!("{prefix}.l{l}.w_ih");
            let w_hh = format!("{prefix}.l{l}.w_hh");
            let bias = format!("{prefix}.l{l}.bias");
            ps.add_uniform(rng, &w_ih, vec![4 * hidden, in_dim], in_dim)?;
            ps.add_uniform(rng, &w_hh, vec![4 * hidden, hidden], hidden)?;
            ps.add_uniform(rng, &bias, vec![4 * hidden], hidden)?;
            names.push((w_ih, w_hh, bias));
        }
        Ok(LstmStack { layers: names, hidden })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        let mut h = x;
        for (w_ih, w_hh, bias) in &self.layers {
            h = g.lstm(h, b.id(w_ih), b.id(w_hh), b.id(bias), self.hidden)?;
        }
        Ok(h)
    }
}

/// Scaled dot-product attention with learned Q/K/V/O projections. Queries
/// and keys/values may come from different sequences (cross-attention).
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub d_model: usize,
}

impl MultiHeadAttention {
    pub fn new(ps: &mut ParamSet, rng: &mut impl Rng, prefix: &str, d_model: usize, heads: usize) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(TensorError::Config(format!(
                "d_model {d_model} not divisible by heads {heads}"
            )));
        }
        // No bias on the key projection: softmax is invariant to shifting a
        // query's scores by a constant, so a key bias can never influence
        // the output (and would never receive gradient).
        Ok(MultiHeadAttention {
            wq: Linear::new(ps, rng, &format!("{prefix}.wq"), d_model, d_model)?,
            wk: Linear::new_unbiased(ps, rng, &format!("{prefix}.wk"), d_model, d_model)?,
            wv: Linear::new(ps, rng, &format!("{prefix}.wv"), d_model, d_model)?,
            wo: Linear::new(ps, rng, &format!("{prefix}.wo"), d_model, d_model)?,
            heads,
            d_model,
        })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, q_in: TensorId, kv_in: TensorId) -> Result<TensorId> {
        Ok(self.apply_with_weights(g, b, q_in, kv_in)?.0)
    }

    /// Like [`apply`](Self::apply), additionally returning the per-head
    /// attention matrices (each Tq×Tk, rows summing to 1) for inspection.
    pub fn apply_with_weights(
        &self,
        g: &mut Graph,
        b: &Bindings,
        q_in: TensorId,
        kv_in: TensorId,
    ) -> Result<(TensorId, Vec<TensorId>)> {
        let q = self.wq.apply(g, b, q_in)?;
        let k = self.wk.apply(g, b, kv_in)?;
        let v = self.wv.apply(g, b, kv_in)?;
        let d_head = self.d_model / self.heads;
        let scale = 1.0 / (d_head as f64).sqrt();
        let mut head_outs = Vec::with_capacity(self.heads);
        let mut head_weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * d_head, d_head)?;
            let kh = g.slice_cols(k, h * d_head, d_head)?;
            let vh = g.slice_cols(v, h * d_head, d_head)?;
            let scores = g.matmul_nt(qh, kh)?;
            let scaled = g.scale(scores, scale);
            let attn = g.softmax(scaled, 1)?;
            head_weights.push(attn);
            head_outs.push(g.matmul(attn, vh)?);
        }
        let merged = g.concat_cols(&head_outs)?;
        let out = self.wo.apply(g, b, merged)?;
        Ok((out, head_weights))
    }
}

/// Post-norm transformer encoder block:
/// `x → LN(x + attn(x)) → LN(· + FF(·))` with a ReLU feed-forward.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub ln1: LayerNormLayer,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNormLayer,
}

impl EncoderLayer {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut impl Rng,
        prefix: &str,
        d_model: usize,
        heads: usize,
        ff_expansion: usize,
    ) -> Result<Self> {
        Ok(EncoderLayer {
            attn: MultiHeadAttention::new(ps, rng, &format!("{prefix}.attn"), d_model, heads)?,
            ln1: LayerNormLayer::new(ps, &format!("{prefix}.ln1"), d_model)?,
            ff1: Linear::new(ps, rng, &format!("{prefix}.ff1"), d_model, d_model * ff_expansion)?,
            ff2: Linear::new(ps, rng, &format!("{prefix}.ff2"), d_model * ff_expansion, d_model)?,
            ln2: LayerNormLayer::new(ps, &format!("{prefix}.ln2"), d_model)?,
        })
    }

    pub fn apply(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        let attn = self.attn.apply(g, b, x, x)?;
        let sum1 = g.add(x, attn)?;
        let x1 = self.ln1.apply(g, b, sum1)?;
        let h = self.ff1.apply(g, b, x1)?;
        let h = g.relu(h);
        let ff = self.ff2.apply(g, b, h)?;
        let sum2 = g.add(x1, ff)?;
        self.ln2.apply(g, b, sum2)
    }
}

// ── Positional encoding ─────────────────────────────────────────────────

/// Sinusoidal position table, row-major t×d:
/// `pe[t, 2i] = sin(t·ω_i)`, `pe[t, 2i+1] = cos(t·ω_i)` with
/// `ω_i = 10000^(−2i/d)`.
pub fn positional_encoding(t: usize, d: usize) -> Result<Vec<f64>> {
    if d % 2 != 0 {
        return Err(TensorError::Config(format!(
            "positional encoding needs an even dimension, got {d}"
        )));
    }
    let mut pe = vec![0.0; t * d];
    for pos in 0..t {
        for i in 0..d / 2 {
            let omega = 10000f64.powf(-(2.0 * i as f64) / d as f64);
            let x = pos as f64 * omega;
            pe[pos * d + 2 * i] = x.sin();
            pe[pos * d + 2 * i + 1] = x.cos();
        }
    }
    Ok(pe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn duplicate_parameter_names_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", vec![2], vec![1.0, 2.0]).unwrap();
        assert!(ps.add("w", vec![2], vec![3.0, 4.0]).is_err());
    }

    #[test]
    fn uniform_init_respects_fan_in_bound() {
        let mut ps = ParamSet::new();
        ps.add_uniform(&mut rng(1), "w", vec![64, 16], 64).unwrap();
        let bound = (1.0f64 / 64.0).sqrt();
        let vals = &ps.get("w").unwrap().data;
        assert!(vals.iter().all(|v| v.abs() < bound));
        // Not degenerate: values actually spread out.
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > bound);
    }

    #[test]
    fn same_seed_same_parameters() {
        let build = || {
            let mut ps = ParamSet::new();
            let mut r = rng(42);
            Linear::new(&mut ps, &mut r, "lin", 8, 4).unwrap();
            ps.get("lin.w").unwrap().data.to_vec()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn linear_applies_weights_and_bias() {
        let mut ps = ParamSet::new();
        ps.add("lin.w", vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        ps.add("lin.b", vec![2], vec![10.0, 20.0]).unwrap();
        let lin = Linear {
            w: "lin.w".into(),
            b: Some("lin.b".into()),
            in_dim: 2,
            out_dim: 2,
        };
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let x = g.constant(vec![1.0, 2.0], vec![1, 2]);
        let y = lin.apply(&mut g, &b, x).unwrap();
        assert_eq!(g.data(y), &[11.0, 22.0]);
    }

    #[test]
    fn attention_head_divisibility_guard() {
        let mut ps = ParamSet::new();
        assert!(matches!(
            MultiHeadAttention::new(&mut ps, &mut rng(0), "mha", 6, 4),
            Err(TensorError::Config(_))
        ));
    }

    #[test]
    fn attention_single_key_forces_weight_one() {
        let d = 8;
        let mut ps = ParamSet::new();
        let mut r = rng(7);
        let mha = MultiHeadAttention::new(&mut ps, &mut r, "mha", d, 2).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let q_in = g.constant((0..3 * d).map(|i| i as f64 * 0.1).collect(), vec![3, d]);
        let kv_in = g.constant((0..d).map(|i| 0.5 - i as f64 * 0.07).collect(), vec![1, d]);
        let (out, weights) = mha.apply_with_weights(&mut g, &b, q_in, kv_in).unwrap();

        // With one key, every attention weight is exactly 1.
        for &w in &weights {
            assert!(g.data(w).iter().all(|&v| (v - 1.0).abs() < 1e-15));
        }
        // And every output row equals the O∘V projection of the single row.
        let vp = mha.wv.apply(&mut g, &b, kv_in).unwrap();
        let want = mha.wo.apply(&mut g, &b, vp).unwrap();
        let want = g.data(want).to_vec();
        for row in g.data(out).chunks(d) {
            for (a, e) in row.iter().zip(&want) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let d = 8;
        let mut ps = ParamSet::new();
        let mut r = rng(3);
        let mha = MultiHeadAttention::new(&mut ps, &mut r, "mha", d, 4).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let x = g.constant((0..5 * d).map(|i| (i as f64 * 0.37).sin()).collect(), vec![5, d]);
        let y = g.constant((0..7 * d).map(|i| (i as f64 * 0.11).cos()).collect(), vec![7, d]);
        let (_, weights) = mha.apply_with_weights(&mut g, &b, x, y).unwrap();
        for w in weights {
            for row in g.data(w).chunks(7) {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encoder_layer_preserves_shape() {
        let d = 8;
        let mut ps = ParamSet::new();
        let mut r = rng(11);
        let enc = EncoderLayer::new(&mut ps, &mut r, "enc", d, 2, 4).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let x = g.constant((0..6 * d).map(|i| (i as f64).sin()).collect(), vec![6, d]);
        let y = enc.apply(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(y), &[6, d]);
        assert!(g.data(y).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lstm_stack_output_shape() {
        let mut ps = ParamSet::new();
        let mut r = rng(5);
        let stack = LstmStack::new(&mut ps, &mut r, "lstm", 6, 16, 2).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g).unwrap();
        let x = g.constant((0..30 * 6).map(|i| (i as f64 * 0.01).sin()).collect(), vec![30, 6]);
        let y = stack.apply(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(y), &[30, 16]);
    }

    #[test]
    fn positional_encoding_matches_direct_formula() {
        let (t, d) = (30, 16);
        let pe = positional_encoding(t, d).unwrap();
        // Position 0: sin → 0, cos → 1.
        for i in 0..d / 2 {
            assert_eq!(pe[2 * i], 0.0);
            assert_eq!(pe[2 * i + 1], 1.0);
        }
        for (pos, row) in pe.chunks(d).enumerate() {
            for i in 0..d / 2 {
                let omega = 10000f64.powf(-(2.0 * i as f64) / d as f64);
                assert!((row[2 * i] - (pos as f64 * omega).sin()).abs() < 1e-12);
                assert!((row[2 * i + 1] - (pos as f64 * omega).cos()).abs() < 1e-12);
                assert!(row[2 * i].abs() <= 1.0 && row[2 * i + 1].abs() <= 1.0);
            }
        }
        assert!(positional_encoding(4, 7).is_err());
    }

    #[test]
    fn frozen_binding_receives_no_gradient() {
        let mut ps = ParamSet::new();
        ps.add("a", vec![2], vec![1.0, 2.0]).unwrap();
        ps.add("b", vec![2], vec![3.0, 4.0]).unwrap();
        let mut g = Graph::new();
        let bind = ps.bind_where(&mut g, |n| n == "a").unwrap();
        let s = g.add(bind.id("a"), bind.id("b")).unwrap();
        let sq = g.square(s);
        let loss = g.sum_all(sq);
        g.backward(loss).unwrap();
        assert!(g.grad(bind.id("a")).is_some());
        assert!(g.grad(bind.id("b")).is_none());
    }
}
