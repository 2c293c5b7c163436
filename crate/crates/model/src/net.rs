//! Network construction and the forward pass.
//!
//! Parameters live in a [`ParamSet`] under component-prefixed names
//! (`imu_encoder.*`, `emg_encoder.*`, `fusion.*`, `pose_decoder.*`,
//! `force_decoder.*`, `aux_imu.*`, `aux_emg.*`), which is what checkpointing
//! and stage-wise freezing key on. A forward pass binds those parameters into
//! a fresh [`Graph`] and appends the whole computation; batching simply
//! appends more samples to the same graph against the same bound leaves.

use std::collections::HashSet;

use pipeline::WindowedSample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synthhand::{flatten_pose, forward_kinematics, HandSkeleton, JointAngles, FINGER_NAMES};
use tensorgrad::nn::{
    positional_encoding, Bindings, Conv1dLayer, EncoderLayer, LayerNormLayer, Linear, LstmStack,
    MultiHeadAttention, ParamSet,
};
use tensorgrad::{Graph, Padding, TensorId};

use crate::config::{AblationVariant, Component, ModelConfig, Pooling};
use crate::{ModelError, Result};

/// Hand length behind the rest-pose bias of the pose heads. Starting the
/// heads at a plausible open hand keeps early angle-loss gradients tame
/// (near-coincident predicted landmarks make the angle surface steep).
const BIAS_HAND_LENGTH_CM: f64 = 18.0;

// ── Layer groups ─────────────────────────────────────────────────────────

/// One bidirectional cross-attention layer: each stream queries the other,
/// then takes a residual + layer norm.
#[derive(Debug, Clone)]
struct CrossLayer {
    imu_from_emg: MultiHeadAttention,
    emg_from_imu: MultiHeadAttention,
    ln_imu: LayerNormLayer,
    ln_emg: LayerNormLayer,
}

impl CrossLayer {
    fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        d: usize,
        heads: usize,
    ) -> tensorgrad::Result<Self> {
        Ok(CrossLayer {
            imu_from_emg: MultiHeadAttention::new(ps, rng, &format!("{prefix}.imu_from_emg"), d, heads)?,
            emg_from_imu: MultiHeadAttention::new(ps, rng, &format!("{prefix}.emg_from_imu"), d, heads)?,
            ln_imu: LayerNormLayer::new(ps, &format!("{prefix}.ln_imu"), d)?,
            ln_emg: LayerNormLayer::new(ps, &format!("{prefix}.ln_emg"), d)?,
        })
    }
}

/// Pose + force readout from one pooled vector: a wrist unit, one 12-wide
/// unit per finger (4 landmarks × xyz), and one scalar force unit per finger.
/// Pure linear layers — no nonlinearity couples fingers after the split.
#[derive(Debug, Clone)]
struct DecoderHeads {
    wrist: Linear,
    pose_fingers: Vec<Linear>,
    force_fingers: Vec<Linear>,
}

impl DecoderHeads {
    fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        pose_prefix: &str,
        force_prefix: &str,
        cfg: &ModelConfig,
    ) -> tensorgrad::Result<Self> {
        let per_finger = 12;
        let wrist = Linear::new(ps, rng, &format!("{pose_prefix}.wrist"), cfg.d_hidden, 3)?;
        let mut pose_fingers = Vec::with_capacity(cfg.n_fingers);
        let mut force_fingers = Vec::with_capacity(cfg.n_fingers);
        for name in &FINGER_NAMES[..cfg.n_fingers] {
            pose_fingers.push(Linear::new(
                ps,
                rng,
                &format!("{pose_prefix}.{name}"),
                cfg.d_hidden,
                per_finger,
            )?);
        }
        for name in &FINGER_NAMES[..cfg.n_fingers] {
            force_fingers.push(Linear::new(ps, rng, &format!("{force_prefix}.{name}"), cfg.d_hidden, 1)?);
        }
        Ok(DecoderHeads {
            wrist,
            pose_fingers,
            force_fingers,
        })
    }

    fn apply(&self, g: &mut Graph, b: &Bindings, pooled: TensorId) -> tensorgrad::Result<(TensorId, TensorId)> {
        let mut pose_parts = Vec::with_capacity(1 + self.pose_fingers.len());
        pose_parts.push(self.wrist.apply(g, b, pooled)?);
        for f in &self.pose_fingers {
            pose_parts.push(f.apply(g, b, pooled)?);
        }
        let pose = g.concat_cols(&pose_parts)?;
        let mut force_parts = Vec::with_capacity(self.force_fingers.len());
        for f in &self.force_fingers {
            force_parts.push(f.apply(g, b, pooled)?);
        }
        let force = g.concat_cols(&force_parts)?;
        Ok((pose, force))
    }

    /// Point the pose biases at a reference rest pose.
    fn set_pose_bias(&self, ps: &mut ParamSet, rest: &[f64; 63]) -> tensorgrad::Result<()> {
        if let Some(b) = &self.wrist.b {
            ps.set_data(b, rest[..3].to_vec())?;
        }
        for (f, linear) in self.pose_fingers.iter().enumerate() {
            if let Some(b) = &linear.b {
                ps.set_data(b, rest[3 + 12 * f..15 + 12 * f].to_vec())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Arch {
    conv: Conv1dLayer,
    imu_layers: Vec<EncoderLayer>,
    lstm: LstmStack,
    emg_layers: Vec<EncoderLayer>,
    cross: Vec<CrossLayer>,
    fuse_proj: Linear,
    fuse_ff1: Linear,
    fuse_ff2: Linear,
    fuse_ln: LayerNormLayer,
    heads_fused: DecoderHeads,
    heads_imu: DecoderHeads,
    heads_emg: DecoderHeads,
}

impl Arch {
    fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> tensorgrad::Result<Self> {
        let d = cfg.d_hidden;
        let conv = Conv1dLayer::new(
            ps,
            rng,
            "imu_encoder.conv",
            cfg.conv_width,
            cfg.imu_dim,
            d,
            1,
            Padding::Same,
        )?;
        let mut imu_layers = Vec::with_capacity(cfg.encoder_layers);
        for l in 0..cfg.encoder_layers {
            imu_layers.push(EncoderLayer::new(
                ps,
                rng,
                &format!("imu_encoder.enc{l}"),
                d,
                cfg.heads,
                cfg.ff_expansion,
            )?);
        }
        let lstm = LstmStack::new(ps, rng, "emg_encoder.lstm", cfg.emg_dim, d, cfg.lstm_layers)?;
        let mut emg_layers = Vec::with_capacity(cfg.encoder_layers);
        for l in 0..cfg.encoder_layers {
            emg_layers.push(EncoderLayer::new(
                ps,
                rng,
                &format!("emg_encoder.enc{l}"),
                d,
                cfg.heads,
                cfg.ff_expansion,
            )?);
        }
        let mut cross = Vec::with_capacity(cfg.cross_layers);
        for l in 0..cfg.cross_layers {
            cross.push(CrossLayer::new(ps, rng, &format!("fusion.cross{l}"), d, cfg.heads)?);
        }
        let fuse_proj = Linear::new(ps, rng, "fusion.proj", 2 * d, d)?;
        let fuse_ff1 = Linear::new(ps, rng, "fusion.ff1", d, d * cfg.ff_expansion)?;
        let fuse_ff2 = Linear::new(ps, rng, "fusion.ff2", d * cfg.ff_expansion, d)?;
        let fuse_ln = LayerNormLayer::new(ps, "fusion.ln", d)?;
        let heads_fused = DecoderHeads::new(ps, rng, "pose_decoder", "force_decoder", cfg)?;
        let heads_imu = DecoderHeads::new(ps, rng, "aux_imu.pose", "aux_imu.force", cfg)?;
        let heads_emg = DecoderHeads::new(ps, rng, "aux_emg.pose", "aux_emg.force", cfg)?;
        Ok(Arch {
            conv,
            imu_layers,
            lstm,
            emg_layers,
            cross,
            fuse_proj,
            fuse_ff1,
            fuse_ff2,
            fuse_ln,
            heads_fused,
            heads_imu,
            heads_emg,
        })
    }
}

// ── The model ────────────────────────────────────────────────────────────

/// One window's predictions, extracted from a finished graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// Flattened 21×3 wrist-origin landmark coordinates, cm (fused head).
    pub pose: Vec<f64>,
    /// Per-finger normalized force (fused head).
    pub force: Vec<f64>,
    pub pose_imu: Vec<f64>,
    pub force_imu: Vec<f64>,
    pub pose_emg: Vec<f64>,
    pub force_emg: Vec<f64>,
}

/// Graph nodes for one window's forward pass.
#[derive(Debug, Clone)]
pub struct SampleNodes {
    pub pose: TensorId,
    pub force: TensorId,
    pub pose_imu: TensorId,
    pub force_imu: TensorId,
    pub pose_emg: TensorId,
    pub force_emg: TensorId,
    /// Attention matrices with IMU queries (layer-major, head-minor).
    pub attn_imu_query: Vec<TensorId>,
    /// Attention matrices with EMG queries.
    pub attn_emg_query: Vec<TensorId>,
}

impl SampleNodes {
    pub fn output(&self, g: &Graph) -> ModelOutput {
        ModelOutput {
            pose: g.data(self.pose).to_vec(),
            force: g.data(self.force).to_vec(),
            pose_imu: g.data(self.pose_imu).to_vec(),
            force_imu: g.data(self.force_imu).to_vec(),
            pose_emg: g.data(self.pose_emg).to_vec(),
            force_emg: g.data(self.force_emg).to_vec(),
        }
    }
}

/// Result of the fusion stage, with the raw per-direction attention products
/// exposed for inspection.
#[derive(Debug, Clone)]
pub struct CrossFused {
    /// window × d_hidden fused sequence.
    pub fused: TensorId,
    pub attn_imu_query: Vec<TensorId>,
    pub attn_emg_query: Vec<TensorId>,
    /// Raw multi-head outputs (before residual) per layer, IMU-query direction.
    pub dir_imu_query: Vec<TensorId>,
    pub dir_emg_query: Vec<TensorId>,
}

#[derive(Debug, Clone)]
pub struct PoseForceNet {
    cfg: ModelConfig,
    params: ParamSet,
    arch: Arch,
}

/// Construct a network with deterministic, seed-driven initialization.
pub fn build(cfg: ModelConfig) -> Result<PoseForceNet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ParamSet::new();
    let arch = Arch::new(&mut params, &mut rng, &cfg)?;
    let rest = rest_pose()?;
    arch.heads_fused.set_pose_bias(&mut params, &rest)?;
    arch.heads_imu.set_pose_bias(&mut params, &rest)?;
    arch.heads_emg.set_pose_bias(&mut params, &rest)?;
    log::info!("built network: {} parameters", params.total_values());
    Ok(PoseForceNet { cfg, params, arch })
}

fn rest_pose() -> Result<[f64; 63]> {
    let skeleton = HandSkeleton::for_hand_length(BIAS_HAND_LENGTH_CM)
        .map_err(|e| ModelError::Config(format!("rest-pose bias: {e}")))?;
    let points = forward_kinematics(&JointAngles::REST, &skeleton)
        .map_err(|e| ModelError::Config(format!("rest-pose bias: {e}")))?;
    Ok(flatten_pose(&points))
}

impl PoseForceNet {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Mutable access for the optimizer and checkpoint loading.
    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.total_values()
    }

    /// Bind every parameter as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Result<Bindings> {
        Ok(self.params.bind(g)?)
    }

    /// Bind every parameter without gradient tracking (inference).
    pub fn bind_inference(&self, g: &mut Graph) -> Result<Bindings> {
        Ok(self.params.bind_where(g, |_| false)?)
    }

    /// Bind with gradients only on the given components (stage-wise freezing).
    pub fn bind_trainable(&self, g: &mut Graph, trainable: &HashSet<Component>) -> Result<Bindings> {
        Ok(self.params.bind_where(g, |name| {
            Component::of_param(name).is_some_and(|c| trainable.contains(&c))
        })?)
    }

    fn expect_shape(&self, g: &Graph, what: &'static str, x: TensorId, rows: usize, cols: usize) -> Result<()> {
        let s = g.shape(x);
        if s != [rows, cols] {
            return Err(ModelError::Shape {
                what,
                expected: format!("[{rows}, {cols}]"),
                got: format!("{s:?}"),
            });
        }
        Ok(())
    }

    fn add_positional(&self, g: &mut Graph, x: TensorId) -> Result<TensorId> {
        let pe = positional_encoding(self.cfg.window, self.cfg.d_hidden)?;
        let pe = g.constant(pe, vec![self.cfg.window, self.cfg.d_hidden]);
        Ok(g.add(x, pe)?)
    }

    /// Collapse a window × d sequence to 1 × d via a constant pooling row, so
    /// both pooling modes share one code path.
    fn pool(&self, g: &mut Graph, x: TensorId) -> Result<TensorId> {
        let w = self.cfg.window;
        let mut row = vec![0.0; w];
        match self.cfg.pooling {
            Pooling::Mean => row.fill(1.0 / w as f64),
            Pooling::LastFrame => row[w - 1] = 1.0,
        }
        let sel = g.constant(row, vec![1, w]);
        Ok(g.matmul(sel, x)?)
    }

    // ── Stages ──────────────────────────────────────────────────────────

    /// IMU stem: temporal convolution → positional encoding → self-attention
    /// encoder stack. Input window × imu_dim, output window × d_hidden.
    pub fn encode_imu(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        self.expect_shape(g, "imu input", x, self.cfg.window, self.cfg.imu_dim)?;
        let mut h = self.arch.conv.apply(g, b, x)?;
        h = self.add_positional(g, h)?;
        for layer in &self.arch.imu_layers {
            h = layer.apply(g, b, h)?;
        }
        Ok(h)
    }

    /// The EMG stem's recurrent stage alone (window × d_hidden). Frame t of
    /// this output depends only on EMG frames ≤ t.
    pub fn encode_emg_lstm(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        self.expect_shape(g, "emg input", x, self.cfg.window, self.cfg.emg_dim)?;
        Ok(self.arch.lstm.apply(g, b, x)?)
    }

    /// EMG stem: LSTM stack → positional encoding → encoder stack.
    pub fn encode_emg(&self, g: &mut Graph, b: &Bindings, x: TensorId) -> Result<TensorId> {
        let mut h = self.encode_emg_lstm(g, b, x)?;
        h = self.add_positional(g, h)?;
        for layer in &self.arch.emg_layers {
            h = layer.apply(g, b, h)?;
        }
        Ok(h)
    }

    /// Bidirectional cross-attention fusion: per layer, the IMU stream
    /// queries the EMG stream and vice versa (residual + layer norm each);
    /// the final streams are concatenated per frame and projected back to
    /// d_hidden by a feed-forward with a residual from the projection.
    pub fn cross_fuse(
        &self,
        g: &mut Graph,
        b: &Bindings,
        imu_latent: TensorId,
        emg_latent: TensorId,
    ) -> Result<CrossFused> {
        self.cross_fuse_inner(g, b, imu_latent, emg_latent, true)
    }

    fn cross_fuse_inner(
        &self,
        g: &mut Graph,
        b: &Bindings,
        imu_latent: TensorId,
        emg_latent: TensorId,
        cross_attention: bool,
    ) -> Result<CrossFused> {
        let d = self.cfg.d_hidden;
        self.expect_shape(g, "imu latent", imu_latent, self.cfg.window, d)?;
        self.expect_shape(g, "emg latent", emg_latent, self.cfg.window, d)?;
        let mut hi = imu_latent;
        let mut he = emg_latent;
        let mut attn_imu_query = Vec::new();
        let mut attn_emg_query = Vec::new();
        let mut dir_imu_query = Vec::new();
        let mut dir_emg_query = Vec::new();
        if cross_attention {
            for layer in &self.arch.cross {
                let (a_out, a_w) = layer.imu_from_emg.apply_with_weights(g, b, hi, he)?;
                let (b_out, b_w) = layer.emg_from_imu.apply_with_weights(g, b, he, hi)?;
                dir_imu_query.push(a_out);
                dir_emg_query.push(b_out);
                attn_imu_query.extend(a_w);
                attn_emg_query.extend(b_w);
                let si = g.add(hi, a_out)?;
                hi = layer.ln_imu.apply(g, b, si)?;
                let se = g.add(he, b_out)?;
                he = layer.ln_emg.apply(g, b, se)?;
            }
        }
        let cat = g.concat_cols(&[hi, he])?;
        let proj = self.arch.fuse_proj.apply(g, b, cat)?;
        let h = self.arch.fuse_ff1.apply(g, b, proj)?;
        let h = g.relu(h);
        let ff = self.arch.fuse_ff2.apply(g, b, h)?;
        let sum = g.add(proj, ff)?;
        let fused = self.arch.fuse_ln.apply(g, b, sum)?;
        Ok(CrossFused {
            fused,
            attn_imu_query,
            attn_emg_query,
            dir_imu_query,
            dir_emg_query,
        })
    }

    /// Fused heads: pool the sequence, then decode pose and force.
    pub fn decode(&self, g: &mut Graph, b: &Bindings, fused: TensorId) -> Result<(TensorId, TensorId)> {
        self.expect_shape(g, "fused sequence", fused, self.cfg.window, self.cfg.d_hidden)?;
        let pooled = self.pool(g, fused)?;
        Ok(self.arch.heads_fused.apply(g, b, pooled)?)
    }

    /// The fused heads alone, on an already-pooled 1 × d_hidden vector.
    pub fn decode_pooled(&self, g: &mut Graph, b: &Bindings, pooled: TensorId) -> Result<(TensorId, TensorId)> {
        self.expect_shape(g, "pooled vector", pooled, 1, self.cfg.d_hidden)?;
        Ok(self.arch.heads_fused.apply(g, b, pooled)?)
    }

    /// Full forward pass over one window already staged as graph constants.
    pub fn forward_nodes(
        &self,
        g: &mut Graph,
        b: &Bindings,
        imu: TensorId,
        emg: TensorId,
        variant: AblationVariant,
    ) -> Result<SampleNodes> {
        let imu = if variant == AblationVariant::NoImu {
            g.constant(vec![0.0; self.cfg.window * self.cfg.imu_dim], vec![self.cfg.window, self.cfg.imu_dim])
        } else {
            imu
        };
        let emg = if variant == AblationVariant::NoEmg {
            g.constant(vec![0.0; self.cfg.window * self.cfg.emg_dim], vec![self.cfg.window, self.cfg.emg_dim])
        } else {
            emg
        };
        let imu_latent = self.encode_imu(g, b, imu)?;
        let emg_latent = self.encode_emg(g, b, emg)?;
        let crossed = self.cross_fuse_inner(
            g,
            b,
            imu_latent,
            emg_latent,
            variant != AblationVariant::NoCrossAttention,
        )?;
        let (pose, force) = self.decode(g, b, crossed.fused)?;
        let pooled_imu = self.pool(g, imu_latent)?;
        let (pose_imu, force_imu) = self.arch.heads_imu.apply(g, b, pooled_imu)?;
        let pooled_emg = self.pool(g, emg_latent)?;
        let (pose_emg, force_emg) = self.arch.heads_emg.apply(g, b, pooled_emg)?;
        Ok(SampleNodes {
            pose,
            force,
            pose_imu,
            force_imu,
            pose_emg,
            force_emg,
            attn_imu_query: crossed.attn_imu_query,
            attn_emg_query: crossed.attn_emg_query,
        })
    }

    /// Stage a preprocessed window as constants and run the forward pass.
    pub fn forward_window(
        &self,
        g: &mut Graph,
        b: &Bindings,
        sample: &WindowedSample,
        variant: AblationVariant,
    ) -> Result<SampleNodes> {
        let (w, di, de) = (self.cfg.window, self.cfg.imu_dim, self.cfg.emg_dim);
        if sample.imu.len() != w * di {
            return Err(ModelError::Shape {
                what: "window imu features",
                expected: format!("{} values", w * di),
                got: format!("{} values", sample.imu.len()),
            });
        }
        if sample.emg.len() != w * de {
            return Err(ModelError::Shape {
                what: "window emg features",
                expected: format!("{} values", w * de),
                got: format!("{} values", sample.emg.len()),
            });
        }
        let imu = g.constant(sample.imu.clone(), vec![w, di]);
        let emg = g.constant(sample.emg.clone(), vec![w, de]);
        self.forward_nodes(g, b, imu, emg, variant)
    }

    /// One-shot inference on a single window (no gradient bookkeeping).
    pub fn predict(&self, sample: &WindowedSample, variant: AblationVariant) -> Result<ModelOutput> {
        let mut g = Graph::new();
        let b = self.bind_inference(&mut g)?;
        let nodes = self.forward_window(&mut g, &b, sample, variant)?;
        Ok(nodes.output(&g))
    }

    /// Inference over many windows. Each window gets its own graph, so peak
    /// memory stays flat and outputs are identical to per-sample calls.
    pub fn predict_batch(&self, samples: &[WindowedSample], variant: AblationVariant) -> Result<Vec<ModelOutput>> {
        samples.iter().map(|s| self.predict(s, variant)).collect()
    }
}
