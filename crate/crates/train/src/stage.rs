//! Staged mini-batch training with patience-based learning-rate decay,
//! early stopping, and best-validation weight retention.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use model::{
    loss_nodes, AblationVariant, Component, LossBreakdown, LossOptions, LossWeights, PoseForceNet,
};
use pipeline::{DatasetSplit, NormalizationSpec, WindowedSample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensorgrad::Graph;

use crate::optim::{adam_step, clip_global_norm, AdamState, GradMap, GRAD_CLIP_NORM};
use crate::{save_checkpoint, Result, TrainError};

/// Windows per forward/backward graph. Batches accumulate gradients over
/// microbatches so a 256-window step never materializes 256 graphs at once.
pub const MICROBATCH: usize = 8;

/// Windows per evaluation graph during validation.
const VAL_CHUNK: usize = 32;

/// Components eligible for the fine-tuning stage.
const FINETUNABLE: [Component; 4] = [
    Component::ImuEncoder,
    Component::EmgEncoder,
    Component::Fusion,
    Component::PoseDecoder,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_main: f64,
    pub lr_finetune: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before the learning rate decays.
    pub patience_lr: usize,
    pub lr_factor: f64,
    pub early_stop_patience: usize,
    pub loss_weights: LossWeights,
    pub loss_options: LossOptions,
    pub seed: u64,
    /// Components trained in the second (fine-tuning) stage of the recipe.
    pub finetune_components: Vec<Component>,
    /// Input variant to train under (zeroed modalities for ablations).
    pub variant: AblationVariant,
    /// Force bounds embedded in the checkpoint for exact denormalization.
    pub normalization: NormalizationSpec,
    /// Where the best-validation model is written, if anywhere.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            lr_main: 0.001,
            lr_finetune: 0.0001,
            max_epochs: 100,
            patience_lr: 5,
            lr_factor: 0.5,
            early_stop_patience: 10,
            loss_weights: LossWeights::default(),
            loss_options: LossOptions::default(),
            seed: 42,
            finetune_components: vec![Component::PoseDecoder, Component::EmgEncoder],
            variant: AblationVariant::Full,
            normalization: NormalizationSpec::sensor_range(),
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be >= 1".into()));
        }
        if self.patience_lr == 0 || self.early_stop_patience == 0 {
            return Err(TrainError::Config("patience values must be >= 1".into()));
        }
        for (what, v) in [("lr_main", self.lr_main), ("lr_finetune", self.lr_finetune)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(TrainError::Config(format!("{what} must be finite and > 0, got {v}")));
            }
        }
        if self.lr_finetune >= self.lr_main {
            return Err(TrainError::Config(format!(
                "lr_finetune {} must be below lr_main {}",
                self.lr_finetune, self.lr_main
            )));
        }
        if !(0.0..1.0).contains(&self.lr_factor) || self.lr_factor == 0.0 {
            return Err(TrainError::Config(format!(
                "lr_factor must be in (0, 1), got {}",
                self.lr_factor
            )));
        }
        self.loss_weights.validate().map_err(TrainError::Model)?;
        self.loss_options.validate().map_err(TrainError::Model)?;
        self.normalization
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        let mut seen = HashSet::new();
        for c in &self.finetune_components {
            if !FINETUNABLE.contains(c) {
                return Err(TrainError::Config(format!(
                    "{c} cannot be fine-tuned; eligible components: imu_encoder, emg_encoder, fusion, pose_decoder"
                )));
            }
            if !seen.insert(*c) {
                return Err(TrainError::Config(format!("{c} listed twice in finetune_components")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation: LossBreakdown,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose validation loss was lowest; the model holds its weights.
    pub best_epoch: usize,
    pub checkpoint_path: Option<PathBuf>,
}

impl TrainReport {
    pub fn best_validation_total(&self) -> f64 {
        self.epochs[self.best_epoch].validation.total
    }
}

/// Partition window indices into (train, validation) by whole trials, so
/// overlapping windows of one trial never straddle the boundary. Validation
/// takes ~10% of trials, at least one. A single-trial dataset cannot be
/// partitioned; both sides then see everything and validation only monitors
/// training.
pub fn carve_validation(windows: &[WindowedSample], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut trials: Vec<u32> = windows.iter().map(|w| w.trial_id).collect();
    trials.sort_unstable();
    trials.dedup();
    if trials.len() < 2 {
        log::warn!("only {} trial(s): validation will mirror the training set", trials.len());
        let all: Vec<usize> = (0..windows.len()).collect();
        return (all.clone(), all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    trials.shuffle(&mut rng);
    let n_val = (trials.len() / 10).max(1);
    let val_trials: HashSet<u32> = trials[..n_val].iter().copied().collect();
    let (mut train_idx, mut val_idx) = (Vec::new(), Vec::new());
    for (i, w) in windows.iter().enumerate() {
        if val_trials.contains(&w.trial_id) {
            val_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }
    (train_idx, val_idx)
}

/// Average loss of `net` over `samples`, evaluated in deterministic chunks
/// with the same graph construction training uses.
pub fn validation_loss(
    net: &PoseForceNet,
    samples: &[&WindowedSample],
    w: &LossWeights,
    opts: &LossOptions,
    variant: AblationVariant,
) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(TrainError::Config("cannot evaluate loss on zero windows".into()));
    }
    let mut acc = PartAccumulator::new();
    for chunk in samples.chunks(VAL_CHUNK) {
        let mut g = Graph::new();
        let b = net.bind_inference(&mut g)?;
        let nodes: Vec<_> = chunk
            .iter()
            .map(|s| net.forward_window(&mut g, &b, s, variant))
            .collect::<std::result::Result<_, _>>()?;
        let owned: Vec<WindowedSample> = chunk.iter().map(|&s| s.clone()).collect();
        let loss = loss_nodes(&mut g, &nodes, &owned, w, opts)?;
        acc.add(&loss.breakdown(&g), chunk.len());
    }
    Ok(acc.mean())
}

/// Run one optimization stage: mini-batch Adam over the trainable components
/// with gradient clipping, per-epoch validation, patience-based learning-rate
/// decay, early stopping, and retention of the best-validation weights.
pub fn train_stage(
    net: &mut PoseForceNet,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    trainable: &HashSet<Component>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    if trainable.is_empty() {
        return Err(TrainError::Config("no components marked trainable".into()));
    }

    let (train_idx, val_idx) = carve_validation(&split.train, cfg.seed);
    let val_windows: Vec<&WindowedSample> = val_idx.iter().map(|&i| &split.train[i]).collect();
    let full_set = Component::ALL.iter().all(|c| trainable.contains(c));
    let mut lr = if full_set { cfg.lr_main } else { cfg.lr_finetune };
    let trainable_names: Vec<String> = net
        .params()
        .names()
        .filter(|n| Component::of_param(n).is_some_and(|c| trainable.contains(&c)))
        .map(str::to_owned)
        .collect();
    log::info!(
        "stage: {} train / {} validation windows, {} trainable parameter tensors, lr {lr}",
        train_idx.len(),
        val_windows.len(),
        trainable_names.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4531);
    let mut state = AdamState::new();
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Vec<(String, Vec<f64>)>> = None;
    let mut since_improve_lr = 0usize;
    let mut since_improve_stop = 0usize;

    for epoch in 0..cfg.max_epochs {
        let t0 = Instant::now();
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);

        let mut train_acc = PartAccumulator::new();
        for batch in order.chunks(cfg.batch_size) {
            // Time-order the batch so consecutive same-trial windows are
            // adjacent and the smoothness term sees real neighbours.
            let mut batch: Vec<usize> = batch.to_vec();
            batch.sort_unstable_by(|&a, &b| {
                let (wa, wb) = (&split.train[a], &split.train[b]);
                wa.trial_id
                    .cmp(&wb.trial_id)
                    .then(wa.t_end_ms.total_cmp(&wb.t_end_ms))
            });

            let mut grads = GradMap::new();
            for micro in batch.chunks(MICROBATCH) {
                let samples: Vec<WindowedSample> =
                    micro.iter().map(|&i| split.train[i].clone()).collect();
                let mut g = Graph::new();
                let b = net.bind_trainable(&mut g, trainable)?;
                let nodes: Vec<_> = samples
                    .iter()
                    .map(|s| net.forward_window(&mut g, &b, s, cfg.variant))
                    .collect::<std::result::Result<_, _>>()?;
                let loss = loss_nodes(&mut g, &nodes, &samples, &cfg.loss_weights, &cfg.loss_options)?;
                train_acc.add(&loss.breakdown(&g), micro.len());
                g.backward(loss.total)?;
                // The batch loss is the sample-count-weighted mean of the
                // microbatch losses; scale gradients accordingly.
                let scale = micro.len() as f64 / batch.len() as f64;
                for name in &trainable_names {
                    if let Some(gr) = g.grad(b.id(name)) {
                        let slot = grads.entry(name.clone()).or_insert_with(|| vec![0.0; gr.len()]);
                        for (s, &v) in slot.iter_mut().zip(gr) {
                            *s += scale * v;
                        }
                    }
                }
            }
            clip_global_norm(&mut grads, GRAD_CLIP_NORM);
            adam_step(net.params_mut(), &grads, &mut state, lr)?;
        }

        let train = train_acc.mean();
        let validation = validation_loss(net, &val_windows, &cfg.loss_weights, &cfg.loss_options, cfg.variant)?;
        let seconds = t0.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}: train {:.6} val {:.6} (fused {:.6} imu {:.6} emg {:.6} angle {:.6}) lr {lr:.2e} {seconds:.1}s",
            train.total,
            validation.total,
            validation.fused,
            validation.imu,
            validation.emg,
            validation.angle,
        );
        epochs.push(EpochRecord {
            epoch,
            train,
            validation,
            lr,
            seconds,
        });

        if validation.total < best_val {
            best_val = validation.total;
            best_epoch = epoch;
            best_params = Some(
                net.params()
                    .entries()
                    .iter()
                    .map(|e| (e.name.clone(), e.data.to_vec()))
                    .collect(),
            );
            since_improve_lr = 0;
            since_improve_stop = 0;
        } else {
            since_improve_lr += 1;
            since_improve_stop += 1;
            if since_improve_lr >= cfg.patience_lr {
                lr *= cfg.lr_factor;
                since_improve_lr = 0;
                log::info!("no improvement for {} epochs: lr decayed to {lr:.2e}", cfg.patience_lr);
            }
            if since_improve_stop >= cfg.early_stop_patience {
                log::info!("early stop after epoch {epoch} (best epoch {best_epoch})");
                break;
            }
        }
    }

    if let Some(snapshot) = best_params {
        for (name, data) in snapshot {
            net.params_mut().set_data(&name, data).map_err(TrainError::from)?;
        }
    }
    let mut report = TrainReport {
        epochs,
        best_epoch,
        checkpoint_path: None,
    };
    if let Some(path) = &cfg.checkpoint_path {
        save_checkpoint(net, &cfg.normalization, path)?;
        report.checkpoint_path = Some(path.clone());
    }
    Ok(report)
}

/// The two-stage schedule: end-to-end at the main rate, then fine-tuning of
/// the configured components at the reduced rate. The checkpoint, if any, is
/// written once by the final stage.
pub fn train_recipe(net: &mut PoseForceNet, split: &DatasetSplit, cfg: &TrainConfig) -> Result<Vec<TrainReport>> {
    cfg.validate()?;
    let two_stages = !cfg.finetune_components.is_empty();
    let mut stage1 = cfg.clone();
    if two_stages {
        stage1.checkpoint_path = None;
    }
    let all: HashSet<Component> = Component::ALL.into_iter().collect();
    let mut reports = vec![train_stage(net, split, &stage1, &all)?];
    if two_stages {
        let subset: HashSet<Component> = cfg.finetune_components.iter().copied().collect();
        reports.push(train_stage(net, split, cfg, &subset)?);
    }
    Ok(reports)
}

/// Sample-count-weighted running mean of loss parts.
struct PartAccumulator {
    n: usize,
    total: f64,
    fused: f64,
    imu: f64,
    emg: f64,
    angle: f64,
    smooth: Option<f64>,
    saturation: Option<f64>,
}

impl PartAccumulator {
    fn new() -> Self {
        PartAccumulator {
            n: 0,
            total: 0.0,
            fused: 0.0,
            imu: 0.0,
            emg: 0.0,
            angle: 0.0,
            smooth: None,
            saturation: None,
        }
    }

    fn add(&mut self, b: &LossBreakdown, count: usize) {
        let w = count as f64;
        self.n += count;
        self.total += w * b.total;
        self.fused += w * b.fused;
        self.imu += w * b.imu;
        self.emg += w * b.emg;
        self.angle += w * b.angle;
        if let Some(s) = b.smooth {
            *self.smooth.get_or_insert(0.0) += w * s;
        }
        if let Some(s) = b.saturation {
            *self.saturation.get_or_insert(0.0) += w * s;
        }
    }

    fn mean(&self) -> LossBreakdown {
        let n = self.n.max(1) as f64;
        LossBreakdown {
            total: self.total / n,
            fused: self.fused / n,
            imu: self.imu / n,
            emg: self.emg / n,
            angle: self.angle / n,
            smooth: self.smooth.map(|s| s / n),
            saturation: self.saturation.map(|s| s / n),
        }
    }
}
