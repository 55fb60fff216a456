//! Losses, the RAdam optimizer, cross-validation, and the training loop.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, EdgePolicy, FrameSequence, PositionalMode, SegmentGraph};
use crate::matrix::Matrix;
use crate::model::{
    adjacency_on_tape, forward_on_tape, AdjacencyConfig, AdjacencyVariant, ModelParams, ParamVars,
};
use crate::similarity::{dice_matrix, SimilarityMatrix};
use crate::tape::{Tape, Var};

/// Every training hyperparameter: the published protocol values plus the
/// knobs the protocol leaves open.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Cap on minibatch steps per epoch.
    pub iters_per_epoch: usize,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub early_stop_patience: usize,
    pub folds: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi: f64,
    pub seed: u64,
    pub variant: AdjacencyVariant,
    /// Width q of the node representations.
    pub hidden_dim: usize,
    /// Flip the sign of the linear structure-loss term (experimental; the
    /// printed form penalizes alignment between the Dice matrix and the
    /// learned adjacency).
    pub flip_structure_sign: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch_size: 64,
            max_epochs: 1000,
            iters_per_epoch: 150,
            decay_factor: 0.5,
            decay_every: 150,
            early_stop_patience: 20,
            folds: 10,
            lambda1: 0.1,
            lambda2: 0.1,
            phi: 0.6,
            seed: 0,
            variant: AdjacencyVariant::Full,
            hidden_dim: 32,
            flip_structure_sign: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidInput("lr must be > 0".into()));
        }
        if self.decay_factor.is_nan() || self.decay_factor <= 0.0 || self.decay_factor > 1.0 {
            return Err(Error::InvalidInput("decay_factor must be in (0, 1]".into()));
        }
        if self.decay_every == 0 {
            return Err(Error::InvalidInput("decay_every must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("folds must be >= 2".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.iters_per_epoch == 0 {
            return Err(Error::InvalidInput(
                "batch_size, max_epochs, and iters_per_epoch must be >= 1".into(),
            ));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidInput("hidden_dim must be >= 1".into()));
        }
        if !self.lambda1.is_finite() || !self.lambda2.is_finite() || self.phi.is_nan() || self.phi < 0.0 {
            return Err(Error::InvalidInput("lambda1/lambda2/phi must be finite, phi >= 0".into()));
        }
        Ok(())
    }

    pub fn adjacency(&self, positional_mode: PositionalMode) -> AdjacencyConfig {
        AdjacencyConfig {
            phi: self.phi,
            variant: self.variant,
            positional_mode,
        }
    }
}

/// How samples become graphs before training.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBuildConfig {
    pub window: usize,
    pub hop: usize,
    pub policy: EdgePolicy,
    pub positional_mode: PositionalMode,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig {
            window: 40,
            hop: 40,
            policy: EdgePolicy::default(),
            positional_mode: PositionalMode::Squared,
        }
    }
}

/// The classification term: mean cross-entropy over the batch.
pub fn classification_loss(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    crate::matrix::softmax_cross_entropy(logits, labels)
}

/// The structure term, as printed:
/// `l1 * e^T (Dice o A_learn) e + l2 * ||Dice||_F^2`.
///
/// The Frobenius part depends only on the fixed topology, so it is constant
/// with respect to every learnable tensor; it is still computed and reported
/// for transparency.
pub fn structure_loss(
    dice: &SimilarityMatrix,
    a_learn: &Matrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if dice.values().shape() != a_learn.shape() {
        return Err(Error::ShapeMismatch {
            op: "structure_loss",
            lhs: dice.values().shape(),
            rhs: a_learn.shape(),
        });
    }
    let linear = dice.values().hadamard(a_learn)?.sum();
    Ok(lambda1 * linear + lambda2 * dice.values().frob_sq())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub gc: f64,
    pub gl: f64,
    pub total: f64,
}

pub fn total_loss(gc: f64, gl: f64) -> Result<LossBreakdown> {
    if !gc.is_finite() || !gl.is_finite() {
        return Err(Error::NonFinite { op: "total_loss" });
    }
    Ok(LossBreakdown {
        gc,
        gl,
        total: gc + gl,
    })
}

/// Structure loss recorded on a tape; the linear term is differentiable in
/// `a_learn` and its gradient is exactly `lambda1 * Dice` elementwise.
pub fn structure_loss_on_tape(
    tape: &mut Tape,
    dice: &SimilarityMatrix,
    a_learn: Var,
    lambda1: f64,
    lambda2: f64,
) -> Result<Var> {
    if dice.values().shape() != tape.value(a_learn).shape() {
        return Err(Error::ShapeMismatch {
            op: "structure_loss",
            lhs: dice.values().shape(),
            rhs: tape.value(a_learn).shape(),
        });
    }
    let dice_var = tape.constant(dice.values().clone());
    let prod = tape.hadamard(dice_var, a_learn)?;
    let summed = tape.sum(prod);
    let linear = tape.scale(summed, lambda1);
    let frob = Matrix::from_fn(1, 1, |_, _| lambda2 * dice.values().frob_sq());
    let frob_var = tape.constant(frob);
    tape.add(linear, frob_var)
}

/// Rectified Adam. Until the variance estimate is tractable (rho_t <= 4)
/// the update is plain bias-corrected momentum; afterwards the adaptive step
/// is scaled by the rectification term.
#[derive(Debug, Clone)]
pub struct RAdam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    slots: Vec<(Matrix, Matrix)>,
}

impl RAdam {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        RAdam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            slots: shapes
                .iter()
                .map(|&(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
                .collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over all parameter tensors. A `None` gradient is treated
    /// as zero (the tensor was off every differentiable path this step).
    pub fn step(
        &mut self,
        params: &mut [&mut Matrix],
        grads: &[Option<&Matrix>],
        lr: f64,
    ) -> Result<()> {
        if params.len() != self.slots.len() || grads.len() != self.slots.len() {
            return Err(Error::InvalidInput(
                "optimizer slot count does not match parameter count".into(),
            ));
        }
        self.t += 1;
        let t = self.t as f64;
        let rho_inf = 2.0 / (1.0 - self.beta2) - 1.0;
        let beta1_t = libm::pow(self.beta1, t);
        let beta2_t = libm::pow(self.beta2, t);
        let rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
        let rect = if rho_t > 4.0 {
            Some(libm::sqrt(
                ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                    / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t),
            ))
        } else {
            None
        };

        for (slot_idx, param) in params.iter_mut().enumerate() {
            let grad = grads[slot_idx];
            if let Some(g) = grad {
                if g.shape() != param.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "radam_step",
                        lhs: param.shape(),
                        rhs: g.shape(),
                    });
                }
            }
            let (m, v) = &mut self.slots[slot_idx];
            for i in 0..param.rows() {
                for j in 0..param.cols() {
                    let g = grad.map_or(0.0, |g| g.get(i, j));
                    let mi = self.beta1 * m.get(i, j) + (1.0 - self.beta1) * g;
                    let vi = self.beta2 * v.get(i, j) + (1.0 - self.beta2) * g * g;
                    m.set(i, j, mi);
                    v.set(i, j, vi);
                    let m_hat = mi / (1.0 - beta1_t);
                    let delta = match rect {
                        Some(r) => {
                            let l = libm::sqrt(1.0 - beta2_t) / (libm::sqrt(vi) + self.eps);
                            lr * r * l * m_hat
                        }
                        None => lr * m_hat,
                    };
                    param.set(i, j, param.get(i, j) - delta);
                }
            }
        }
        Ok(())
    }
}

/// Step-decayed learning rate: `base * factor^floor(epoch / every)`.
pub fn lr_schedule(base_lr: f64, decay_factor: f64, decay_every: usize, epoch: usize) -> f64 {
    base_lr * libm::pow(decay_factor, (epoch / decay_every) as f64)
}

/// One cross-validation split: index lists into the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Stratified k-fold partition, deterministic per seed. Falls back to an
/// unstratified split (with a warning) when some class has fewer samples
/// than folds.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput("folds must be >= 2".into()));
    }
    if labels.len() < k {
        return Err(Error::InvalidInput(alloc::format!(
            "cannot split {} samples into {k} folds",
            labels.len()
        )));
    }
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes];
    for (idx, &label) in labels.iter().enumerate() {
        by_class[label].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6b666f6c64)); // "kfold"
    let stratified = by_class.iter().all(|c| c.is_empty() || c.len() >= k);

    let mut buckets: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    if stratified {
        // One cursor across classes so per-class remainders land in
        // different folds and fold sizes stay within one of each other.
        let mut cursor = 0usize;
        for class_indices in &mut by_class {
            class_indices.shuffle(&mut rng);
            for &idx in class_indices.iter() {
                buckets[cursor % k].push(idx);
                cursor += 1;
            }
        }
    } else {
        log::warn!(
            "a class has fewer than {k} samples; falling back to an unstratified split"
        );
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        for (pos, &idx) in all.iter().enumerate() {
            buckets[pos % k].push(idx);
        }
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut val = buckets[f].clone();
        val.sort_unstable();
        let mut train: Vec<usize> = buckets
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != f)
            .flat_map(|(_, b)| b.iter().copied())
            .collect();
        train.sort_unstable();
        folds.push(Fold { train, val });
    }
    Ok(folds)
}

/// FNV-1a over the fold index lists; equal checksums mean identical splits.
pub fn fold_checksum(folds: &[Fold]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |x: u64| {
        h ^= x;
        h = h.wrapping_mul(0x100000001b3);
    };
    for fold in folds {
        mix(u64::MAX);
        for &i in &fold.val {
            mix(i as u64);
        }
    }
    h
}

/// Classification quality measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[true_class][predicted_class]` counts.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<Metrics> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::InvalidInput(
            "evaluate needs equal-length, non-empty prediction and label lists".into(),
        ));
    }
    let mut confusion = alloc::vec![alloc::vec![0usize; num_classes]; num_classes];
    for (&pred, &label) in predictions.iter().zip(labels) {
        if label >= num_classes {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        if pred >= num_classes {
            return Err(Error::LabelOutOfRange { label: pred, classes: num_classes });
        }
        confusion[label][pred] += 1;
    }
    let total = predictions.len();
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let mut per_class_f1 = Vec::with_capacity(num_classes);
    let mut weighted_f1 = 0.0;
    for (c, row) in confusion.iter().enumerate() {
        let support: usize = row.iter().sum();
        let predicted: usize = (0..num_classes).map(|r| confusion[r][c]).sum();
        let tp = row[c];
        let f1 = if tp == 0 {
            0.0
        } else {
            let precision = tp as f64 / predicted as f64;
            let recall = tp as f64 / support as f64;
            2.0 * precision * recall / (precision + recall)
        };
        per_class_f1.push(f1);
        weighted_f1 += support as f64 / total as f64 * f1;
    }
    Ok(Metrics {
        accuracy: correct as f64 / total as f64,
        weighted_f1,
        per_class_f1,
        confusion,
    })
}

/// Samples turned into graphs once, shared by every fold and variant.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub graphs: Vec<DynamicGraph>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub dice: SimilarityMatrix,
    template: SegmentGraph,
    positional_mode: PositionalMode,
}

impl PreparedDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.template.node_count()
    }

    pub fn dim(&self) -> usize {
        self.graphs[0].dim()
    }

    pub fn template(&self) -> &SegmentGraph {
        &self.template
    }
}

/// Builds every sample's dynamic graph and the run-level Dice matrix.
pub fn prepare(samples: &[FrameSequence], gcfg: &GraphBuildConfig) -> Result<PreparedDataset> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let dim = samples[0].dim();
    for s in samples {
        if s.dim() != dim {
            return Err(Error::ShapeMismatch {
                op: "prepare",
                lhs: (s.frames(), dim),
                rhs: (s.frames(), s.dim()),
            });
        }
    }
    let graphs: Vec<DynamicGraph> = samples
        .iter()
        .map(|s| DynamicGraph::build(s, gcfg.window, gcfg.hop, &gcfg.policy))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label()).collect();
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let template = graphs[0].segments()[0].clone();
    let dice = dice_matrix(&template);
    Ok(PreparedDataset {
        graphs,
        labels,
        num_classes,
        dice,
        template,
        positional_mode: gcfg.positional_mode,
    })
}

/// Owns the parameters and optimizer state for one fold.
pub struct Trainer<'a> {
    data: &'a PreparedDataset,
    pub params: ModelParams,
    optimizer: RAdam,
    adjacency: AdjacencyConfig,
    lambda1: f64,
    lambda2: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a PreparedDataset, cfg: &TrainConfig, init_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(
            data.nodes(),
            data.dim(),
            cfg.hidden_dim,
            data.num_classes,
            &data.dice,
            init_seed,
        )?;
        let shapes = [
            params.w0.shape(),
            params.a_learn.shape(),
            params.head_w.shape(),
            params.head_b.shape(),
        ];
        let lambda1 = if cfg.flip_structure_sign {
            -cfg.lambda1
        } else {
            cfg.lambda1
        };
        Ok(Trainer {
            data,
            params,
            optimizer: RAdam::new(&shapes),
            adjacency: cfg.adjacency(data.positional_mode),
            lambda1,
            lambda2: cfg.lambda2,
        })
    }

    /// One minibatch step of the joint objective.
    pub fn step(&mut self, batch: &[usize], lr: f64) -> Result<LossBreakdown> {
        self.step_inner(batch, lr, true)
    }

    /// One minibatch step of the classification loss alone. Used to verify
    /// that zeroed structure weights reproduce pure cross-entropy training.
    pub fn step_ce_only(&mut self, batch: &[usize], lr: f64) -> Result<LossBreakdown> {
        self.step_inner(batch, lr, false)
    }

    fn step_inner(&mut self, batch: &[usize], lr: f64, with_structure: bool) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty minibatch".into()));
        }
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &self.params);
        let a_hat = adjacency_on_tape(
            &mut tape,
            &vars,
            &self.data.template,
            &self.data.dice,
            &self.adjacency,
        )?;
        let mut logit_vars = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for &idx in batch {
            let sample = forward_on_tape(&mut tape, &vars, a_hat, &self.data.graphs[idx])?;
            logit_vars.push(sample.logits);
            labels.push(self.data.labels[idx]);
        }
        let batch_logits = tape.stack_rows(&logit_vars)?;
        let ce = tape.softmax_cross_entropy(batch_logits, &labels)?;
        let (root, gl_value) = if with_structure {
            let gl = structure_loss_on_tape(
                &mut tape,
                &self.data.dice,
                vars.a_learn,
                self.lambda1,
                self.lambda2,
            )?;
            let total = tape.add(ce, gl)?;
            (total, tape.value(gl).get(0, 0))
        } else {
            (ce, 0.0)
        };
        let breakdown = total_loss(tape.value(ce).get(0, 0), gl_value)?;

        let grads = tape.backward(root)?;
        let grad_refs = [
            grads.get(vars.w0),
            grads.get(vars.a_learn),
            grads.get(vars.head_w),
            grads.get(vars.head_b),
        ];
        self.optimizer.step(
            &mut [
                &mut self.params.w0,
                &mut self.params.a_learn,
                &mut self.params.head_w,
                &mut self.params.head_b,
            ],
            &grad_refs,
            lr,
        )?;
        self.params.project();
        if !self.params.w0.all_finite()
            || !self.params.a_learn.all_finite()
            || !self.params.head_w.all_finite()
            || !self.params.head_b.all_finite()
        {
            return Err(Error::NonFinite { op: "radam_step" });
        }
        Ok(breakdown)
    }

    /// Argmax predictions for the given sample indices, sharing one tape.
    pub fn predictions_on(&self, indices: &[usize]) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &self.params);
        let a_hat = adjacency_on_tape(
            &mut tape,
            &vars,
            &self.data.template,
            &self.data.dice,
            &self.adjacency,
        )?;
        let mut out = Vec::with_capacity(indices.len());
        for &idx in indices {
            let sample = forward_on_tape(&mut tape, &vars, a_hat, &self.data.graphs[idx])?;
            out.push(tape.value(sample.logits).argmax_row(0));
        }
        Ok(out)
    }

    pub fn accuracy_on(&self, indices: &[usize]) -> Result<f64> {
        let preds = self.predictions_on(indices)?;
        let correct = preds
            .iter()
            .zip(indices)
            .filter(|&(&p, &i)| p == self.data.labels[i])
            .count();
        Ok(correct as f64 / indices.len() as f64)
    }
}

/// Loss-curve sample for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct FoldReport {
    pub fold: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub metrics: Metrics,
    pub curve: Vec<EpochPoint>,
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub mean_weighted_f1: f64,
    pub fold_checksum: u64,
}

impl TrainReport {
    /// Assembles fold reports (in fold order) into the averaged report.
    pub fn from_folds(folds: Vec<FoldReport>, checksum: u64) -> TrainReport {
        let n = folds.len() as f64;
        let mean_accuracy = folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / n;
        let mean_weighted_f1 = folds.iter().map(|f| f.metrics.weighted_f1).sum::<f64>() / n;
        TrainReport {
            folds,
            mean_accuracy,
            mean_weighted_f1,
            fold_checksum: checksum,
        }
    }

    /// Fold whose best validation accuracy is highest (first on ties).
    pub fn best_fold(&self) -> &FoldReport {
        self.folds
            .iter()
            .max_by(|a, b| {
                a.metrics
                    .accuracy
                    .partial_cmp(&b.metrics.accuracy)
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(b.fold.cmp(&a.fold))
            })
            .expect("at least one fold")
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mixes a stream tag into a base seed; every consumer of randomness gets
/// its own derived stream so fold order and parallelism cannot change
/// results.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Trains one fold to its early-stopping point and reports metrics from the
/// best validation epoch.
pub fn train_fold(
    data: &PreparedDataset,
    folds: &[Fold],
    fold_idx: usize,
    cfg: &TrainConfig,
) -> Result<FoldReport> {
    let fold = &folds[fold_idx];
    let mut trainer = Trainer::new(data, cfg, derive_seed(cfg.seed, 0x696e6974 + fold_idx as u64))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x73687566 + fold_idx as u64));

    let mut best_accuracy = f64::NEG_INFINITY;
    let mut best_params = trainer.params.clone();
    let mut best_epoch = 0;
    let mut epochs_without_improvement = 0;
    let mut curve = Vec::new();
    let mut epochs_run = 0;

    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let lr = lr_schedule(cfg.lr, cfg.decay_factor, cfg.decay_every, epoch);
        let mut order = fold.train.clone();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size).take(cfg.iters_per_epoch) {
            let breakdown = trainer.step(chunk, lr).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged {
                    fold: fold_idx,
                    epoch,
                    detail: "non-finite loss or parameters".to_string(),
                },
                other => other,
            })?;
            loss_sum += breakdown.total;
            steps += 1;
        }
        let val_accuracy = trainer.accuracy_on(&fold.val)?;
        curve.push(EpochPoint {
            epoch,
            train_loss: loss_sum / steps as f64,
            val_accuracy,
        });

        if val_accuracy > best_accuracy {
            best_accuracy = val_accuracy;
            best_params = trainer.params.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.early_stop_patience {
                break;
            }
        }
    }

    trainer.params = best_params.clone();
    let predictions = trainer.predictions_on(&fold.val)?;
    let labels: Vec<usize> = fold.val.iter().map(|&i| data.labels[i]).collect();
    let metrics = evaluate(&predictions, &labels, data.num_classes)?;
    log::info!(
        "fold {fold_idx}: best epoch {best_epoch}, val accuracy {:.4}",
        metrics.accuracy
    );
    Ok(FoldReport {
        fold: fold_idx,
        best_epoch,
        epochs_run,
        metrics,
        curve,
        params: best_params,
    })
}

/// Cross-validated training over an already prepared dataset.
pub fn train_prepared(
    data: &PreparedDataset,
    folds: &[Fold],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let reports = (0..folds.len())
        .map(|f| train_fold(data, folds, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainReport::from_folds(reports, fold_checksum(folds)))
}

/// End-to-end training: graph construction, stratified folds, per-fold
/// optimization with early stopping, fold-averaged metrics.
pub fn train(
    samples: &[FrameSequence],
    gcfg: &GraphBuildConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let data = prepare(samples, gcfg)?;
    let folds = kfold_split(&data.labels, cfg.folds, cfg.seed)?;
    train_prepared(&data, &folds, cfg)
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: AdjacencyVariant,
    pub report: TrainReport,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Trains every adjacency variant against the same folds and seed.
pub fn run_ablation(
    samples: &[FrameSequence],
    gcfg: &GraphBuildConfig,
    cfg: &TrainConfig,
) -> Result<AblationReport> {
    cfg.validate()?;
    let data = prepare(samples, gcfg)?;
    let folds = kfold_split(&data.labels, cfg.folds, cfg.seed)?;
    let mut rows = Vec::with_capacity(AdjacencyVariant::ALL.len());
    for variant in AdjacencyVariant::ALL {
        let variant_cfg = TrainConfig { variant, ..cfg.clone() };
        let report = train_prepared(&data, &folds, &variant_cfg)?;
        log::info!(
            "ablation {variant}: mean accuracy {:.4}, fold checksum {:016x}",
            report.mean_accuracy,
            report.fold_checksum
        );
        rows.push(AblationRow { variant, report });
    }
    Ok(AblationReport { rows })
}
