//! The learnable graph convolution network.
//!
//! Each segment graph is convolved with a segment-specific weight matrix;
//! the weight is carried across segments by a recurrence, so later segments
//! see state accumulated from earlier ones. The adjacency fed to the
//! convolution is composed from a positional term, the degree-aware Dice
//! matrix, an optional learnable matrix, and self-loops, then symmetrically
//! normalized.
//!
//! The printed form of the weight recurrence adds an m x p matrix to a
//! p x q one, which does not typecheck. This implementation uses the minimal
//! dimension-consistent repair built from the same symbols:
//! `W' = relu(W + X^T Ahat X W / m)`, with `1/m` scaling for stability.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{
    binary_adjacency, positional_adjacency, sym_normalize, weighted_distance_adjacency,
    DynamicGraph, PositionalMode, SegmentGraph,
};
use crate::matrix::Matrix;
use crate::similarity::{SimilarityKind, SimilarityMatrix};
use crate::tape::{Tape, Var};

/// Which structure sources feed the composite adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyVariant {
    /// Plain 0/1 topology.
    Binary,
    /// Distance-decayed weights on edges.
    Weighted,
    /// Only the learnable matrix.
    LearnOnly,
    /// Positional term plus the degree-aware Dice matrix.
    DiceOnly,
    /// Everything: positional, Dice, and learnable.
    Full,
}

impl AdjacencyVariant {
    pub const ALL: [AdjacencyVariant; 5] = [
        AdjacencyVariant::Binary,
        AdjacencyVariant::Weighted,
        AdjacencyVariant::LearnOnly,
        AdjacencyVariant::DiceOnly,
        AdjacencyVariant::Full,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdjacencyVariant::Binary => "binary",
            AdjacencyVariant::Weighted => "weighted",
            AdjacencyVariant::LearnOnly => "learn_only",
            AdjacencyVariant::DiceOnly => "dice_only",
            AdjacencyVariant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(AdjacencyVariant::Binary),
            "weighted" => Ok(AdjacencyVariant::Weighted),
            "learn_only" => Ok(AdjacencyVariant::LearnOnly),
            "dice_only" => Ok(AdjacencyVariant::DiceOnly),
            "full" => Ok(AdjacencyVariant::Full),
            other => Err(Error::InvalidInput(alloc::format!(
                "unknown adjacency variant '{other}'"
            ))),
        }
    }

    /// Whether the learnable matrix participates in the composite adjacency.
    pub fn uses_learned(&self) -> bool {
        matches!(self, AdjacencyVariant::LearnOnly | AdjacencyVariant::Full)
    }
}

impl core::fmt::Display for AdjacencyVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyConfig {
    /// Contribution of the Dice matrix.
    pub phi: f64,
    pub variant: AdjacencyVariant,
    pub positional_mode: PositionalMode,
}

impl Default for AdjacencyConfig {
    fn default() -> Self {
        AdjacencyConfig {
            phi: 0.6,
            variant: AdjacencyVariant::Full,
            positional_mode: PositionalMode::Squared,
        }
    }
}

impl AdjacencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phi.is_nan() || self.phi < 0.0 {
            return Err(Error::InvalidInput("phi must be >= 0".into()));
        }
        Ok(())
    }
}

/// All learnable tensors: initial convolution weight, learnable adjacency,
/// and the classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w0: Matrix,
    pub a_learn: Matrix,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

impl ModelParams {
    /// Random initialization. The learnable adjacency starts as the Dice
    /// matrix of the run topology (clamped to `[0, 1]`) so training begins
    /// from the structural prior rather than noise.
    pub fn init(
        nodes: usize,
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        dice: &SimilarityMatrix,
        seed: u64,
    ) -> Result<Self> {
        if dice.values().shape() != (nodes, nodes) {
            return Err(Error::ShapeMismatch {
                op: "ModelParams::init",
                lhs: (nodes, nodes),
                rhs: dice.values().shape(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xavier = |rows: usize, cols: usize| {
            let bound = libm::sqrt(6.0 / (rows + cols) as f64);
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
        };
        Ok(ModelParams {
            w0: xavier(input_dim, hidden_dim),
            a_learn: dice.values().clamp(0.0, 1.0),
            head_w: xavier(hidden_dim, classes),
            head_b: Matrix::zeros(1, classes),
        })
    }

    pub fn nodes(&self) -> usize {
        self.a_learn.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn classes(&self) -> usize {
        self.head_w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.hidden_dim();
        if self.head_w.rows() != q {
            return Err(Error::ShapeMismatch {
                op: "ModelParams::validate",
                lhs: self.w0.shape(),
                rhs: self.head_w.shape(),
            });
        }
        if self.a_learn.rows() != self.a_learn.cols() {
            return Err(Error::ShapeMismatch {
                op: "ModelParams::validate",
                lhs: self.a_learn.shape(),
                rhs: (self.a_learn.rows(), self.a_learn.rows()),
            });
        }
        if self.head_b.shape() != (1, self.head_w.cols()) {
            return Err(Error::ShapeMismatch {
                op: "ModelParams::validate",
                lhs: (1, self.head_w.cols()),
                rhs: self.head_b.shape(),
            });
        }
        for m in [&self.w0, &self.a_learn, &self.head_w, &self.head_b] {
            if !m.all_finite() {
                return Err(Error::NonFinite { op: "ModelParams::validate" });
            }
        }
        Ok(())
    }

    /// Box projection applied after every optimizer step: the learnable
    /// adjacency lives in `[0, 1]`, which keeps the linear structure-loss
    /// term bounded.
    pub fn project(&mut self) {
        self.a_learn = self.a_learn.clamp(0.0, 1.0);
    }

    /// `(A + A^T) / 2`, the form in which the learnable adjacency enters the
    /// composite.
    pub fn a_learn_symmetrized(&self) -> Matrix {
        self.a_learn
            .add(&self.a_learn.transpose())
            .expect("square by construction")
            .scale(0.5)
    }
}

/// Everything produced by one forward pass, as concrete values.
#[derive(Debug, Clone)]
pub struct ForwardState {
    /// Per-segment convolution weights `W^1..W^S`.
    pub weights: Vec<Matrix>,
    /// Per-segment node representations, entrywise non-negative.
    pub hidden: Vec<Matrix>,
    /// Utterance embedding: node-mean then segment-mean of the hidden
    /// representations.
    pub embedding: Matrix,
    pub logits: Matrix,
}

/// Non-learnable part of the composite adjacency, self-loops included.
fn composite_base(
    g: &SegmentGraph,
    dice: &SimilarityMatrix,
    cfg: &AdjacencyConfig,
) -> Result<Matrix> {
    cfg.validate()?;
    let m = g.node_count();
    if dice.values().shape() != (m, m) {
        return Err(Error::ShapeMismatch {
            op: "composite_adjacency",
            lhs: (m, m),
            rhs: dice.values().shape(),
        });
    }
    if dice.kind() != SimilarityKind::ProposedDice {
        return Err(Error::InvalidInput(
            "composite adjacency requires the proposed Dice matrix".into(),
        ));
    }
    let eye = Matrix::identity(m);
    match cfg.variant {
        AdjacencyVariant::Binary => binary_adjacency(g).add(&eye),
        AdjacencyVariant::Weighted => weighted_distance_adjacency(g).add(&eye),
        AdjacencyVariant::LearnOnly => Ok(eye),
        AdjacencyVariant::DiceOnly | AdjacencyVariant::Full => {
            positional_adjacency(g, cfg.positional_mode)
                .add(&dice.values().scale(cfg.phi))?
                .add(&eye)
        }
    }
}

/// Composite adjacency `A^s` for one segment. All entries are non-negative
/// and the diagonal is at least 1.
pub fn composite_adjacency(
    g: &SegmentGraph,
    dice: &SimilarityMatrix,
    params: &ModelParams,
    cfg: &AdjacencyConfig,
) -> Result<Matrix> {
    let base = composite_base(g, dice, cfg)?;
    if cfg.variant.uses_learned() {
        if params.a_learn.shape() != base.shape() {
            return Err(Error::ShapeMismatch {
                op: "composite_adjacency",
                lhs: base.shape(),
                rhs: params.a_learn.shape(),
            });
        }
        base.add(&params.a_learn_symmetrized())
    } else {
        Ok(base)
    }
}

/// One segment-specific convolution: `relu(Dhat^{-1/2} A Dhat^{-1/2} X W)`
/// where the degrees are those of `a` itself (callers pass an adjacency that
/// already contains self-loops).
pub fn segment_conv(x: &Matrix, a: &Matrix, w: &Matrix) -> Result<Matrix> {
    let normalized = sym_normalize(a)?;
    Ok(normalized.matmul(x)?.matmul(w)?.relu())
}

/// Inter-segment weight update `relu(W + X^T Ahat X W / m)`; gradients flow
/// through the recurrence across all segments.
pub fn weight_recurrence(w: &Matrix, a: &Matrix, x: &Matrix) -> Result<Matrix> {
    let normalized = sym_normalize(a)?;
    let m = a.rows() as f64;
    let update = x
        .transpose()
        .matmul(&normalized)?
        .matmul(x)?
        .matmul(w)?
        .scale(1.0 / m);
    Ok(w.add(&update)?.relu())
}

/// Baseline GCN layer `relu(D^{-1/2} (A + I) D^{-1/2} H W)` with `D` the
/// degree matrix of `A + I`.
pub fn gcn_layer(h: &Matrix, a: &Matrix, w: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch {
            op: "gcn_layer",
            lhs: a.shape(),
            rhs: (a.rows(), a.rows()),
        });
    }
    let with_loops = a.add(&Matrix::identity(a.rows()))?;
    segment_conv(h, &with_loops, w)
}

/// Parameter leaves registered on a tape; shared by every sample recorded on
/// that tape.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub w0: Var,
    pub a_learn: Var,
    pub head_w: Var,
    pub head_b: Var,
}

impl ParamVars {
    pub fn register(tape: &mut Tape, params: &ModelParams) -> ParamVars {
        ParamVars {
            w0: tape.param(params.w0.clone()),
            a_learn: tape.param(params.a_learn.clone()),
            head_w: tape.param(params.head_w.clone()),
            head_b: tape.param(params.head_b.clone()),
        }
    }
}

/// Records the normalized composite adjacency on the tape. With a learnable
/// variant the result is differentiable in `a_learn`, through both the
/// entries and the degrees; otherwise it is a constant.
pub fn adjacency_on_tape(
    tape: &mut Tape,
    vars: &ParamVars,
    g: &SegmentGraph,
    dice: &SimilarityMatrix,
    cfg: &AdjacencyConfig,
) -> Result<Var> {
    let base = composite_base(g, dice, cfg)?;
    let base_var = tape.constant(base);
    let composite = if cfg.variant.uses_learned() {
        let transposed = tape.transpose(vars.a_learn);
        let sum = tape.add(vars.a_learn, transposed)?;
        let symmetrized = tape.scale(sum, 0.5);
        tape.add(base_var, symmetrized)?
    } else {
        base_var
    };
    tape.sym_normalize(composite)
}

/// One sample's forward pass recorded on a tape.
#[derive(Debug, Clone)]
pub struct SampleForward {
    pub logits: Var,
    pub weights: Vec<Var>,
    pub hidden: Vec<Var>,
    pub embedding: Var,
}

/// Runs the segment loop for one sample against a previously recorded
/// normalized adjacency (identical for every segment, since segments share
/// the run topology).
pub fn forward_on_tape(
    tape: &mut Tape,
    vars: &ParamVars,
    a_hat: Var,
    dg: &DynamicGraph,
) -> Result<SampleForward> {
    let segment_count = dg.segments().len();
    let inv_nodes = 1.0 / dg.node_count() as f64;
    let mut w = vars.w0;
    let mut weights = Vec::with_capacity(segment_count);
    let mut hidden = Vec::with_capacity(segment_count);
    let mut pooled: Option<Var> = None;

    for (s, seg) in dg.segments().iter().enumerate() {
        let x = tape.constant(seg.features().clone());
        let propagated = tape.matmul(a_hat, x)?;
        let pre = tape.matmul(propagated, w)?;
        let h = tape.relu(pre);
        weights.push(w);
        hidden.push(h);

        let node_mean = tape.mean_rows(h);
        pooled = Some(match pooled {
            Some(acc) => tape.add(acc, node_mean)?,
            None => node_mean,
        });

        if s + 1 < segment_count {
            let xt = tape.transpose(x);
            let xta = tape.matmul(xt, a_hat)?;
            let xtax = tape.matmul(xta, x)?;
            let update = tape.matmul(xtax, w)?;
            let scaled = tape.scale(update, inv_nodes);
            let summed = tape.add(w, scaled)?;
            w = tape.relu(summed);
        }
    }

    let embedding = tape.scale(pooled.expect("at least one segment"), 1.0 / segment_count as f64);
    let projected = tape.matmul(embedding, vars.head_w)?;
    let logits = tape.add(projected, vars.head_b)?;
    Ok(SampleForward {
        logits,
        weights,
        hidden,
        embedding,
    })
}

/// Full forward pass for one sample, computing the Dice matrix from the
/// sample's own topology.
pub fn forward(dg: &DynamicGraph, params: &ModelParams, cfg: &AdjacencyConfig) -> Result<ForwardState> {
    let dice = crate::similarity::dice_matrix(&dg.segments()[0]);
    forward_with_dice(dg, &dice, params, cfg)
}

/// Forward pass against a precomputed Dice matrix (the training loop reuses
/// one matrix for the whole run).
pub fn forward_with_dice(
    dg: &DynamicGraph,
    dice: &SimilarityMatrix,
    params: &ModelParams,
    cfg: &AdjacencyConfig,
) -> Result<ForwardState> {
    params.validate()?;
    let mut tape = Tape::new();
    let vars = ParamVars::register(&mut tape, params);
    let a_hat = adjacency_on_tape(&mut tape, &vars, &dg.segments()[0], dice, cfg)?;
    let sample = forward_on_tape(&mut tape, &vars, a_hat, dg)?;
    Ok(ForwardState {
        weights: sample.weights.iter().map(|&v| tape.value(v).clone()).collect(),
        hidden: sample.hidden.iter().map(|&v| tape.value(v).clone()).collect(),
        embedding: tape.value(sample.embedding).clone(),
        logits: tape.value(sample.logits).clone(),
    })
}

/// Serializes parameters as a version string for diagnostics.
pub fn describe_params(params: &ModelParams) -> String {
    alloc::format!(
        "m={} p={} q={} C={}",
        params.nodes(),
        params.input_dim(),
        params.hidden_dim(),
        params.classes()
    )
}
