use alloc::string::String;
use core::fmt;

/// Errors produced by the numeric, graph, and training layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A value that must be finite was NaN or infinite.
    NonFinite { op: &'static str },
    /// A class label at or beyond the number of classes.
    LabelOutOfRange { label: usize, classes: usize },
    /// Symmetric normalization hit a row with zero (or negative) degree.
    ZeroRowSum { row: usize },
    /// A matrix that must be entrywise non-negative had a negative entry.
    NegativeEntry { row: usize, col: usize },
    /// A node index at or beyond the node count.
    NodeOutOfRange { node: usize, nodes: usize },
    /// A pairwise similarity was requested for a node against itself.
    SelfPair { node: usize },
    /// Invalid argument or configuration; the message names the field.
    InvalidInput(String),
    /// Training aborted because the loss became non-finite.
    Diverged {
        fold: usize,
        epoch: usize,
        detail: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => write!(
                f,
                "{op}: shape mismatch between {}x{} and {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            Error::NonFinite { op } => write!(f, "{op}: non-finite value"),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::ZeroRowSum { row } => {
                write!(f, "row {row} has zero degree; add self-loops before normalizing")
            }
            Error::NegativeEntry { row, col } => {
                write!(f, "negative entry at ({row}, {col})")
            }
            Error::NodeOutOfRange { node, nodes } => {
                write!(f, "node {node} out of range for {nodes} nodes")
            }
            Error::SelfPair { node } => {
                write!(f, "similarity of node {node} with itself is not defined")
            }
            Error::InvalidInput(msg) => write!(f, "{msg}"),
            Error::Diverged { fold, epoch, detail } => {
                write!(f, "training diverged in fold {fold} at epoch {epoch}: {detail}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
