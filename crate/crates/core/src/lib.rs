//! Adaptive dynamic-graph representation learning for sequential signals.
//!
//! A framed sequence (e.g. per-frame speech features) is cut into sliding
//! windows; each window becomes a graph whose nodes are frames. Node
//! relations are scored by a degree-aware Dice similarity, composed with a
//! positional term and an optional learnable adjacency, and convolved with a
//! segment-specific weight that is carried across segments by a recurrence.
//! Training jointly minimizes a classification loss and a graph-structure
//! loss.
//!
//! The crate is `no_std` (alloc required); IO, file formats, and the CLI
//! live in the companion `dyngraph-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod features;
pub mod grad_check;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod similarity;
pub mod tape;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};
