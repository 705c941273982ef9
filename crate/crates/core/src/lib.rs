//! Learning tree-structured Ising models from samples passed through a binary
//! symmetric channel.
//!
//! The hidden model is a zero-field Ising distribution on a tree. Observations
//! are its samples with every spin flipped independently with probability `q`.
//! From those observations the crate learns the tree (Chow-Liu), fits a tree
//! distribution, estimates higher-order moments, and evaluates the closed-form
//! sample-complexity bounds. [`harness`] runs Monte Carlo sweeps over `(q, n)`
//! grids; [`oracle`] is the exhaustive ground truth for small `p`.

// `!(x < y)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
mod dsu;
pub mod error;
pub mod harness;
pub mod moments;
pub mod oracle;
pub mod predictive;
pub mod structure;
pub mod tree;

pub use channel::{
    apply_channel, derive_seed, empirical_correlations, sample_hidden, sample_noisy_correlations, BatchKind,
    CorrelationTable, NoiseChannel, SampleBatch,
};
pub use error::{Error, Result};
pub use moments::{estimate_moment, exact_moment, matching_pairs, PathMatching};
pub use predictive::{fit_distribution, predict_conditional, sstv2, symmetric_kl, FittedTreeDistribution};
pub use structure::{chow_liu, structure_error};
pub use tree::{IsingTreeModel, SpinVector, TreeDistribution, TreeTopology};
