//! Nonlinear Schrödinger problems on compact metric graphs.
//!
//! The crate discretizes `H¹(G)` with continuous piecewise-linear elements
//! and provides the Kirchhoff Laplacian spectrum, the NLS energy with its
//! mass-constrained variations, ground-state search, linear stability of the
//! constant state and a mass-conserving time integrator.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretize;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod ground_state;
pub mod linalg;
pub mod metric_graph;
pub mod nls_energy;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
