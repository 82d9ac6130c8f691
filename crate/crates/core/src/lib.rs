//! Stationary vectors of irreducible Markov chains with a bootstrap
//! algebraic multigrid setup.
//!
//! The pipeline builds `B = I - A` from a column-stochastic transition
//! matrix `A`, runs an adaptive least-squares multilevel setup whose cycles
//! double as a multilevel eigensolver, and then accelerates the resulting
//! state-vector approximation with multigrid-preconditioned GMRES or
//! Arnoldi.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod coarsening;
pub mod dense;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod hierarchy;
pub mod interp;
pub mod krylov;
pub mod mle;
pub mod par;
pub mod smoothing;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::SparseMatrix;
