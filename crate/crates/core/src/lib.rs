//! Noisy gradient-variant ADMM with privacy amplification accounting.
//!
//! * [`linalg`]: dense vectors/matrices, Cholesky, Jacobi eigen-solver.
//! * [`problem`]: constraint systems, losses, regularizers, standardization.
//! * [`engine`]: the iteration, its noisy release, operator K, mechanisms.
//! * [`norms`]: weighted norms and the contraction factor.
//! * [`accountant`]: closed-form divergence and amplification bounds.
//! * [`oracle`]: exact Gaussian law propagation on quadratic instances.
//! * [`experiment`]: LASSO reproduction, t-tests, convergence detection.

// NaN-rejecting guards read best as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod linalg;
pub mod norms;
pub mod oracle;
pub mod problem;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
