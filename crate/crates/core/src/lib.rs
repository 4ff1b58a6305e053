//! Simulation and estimation toolkit for insurance surplus processes
//! `X_t = u + theta t - xi_t` driven by mixed fractional Brownian motion
//! `xi = sigma W + B^H`, `1/2 < H < 1`.
//!
//! * [`pathgen`]: exact fGn synthesis and mixed/surplus paths.
//! * [`gausslin`]: Toeplitz and level covariances, Levinson and dense solvers.
//! * [`kernel`]: fundamental-martingale weights and a Nyström kernel solver.
//! * [`drift`]: maximum-likelihood drift estimation.
//! * [`ruin`]: crude and change-of-measure ruin probability estimators.
//! * [`passage`]: first-passage moment bounds and Monte Carlo diagnostics.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drift;
pub mod error;
pub mod gausslin;
pub mod kernel;
pub mod mc;
pub mod model;
pub mod passage;
pub mod pathgen;
pub mod quad;
pub mod rng;
pub mod ruin;
pub mod stats;

pub use error::{Error, Result};
pub use model::{GridSpec, ModelParams};
pub use rng::RngStream;
