//! Shared deep latent spatial representation with outcome-specific mixed
//! likelihoods (binary / count / continuous), trained by dropout-regularized
//! maximum likelihood and queried by Monte Carlo dropout.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the clock or threads lives in the `mdgp` companion crate.
//!
//! Modules, bottom-up:
//!
//! * [`numerics`] - dense matrices, Cholesky/LU, counter-based RNG streams,
//!   special functions and quantiles.
//! * [`datagen`] - the two simulation designs, train/test splitting, knot
//!   lattices and thin-plate-spline features.
//! * [`model`] - network configuration, parameters, masked forward pass,
//!   mixed likelihood, penalized loss and exact gradients.
//! * [`train`] - initialization and the minibatch optimizer loop.
//! * [`predict`] - MC-dropout predictive samples, means, intervals and the
//!   composite spatial score.
//! * [`baselines`] - variogram fitting and ordinary / indicator kriging.
//! * [`metrics`] - AUC, Brier, RMSE, interval coverage and replicate
//!   aggregation.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod datagen;
mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod predict;
pub mod train;

pub use error::{Error, Result};
