//! Dense linear algebra, seeded sampling and small special functions.

mod linalg;
mod matrix;
mod quantile;
mod rng;
pub mod special;

pub use linalg::{cholesky, cholesky_with_jitter, exp_cov, mvn_sample, LuFactor};
pub use matrix::DenseMatrix;
pub use quantile::{empirical_quantile, quantile_sorted};
pub use rng::{stream_id, RngStream};
