//! Shared hidden layers with node dropout, outcome heads and the mixed
//! likelihood objective.

mod config;
mod encoder;
mod forward;
mod kernel;
mod likelihood;
mod params;
mod standardize;

pub use config::{Activation, NetworkConfig};
pub use encoder::{InputEncoder, SpatialBasis};
pub use forward::{forward, forward_expected, sample_masks, ForwardTrace, MaskSet};
pub use kernel::layer_kernel;
pub use likelihood::{
    cell_nll, cell_nll_grad, estimate_sigma2, grad, loss, loss_and_grad, nll, penalty, Batch, TrainingSet,
};
pub use params::Params;
pub use standardize::Standardizer;
