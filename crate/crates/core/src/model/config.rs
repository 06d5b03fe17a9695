use alloc::format;
use alloc::vec::Vec;

use crate::datagen::OutcomeSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    /// Linear layers; used for reductions to (generalized) linear models.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => libm::tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Architecture of the shared network and its outcome heads.
///
/// Keep probabilities are the probability that a unit is *retained*; they
/// drive both mask sampling and the weight-decay constants
/// `λ = keep / (2 n_train)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    /// One per hidden layer.
    pub hidden_keep: Vec<f64>,
    /// One per head; masks the shared representation entering that head.
    pub head_keep: Vec<f64>,
    pub heads: Vec<OutcomeSpec>,
    pub n_train: usize,
    /// Exogenous covariates appended (unmasked) to every head's input.
    pub covariate_dim: usize,
}

impl NetworkConfig {
    /// Two relu layers of width 100 with keep probability 0.9 everywhere.
    pub fn with_defaults(input_dim: usize, heads: Vec<OutcomeSpec>, n_train: usize) -> Self {
        let n_heads = heads.len();
        Self {
            input_dim,
            hidden_widths: alloc::vec![100, 100],
            activation: Activation::Relu,
            hidden_keep: alloc::vec![0.9; 2],
            head_keep: alloc::vec![0.9; n_heads],
            heads,
            n_train,
            covariate_dim: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if self.heads.is_empty() {
            return Err(Error::InvalidConfig("at least one outcome head is required".into()));
        }
        if self.hidden_keep.len() != self.hidden_widths.len() {
            return Err(Error::InvalidConfig(format!(
                "{} hidden keep probabilities for {} hidden layers",
                self.hidden_keep.len(),
                self.hidden_widths.len()
            )));
        }
        if self.head_keep.len() != self.heads.len() {
            return Err(Error::InvalidConfig(format!(
                "{} head keep probabilities for {} heads",
                self.head_keep.len(),
                self.heads.len()
            )));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if let Some(p) = self.hidden_keep.iter().chain(&self.head_keep).find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidConfig(format!("keep probability {p} outside (0, 1]")));
        }
        if self.n_train == 0 {
            return Err(Error::InvalidConfig("n_train must be at least 1".into()));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Width of the shared representation `H(s)`.
    pub fn repr_dim(&self) -> usize {
        self.hidden_widths.last().copied().unwrap_or(self.input_dim)
    }

    pub fn head_input_dim(&self) -> usize {
        self.repr_dim() + self.covariate_dim
    }

    /// Full input row length: spatial features followed by covariates.
    pub fn row_dim(&self) -> usize {
        self.input_dim + self.covariate_dim
    }

    pub fn layer_in_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_widths[l - 1]
        }
    }

    /// `λ_ℓ = keep_ℓ / (2N)` for hidden layer `l`.
    pub fn lambda_hidden(&self, l: usize) -> f64 {
        self.hidden_keep[l] / (2.0 * self.n_train as f64)
    }

    /// `λ_L^(j) = keep_L^(j) / (2N)` for head `j`.
    pub fn lambda_head(&self, j: usize) -> f64 {
        self.head_keep[j] / (2.0 * self.n_train as f64)
    }
}
