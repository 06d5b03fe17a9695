use alloc::format;
use alloc::vec::Vec;

use super::likelihood::TrainingSet;
use super::standardize::Standardizer;
use crate::datagen::{tps_features, Dataset, KnotSet, Location};
use crate::numerics::DenseMatrix;
use crate::{Error, Result};

/// How locations are embedded before entering the network.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialBasis {
    /// Raw coordinates.
    Coords,
    /// Thin-plate-spline radial bases on a knot set.
    Tps(KnotSet),
}

impl SpatialBasis {
    pub fn embed(&self, locations: &[Location]) -> Result<DenseMatrix> {
        match self {
            SpatialBasis::Coords => DenseMatrix::from_rows(&locations.iter().map(|l| l.0.clone()).collect::<Vec<_>>()),
            SpatialBasis::Tps(knots) => tps_features(locations, knots),
        }
    }
}

/// Location embedding plus training-set standardization of both the
/// embedded features and the covariates; reapplied unchanged at test time.
#[derive(Debug, Clone, PartialEq)]
pub struct InputEncoder {
    pub basis: SpatialBasis,
    pub spatial: Standardizer,
    pub covariates: Standardizer,
}

impl InputEncoder {
    pub fn fit(basis: SpatialBasis, train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("cannot fit an encoder on an empty dataset"));
        }
        let x = basis.embed(&train.locations)?;
        let spatial = Standardizer::fit(&x);
        let covariates = match &train.features {
            Some(f) => Standardizer::fit(f),
            None => Standardizer::identity(0),
        };
        Ok(Self { basis, spatial, covariates })
    }

    pub fn input_dim(&self) -> usize {
        self.spatial.dim()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.dim()
    }

    /// Network input rows for `locations` with optional covariates.
    pub fn encode(&self, locations: &[Location], covariates: Option<&DenseMatrix>) -> Result<DenseMatrix> {
        let x = self.spatial.apply(&self.basis.embed(locations)?);
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "embedding produced {} columns, encoder expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let cov_dim = self.covariate_dim();
        let cov = match (covariates, cov_dim) {
            (None, 0) => None,
            (Some(c), d) if c.cols() == d && c.rows() == locations.len() => Some(self.covariates.apply(c)),
            _ => {
                return Err(Error::DimensionMismatch(format!(
                    "encoder expects {cov_dim} covariate columns for {} locations",
                    locations.len()
                )))
            }
        };
        let width = x.cols() + cov_dim;
        Ok(DenseMatrix::from_fn(locations.len(), width, |i, j| {
            if j < x.cols() {
                x.get(i, j)
            } else {
                cov.as_ref().map_or(0.0, |c| c.get(i, j - x.cols()))
            }
        }))
    }

    pub fn training_set(&self, data: &Dataset) -> Result<TrainingSet> {
        TrainingSet::new(self.encode(&data.locations, data.features.as_ref())?, data.responses.clone())
    }
}
