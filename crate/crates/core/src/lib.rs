//! Bayesian estimation of spatiotemporal log-ARCH models with latent common
//! factors.
//!
//! Outcomes are mapped to `Y* = log Y^2`, whose error is approximated by a
//! ten-component normal mixture so that every block except the spatial
//! parameter has a conjugate Gibbs update.

pub mod cli;
pub mod dist;
pub mod draws;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod model;
pub mod panel;
pub mod sampler;
pub mod selection;
pub mod shrinkage;
pub mod simulate;
pub mod weights;

pub use draws::{Algorithm, ChainManifest, PosteriorDraws};
pub use error::{Error, Result};
pub use mixture::MixtureTable;
pub use model::SpatialParams;
pub use panel::{Covariates, PanelData};
pub use sampler::{ModelData, PriorSpec, SamplerConfig};
pub use selection::{DicReport, DicTerms};
pub use weights::WeightMatrix;
