//! Gibbs sampler with a Metropolis step for the spatial parameter.

pub mod chain;
pub mod data;
pub mod likelihood;
pub mod prior;
pub mod state;
pub mod steps;

pub use chain::{run_chain, SamplerConfig};
pub use data::ModelData;
pub use likelihood::{log_likelihood, log_likelihood_with, marginal_log_likelihood};
pub use prior::{PriorFile, PriorSpec, DIFFUSE_VARIANCE};
pub use state::ChainState;
