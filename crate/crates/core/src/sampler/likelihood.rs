use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mixture::MixtureTable;
use crate::sampler::data::ModelData;
use crate::sampler::state::ChainState;
use crate::sampler::steps::{cached_log_det, LogDetCache};

/// Log-likelihood of the log-squared panel given the indicators and all
/// parameters:
///
/// `sum_t [ -n/2 log 2pi + log|S(rho)| - 1/2 sum_i log s2_ti
///          - 1/2 (S Y*_t - b_t)' Sigma_t^{-1} (S Y*_t - b_t) ]`
///
/// with `b_t = W_t phi + X_t beta + Lambda f_t + d_t`.
pub fn log_likelihood(data: &ModelData, state: &ChainState, table: &MixtureTable) -> Result<f64> {
    log_likelihood_cached(data, state, table, &mut None)
}

pub(crate) fn log_likelihood_cached(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    cache: &mut LogDetCache,
) -> Result<f64> {
    let common = state.common();
    likelihood(
        data,
        Some(cache),
        state.rho,
        state.gamma,
        state.delta,
        state.beta.as_slice(),
        Some(&common),
        |cell| {
            let j = state.z[cell] as usize;
            (table.mu[j], table.sigma2[j])
        },
    )
}

/// Likelihood with arbitrary per-cell error moments `(mean, variance)`,
/// indexed by `t * n + i`. Used for plug-in evaluations where the
/// indicators are replaced by averaged mixture moments.
pub fn log_likelihood_with<F>(
    data: &ModelData,
    rho: f64,
    gamma: f64,
    delta: f64,
    beta: &[f64],
    common: Option<&DMatrix<f64>>,
    moments: F,
) -> Result<f64>
where
    F: Fn(usize) -> (f64, f64),
{
    likelihood(data, None, rho, gamma, delta, beta, common, moments)
}

/// Log-likelihood with every indicator integrated out: each cell's error
/// `Y*_t - rho M Y*_t - ... - Lambda f_t` is scored under the full mixture
/// density rather than a single component.
pub fn marginal_log_likelihood(
    data: &ModelData,
    rho: f64,
    gamma: f64,
    delta: f64,
    beta: &[f64],
    common: Option<&DMatrix<f64>>,
    table: &MixtureTable,
) -> Result<f64> {
    check_inputs(data, rho, beta, common)?;
    let mut total = 0.0;
    for_each_residual(data, rho, gamma, delta, beta, common, |_, r| {
        total += table.log_density(r);
    });
    Ok(total + data.periods() as f64 * data.log_det_s(rho))
}

fn check_inputs(data: &ModelData, rho: f64, beta: &[f64], common: Option<&DMatrix<f64>>) -> Result<()> {
    let (lo, hi) = data.weights.rho_support();
    if !(rho > lo && rho < hi) {
        return Err(Error::RhoOutOfSupport { rho, lo, hi });
    }
    if beta.len() != data.k() {
        return Err(Error::Dimension(format!(
            "beta has length {}, expected {}",
            beta.len(),
            data.k()
        )));
    }
    if let Some(c) = common {
        if c.shape() != (data.n(), data.periods()) {
            return Err(Error::Dimension("common component shape".into()));
        }
    }
    Ok(())
}

/// Calls `f(cell, e)` with `e = Y* - rho MY* - gamma Y*_lag - delta MY*_lag - X beta - common`.
fn for_each_residual<F>(
    data: &ModelData,
    rho: f64,
    gamma: f64,
    delta: f64,
    beta: &[f64],
    common: Option<&DMatrix<f64>>,
    mut f: F,
) where
    F: FnMut(usize, f64),
{
    let k = data.k();
    let ys = data.ystar.as_slice();
    let my = data.my.as_slice();
    let yl = data.ylag.as_slice();
    let ml = data.mylag.as_slice();
    let xs = data.x.as_slice();
    let cs = common.map(|c| c.as_slice());
    for cell in 0..data.cells() {
        let xb: f64 = xs[cell * k..(cell + 1) * k].iter().zip(beta).map(|(x, b)| x * b).sum();
        let c = cs.map_or(0.0, |c| c[cell]);
        f(cell, ys[cell] - rho * my[cell] - gamma * yl[cell] - delta * ml[cell] - xb - c);
    }
}

#[allow(clippy::too_many_arguments)]
fn likelihood<F>(
    data: &ModelData,
    cache: Option<&mut LogDetCache>,
    rho: f64,
    gamma: f64,
    delta: f64,
    beta: &[f64],
    common: Option<&DMatrix<f64>>,
    moments: F,
) -> Result<f64>
where
    F: Fn(usize) -> (f64, f64),
{
    check_inputs(data, rho, beta, common)?;
    let mut quad = 0.0;
    let mut log_var = 0.0;
    for_each_residual(data, rho, gamma, delta, beta, common, |cell, e| {
        let (mean, var) = moments(cell);
        let r = e - mean;
        quad += r * r / var;
        log_var += var.ln();
    });
    let log_det = match cache {
        Some(c) => cached_log_det(data, c, rho),
        None => data.log_det_s(rho),
    };
    let cells = data.cells() as f64;
    Ok(-0.5 * cells * (2.0 * PI).ln() + data.periods() as f64 * log_det
        - 0.5 * log_var
        - 0.5 * quad)
}
