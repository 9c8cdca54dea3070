//! The conditional updates of the standard sampler. Each function updates
//! one block of a [`ChainState`] in place given all other blocks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::GaussianInfo;
use crate::mixture::{ComponentKernel, MixtureTable};
use crate::model::stability_check;
use crate::model::SpatialParams;
use crate::sampler::data::ModelData;
use crate::sampler::prior::{PriorPrecision, PriorSpec};
use crate::sampler::state::ChainState;
use crate::weights::WeightMatrix;

/// Retry budget of the stability truncation in the `phi` update.
pub const STABILITY_RETRIES: usize = 1000;

/// Terms left out of [`residual`].
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Omit {
    pub spatial: bool,
    pub lags: bool,
    pub covariates: bool,
    pub common: bool,
    pub mixture: bool,
}

/// `Y*_t - rho M Y*_t - W_t phi - X_t beta - Lambda f_t - d_t` with the
/// requested terms left out, as an `n x T` matrix.
pub(crate) fn residual(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    omit: Omit,
) -> DMatrix<f64> {
    let mut r = data.ystar.clone();
    let rs = r.as_mut_slice();
    if !omit.spatial && state.rho != 0.0 {
        subtract_scaled(rs, state.rho, data.my.as_slice());
    }
    if !omit.lags {
        subtract_scaled(rs, state.gamma, data.ylag.as_slice());
        subtract_scaled(rs, state.delta, data.mylag.as_slice());
    }
    let k = data.k();
    if !omit.covariates && k > 0 {
        let beta = state.beta.as_slice();
        for (v, x) in rs.iter_mut().zip(data.x.as_slice().chunks_exact(k)) {
            *v -= x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    if !omit.mixture {
        for (v, &j) in rs.iter_mut().zip(&state.z) {
            *v -= table.mu[j as usize];
        }
    }
    if !omit.common && state.q() > 0 {
        r.gemm(-1.0, &state.lambda, &state.factors, 1.0);
    }
    r
}

#[inline]
fn subtract_scaled(out: &mut [f64], a: f64, x: &[f64]) {
    for (v, x) in out.iter_mut().zip(x) {
        *v -= a * x;
    }
}

/// `1 / sigma2_{Z_t(s_i)}` per cell, indexed `t * n + i`.
pub(crate) fn cell_precisions(state: &ChainState, table: &MixtureTable) -> Vec<f64> {
    let inv: Vec<f64> = table.sigma2.iter().map(|s| 1.0 / s).collect();
    state.z.iter().map(|&j| inv[j as usize]).collect()
}

/// Indicator update: each `Z_t(s_i)` is drawn from its ten-point posterior
/// `p_j N(y | mu_j, s2_j) / sum_k p_k N(y | mu_k, s2_k)` evaluated at the
/// residual `S Y*_t - W_t phi - X_t beta - Lambda f_t`.
pub fn sample_z<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    rng: &mut R,
) {
    let kernel = ComponentKernel::new(table);
    sample_z_with(data, state, table, &kernel, rng);
}

pub(crate) fn sample_z_with<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    kernel: &ComponentKernel,
    rng: &mut R,
) {
    let r = residual(
        data,
        state,
        table,
        Omit {
            mixture: true,
            ..Omit::default()
        },
    );
    for (cell, y) in r.iter().enumerate() {
        let u: f64 = rng.random();
        state.z[cell] = kernel.draw(*y, u) as u8;
    }
}

/// Information form of the `beta` conditional.
pub fn beta_conditional(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    prior: &PriorSpec,
) -> Result<GaussianInfo> {
    let pp = PriorPrecision::new(prior)?;
    let prec = cell_precisions(state, table);
    beta_conditional_with(data, state, table, &pp, &prec)
}

pub(crate) fn beta_conditional_with(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    pp: &PriorPrecision,
    prec: &[f64],
) -> Result<GaussianInfo> {
    let k = data.k();
    let y = residual(
        data,
        state,
        table,
        Omit {
            covariates: true,
            ..Omit::default()
        },
    );
    let mut precision = pp.beta.clone();
    let mut potential = pp.beta_h.clone();
    let rows = data.x.as_slice().chunks_exact(k);
    for ((x, &w), &yv) in rows.zip(prec).zip(y.as_slice()) {
        for a in 0..k {
            let wx = w * x[a];
            potential[a] += wx * yv;
            for b in 0..=a {
                precision[(a, b)] += wx * x[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            precision[(b, a)] = precision[(a, b)];
        }
    }
    GaussianInfo::new(precision, &potential, "beta")
}

/// `beta ~ N(mu_beta, K_beta)`.
pub fn sample_beta<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let pp = PriorPrecision::new(prior)?;
    let prec = cell_precisions(state, table);
    sample_beta_with(data, state, table, &pp, &prec, rng)
}

pub(crate) fn sample_beta_with<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    pp: &PriorPrecision,
    prec: &[f64],
    rng: &mut R,
) -> Result<()> {
    if data.k() == 0 {
        return Ok(());
    }
    let g = beta_conditional_with(data, state, table, pp, prec)?;
    state.beta = g.sample(rng);
    Ok(())
}

/// Residual shared by the factor and loading updates:
/// `S Y*_t - W_t phi - X_t beta - d_t`.
pub(crate) fn factor_residual(data: &ModelData, state: &ChainState, table: &MixtureTable) -> DMatrix<f64> {
    residual(
        data,
        state,
        table,
        Omit {
            common: true,
            ..Omit::default()
        },
    )
}

/// Information form of `f_t | rest` for period `t`.
pub fn factor_conditional(
    state: &ChainState,
    y: &DMatrix<f64>,
    prec: &[f64],
    t: usize,
) -> Result<GaussianInfo> {
    let q = state.q();
    let n = state.n();
    let lam = state.lambda.as_slice();
    let yt = &y.as_slice()[t * n..(t + 1) * n];
    let wt = &prec[t * n..(t + 1) * n];
    let mut precision = DMatrix::identity(q, q);
    let mut potential = DVector::zeros(q);
    for a in 0..q {
        let la = &lam[a * n..(a + 1) * n];
        potential[a] = la.iter().zip(wt).zip(yt).map(|((l, w), y)| l * w * y).sum();
        for b in 0..=a {
            let lb = &lam[b * n..(b + 1) * n];
            let v: f64 = la.iter().zip(lb).zip(wt).map(|((x, z), w)| x * z * w).sum();
            precision[(a, b)] += v;
            if a != b {
                precision[(b, a)] += v;
            }
        }
    }
    GaussianInfo::new(precision, &potential, "factors")
}

/// `f_t ~ N(mu_ft, K_ft)` independently over periods.
pub fn sample_factors<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    rng: &mut R,
) -> Result<()> {
    if state.q() == 0 {
        return Ok(());
    }
    let y = factor_residual(data, state, table);
    let prec = cell_precisions(state, table);
    sample_factors_with(state, &y, &prec, rng)
}

pub(crate) fn sample_factors_with<R: Rng + ?Sized>(
    state: &mut ChainState,
    y: &DMatrix<f64>,
    prec: &[f64],
    rng: &mut R,
) -> Result<()> {
    for t in 0..state.periods() {
        let g = factor_conditional(state, y, prec, t)?;
        let f = g.sample(rng);
        state.factors.set_column(t, &f);
    }
    Ok(())
}

/// Prior on a loading row.
#[derive(Debug, Clone)]
pub enum LoadingPrior<'a> {
    /// `N(b_lambda, B_lambda)` in information form.
    Normal { precision: &'a DMatrix<f64>, potential: &'a DVector<f64> },
    /// `N(0, diag(tau2))`.
    Scales(&'a [f64]),
}

/// Information form of `lambda(s_i) | rest`.
pub fn loading_conditional(
    state: &ChainState,
    y: &DMatrix<f64>,
    prec: &[f64],
    i: usize,
    prior: &LoadingPrior<'_>,
) -> Result<GaussianInfo> {
    let q = state.q();
    let n = state.n();
    let (mut precision, mut potential) = match prior {
        LoadingPrior::Normal {
            precision,
            potential,
        } => ((*precision).clone(), (*potential).clone()),
        LoadingPrior::Scales(tau2) => (
            DMatrix::from_diagonal(&DVector::from_iterator(q, tau2.iter().map(|t| 1.0 / t))),
            DVector::zeros(q),
        ),
    };
    let f = state.factors.as_slice();
    for t in 0..state.periods() {
        let w = prec[t * n + i];
        let wy = w * y[(i, t)];
        let ft = &f[t * q..(t + 1) * q];
        for a in 0..q {
            let wfa = w * ft[a];
            potential[a] += ft[a] * wy;
            for b in 0..=a {
                precision[(a, b)] += wfa * ft[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            precision[(b, a)] = precision[(a, b)];
        }
    }
    GaussianInfo::new(precision, &potential, "loadings")
}

/// Each row `lambda(s_i)` drawn from its normal conditional.
pub fn sample_loadings<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    if state.q() == 0 {
        return Ok(());
    }
    let pp = PriorPrecision::new(prior)?;
    let y = factor_residual(data, state, table);
    let prec = cell_precisions(state, table);
    let lp = LoadingPrior::Normal {
        precision: &pp.lambda,
        potential: &pp.lambda_h,
    };
    sample_loadings_with(state, &y, &prec, &lp, rng)
}

/// Loading rows under an explicit loading prior, e.g. the Lasso scales.
pub fn sample_loadings_under<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    prior: &LoadingPrior<'_>,
    rng: &mut R,
) -> Result<()> {
    if state.q() == 0 {
        return Ok(());
    }
    let y = factor_residual(data, state, table);
    let prec = cell_precisions(state, table);
    sample_loadings_with(state, &y, &prec, prior, rng)
}

pub(crate) fn sample_loadings_with<R: Rng + ?Sized>(
    state: &mut ChainState,
    y: &DMatrix<f64>,
    prec: &[f64],
    prior: &LoadingPrior<'_>,
    rng: &mut R,
) -> Result<()> {
    for i in 0..state.n() {
        let g = loading_conditional(state, y, prec, i, prior)?;
        let l = g.sample(rng);
        state.lambda.set_row(i, &l.transpose());
    }
    Ok(())
}

/// Information form of `phi = (gamma, delta)' | rest`, before any stability
/// truncation.
pub fn phi_conditional(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    prior: &PriorSpec,
) -> Result<GaussianInfo> {
    let pp = PriorPrecision::new(prior)?;
    let prec = cell_precisions(state, table);
    phi_conditional_with(data, state, table, &pp, &prec)
}

pub(crate) fn phi_conditional_with(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    pp: &PriorPrecision,
    prec: &[f64],
) -> Result<GaussianInfo> {
    let y = residual(
        data,
        state,
        table,
        Omit {
            lags: true,
            ..Omit::default()
        },
    );
    let (mut a11, mut a12, mut a22, mut h1, mut h2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let cells = y
        .as_slice()
        .iter()
        .zip(prec)
        .zip(data.ylag.as_slice().iter().zip(data.mylag.as_slice()));
    for ((&yi, &w), (&w1, &w2)) in cells {
        a11 += w * w1 * w1;
        a12 += w * w1 * w2;
        a22 += w * w2 * w2;
        h1 += w * w1 * yi;
        h2 += w * w2 * yi;
    }
    let mut precision = pp.phi.clone();
    precision[(0, 0)] += a11;
    precision[(0, 1)] += a12;
    precision[(1, 0)] += a12;
    precision[(1, 1)] += a22;
    let potential = &pp.phi_h + DVector::from_vec(vec![h1, h2]);
    GaussianInfo::new(precision, &potential, "phi")
}

/// Whether `(rho, gamma, delta)` lies in the region the priors are
/// truncated to: `|rho| + |gamma| + |delta| < 1` for a row-normalized `M`,
/// the eigenvalue criterion otherwise.
pub fn in_stability_region(w: &WeightMatrix, rho: f64, gamma: f64, delta: f64) -> bool {
    if w.is_row_normalized() {
        rho.abs() + gamma.abs() + delta.abs() < 1.0
    } else {
        stability_check(&SpatialParams::new(rho, gamma, delta), w).stable
    }
}

/// `phi ~ N(mu_phi, K_phi)`, truncated to the stability region by rejection
/// when `prior.enforce_stability` is set.
pub fn sample_phi<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<()> {
    let pp = PriorPrecision::new(prior)?;
    let prec = cell_precisions(state, table);
    sample_phi_with(data, state, table, &pp, &prec, prior.enforce_stability, rng)
}

pub(crate) fn sample_phi_with<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    pp: &PriorPrecision,
    prec: &[f64],
    enforce_stability: bool,
    rng: &mut R,
) -> Result<()> {
    let g = phi_conditional_with(data, state, table, pp, prec)?;
    for _ in 0..STABILITY_RETRIES {
        let phi = g.sample(rng);
        if !enforce_stability || in_stability_region(&data.weights, state.rho, phi[0], phi[1]) {
            state.gamma = phi[0];
            state.delta = phi[1];
            return Ok(());
        }
    }
    Err(Error::StabilityBudget {
        block: "phi",
        retries: STABILITY_RETRIES,
    })
}

/// Sufficient statistics of the `rho` conditional: with `u` the residual
/// excluding the spatial term, the log-likelihood in `rho` is
/// `T log|S(rho)| + rho * cross - rho^2 * quad / 2` up to a constant.
#[derive(Debug, Clone, Copy)]
pub struct RhoTarget {
    pub cross: f64,
    pub quad: f64,
}

impl RhoTarget {
    pub fn new(data: &ModelData, state: &ChainState, table: &MixtureTable) -> Self {
        Self::with_precisions(data, state, table, &cell_precisions(state, table))
    }

    pub(crate) fn with_precisions(data: &ModelData, state: &ChainState, table: &MixtureTable, prec: &[f64]) -> Self {
        let u = residual(
            data,
            state,
            table,
            Omit {
                spatial: true,
                ..Omit::default()
            },
        );
        let mut cross = 0.0;
        let mut quad = 0.0;
        for ((ui, mi), w) in u.iter().zip(data.my.iter()).zip(prec) {
            cross += w * ui * mi;
            quad += w * mi * mi;
        }
        Self { cross, quad }
    }

    /// Log conditional density of `rho` up to a constant (flat prior).
    pub fn log_density(&self, data: &ModelData, rho: f64) -> f64 {
        self.log_density_given(data.periods(), data.log_det_s(rho), rho)
    }

    /// As [`RhoTarget::log_density`] with `log|S(rho)|` supplied.
    pub fn log_density_given(&self, periods: usize, log_det: f64, rho: f64) -> f64 {
        periods as f64 * log_det + rho * self.cross - 0.5 * rho * rho * self.quad
    }
}

/// Outcome of one Metropolis–Hastings update of `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoUpdate {
    pub proposal: f64,
    pub accepted: bool,
}

/// Random-walk proposal `rho + step * N(0, 1)`; proposals outside
/// `interval` or, when enforced, outside the stability region are rejected.
pub fn sample_rho_mh<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    interval: (f64, f64),
    enforce_stability: bool,
    step: f64,
    rng: &mut R,
) -> RhoUpdate {
    let prec = cell_precisions(state, table);
    let mut cache = None;
    sample_rho_mh_with(data, state, table, &prec, interval, enforce_stability, step, &mut cache, rng)
}

/// `log|S(rho)|` remembered for the current value of `rho`.
pub(crate) type LogDetCache = Option<(f64, f64)>;

pub(crate) fn cached_log_det(data: &ModelData, cache: &mut LogDetCache, rho: f64) -> f64 {
    match *cache {
        Some((r, v)) if r == rho => v,
        _ => {
            let v = data.log_det_s(rho);
            *cache = Some((rho, v));
            v
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_rho_mh_with<R: Rng + ?Sized>(
    data: &ModelData,
    state: &mut ChainState,
    table: &MixtureTable,
    prec: &[f64],
    interval: (f64, f64),
    enforce_stability: bool,
    step: f64,
    cache: &mut LogDetCache,
    rng: &mut R,
) -> RhoUpdate {
    let z: f64 = StandardNormal.sample(rng);
    let proposal = state.rho + step * z;
    let u: f64 = rng.random();
    let admissible = proposal > interval.0
        && proposal < interval.1
        && (!enforce_stability || in_stability_region(&data.weights, proposal, state.gamma, state.delta));
    if !admissible {
        return RhoUpdate {
            proposal,
            accepted: false,
        };
    }
    let target = RhoTarget::with_precisions(data, state, table, prec);
    let periods = data.periods();
    let current = target.log_density_given(periods, cached_log_det(data, cache, state.rho), state.rho);
    let proposed_log_det = data.log_det_s(proposal);
    let log_ratio = target.log_density_given(periods, proposed_log_det, proposal) - current;
    let accepted = u.ln() < log_ratio;
    if accepted {
        state.rho = proposal;
        *cache = Some((proposal, proposed_log_det));
    }
    RhoUpdate { proposal, accepted }
}

/// Draw `Y*` from the model given every block of `state`, period by period:
/// `Y*_t = S(rho)^{-1} (W_t phi + X_t beta + Lambda f_t + d_t + Sigma_t^{1/2} u_t)`.
pub fn simulate_ystar<R: Rng + ?Sized>(
    data: &ModelData,
    state: &ChainState,
    table: &MixtureTable,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = data.n();
    let periods = data.periods();
    let lu = data.weights.build_s(state.rho)?.lu();
    let common = state.common();
    let m = data.weights.matrix();
    let mut prev = data.ystar0.clone();
    let mut out = DMatrix::zeros(n, periods);
    for t in 0..periods {
        let mprev = m * &prev;
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let j = state.component(i, t);
            let z: f64 = StandardNormal.sample(rng);
            let xb: f64 = data.x.row(i, t).iter().zip(state.beta.iter()).map(|(x, b)| x * b).sum();
            rhs[i] = state.gamma * prev[i]
                + state.delta * mprev[i]
                + xb
                + common[(i, t)]
                + table.mu[j]
                + table.sigma2[j].sqrt() * z;
        }
        let y = lu.solve(&rhs).ok_or(Error::RhoOutOfSupport {
            rho: state.rho,
            lo: -1.0,
            hi: 1.0,
        })?;
        out.set_column(t, &y);
        prev = y;
    }
    Ok(out)
}
