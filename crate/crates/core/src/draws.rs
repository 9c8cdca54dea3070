//! Retained posterior draws and the running means needed for plug-in
//! evaluations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureTable;
use crate::sampler::ChainState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Standard,
    Shrinkage,
}

/// Run metadata written next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub version: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub periods: usize,
    pub k: usize,
    pub q: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub retained: usize,
    pub enforce_stability: bool,
    pub rho_interval: (f64, f64),
    pub rho_step_initial: f64,
    pub rho_step_final: f64,
    /// Acceptance rate of the `rho` update after burn-in.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Acceptance rate of each adaptation window during burn-in.
    pub acceptance_history: Vec<f64>,
    pub runtime_seconds: f64,
}

/// Posterior means of every block, with the indicator replaced by the
/// averaged mixture moments of each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMeans {
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: DVector<f64>,
    /// Mean of `Lambda f_t` per cell.
    pub common: DMatrix<f64>,
    /// Mean of `mu_{Z_t(s_i)}` per cell.
    pub mixture_mean: DMatrix<f64>,
    /// Mean of `sigma2_{Z_t(s_i)}` per cell.
    pub mixture_variance: DMatrix<f64>,
}

/// Retained draws of one chain.
///
/// Loadings and factors are kept so that the product `Lambda f_t` of any
/// draw can be rebuilt; the two blocks are not separately identified and
/// only the product is exposed.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub n: usize,
    pub periods: usize,
    pub k: usize,
    pub q: usize,
    pub iteration: Vec<usize>,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    /// Row-major `R x k`.
    pub beta: Vec<f64>,
    pub loglik: Vec<f64>,
    /// `R` blocks of the column-major `n x q` loadings.
    pub lambda: Option<Vec<f64>>,
    /// `R` blocks of the column-major `q x T` factors.
    pub factors: Option<Vec<f64>>,
    /// Row-major `R x q` Lasso scales.
    pub tau2: Option<Vec<f64>>,
    pub phi2: Option<Vec<f64>>,
    pub means: PosteriorMeans,
    pub manifest: ChainManifest,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn beta_draw(&self, r: usize) -> &[f64] {
        &self.beta[r * self.k..(r + 1) * self.k]
    }

    /// Whether per-draw `Lambda f_t` products can be rebuilt.
    pub fn has_common(&self) -> bool {
        self.q == 0 || (self.lambda.is_some() && self.factors.is_some())
    }

    /// `Lambda F` of draw `r` (`n x T`).
    pub fn common(&self, r: usize) -> Result<DMatrix<f64>> {
        if self.q == 0 {
            return Ok(DMatrix::zeros(self.n, self.periods));
        }
        let (l, f) = self.loadings_and_factors(r)?;
        Ok(l * f)
    }

    /// `(Lambda f_t)_i` of draw `r` without materializing the product.
    #[inline]
    pub fn common_cell(&self, r: usize, i: usize, t: usize) -> f64 {
        if self.q == 0 {
            return 0.0;
        }
        let (Some(l), Some(f)) = (&self.lambda, &self.factors) else {
            return f64::NAN;
        };
        let (n, q, periods) = (self.n, self.q, self.periods);
        let lb = &l[r * n * q..(r + 1) * n * q];
        let fb = &f[r * q * periods..(r + 1) * q * periods];
        (0..q).map(|m| lb[m * n + i] * fb[t * q + m]).sum()
    }

    pub(crate) fn loadings_and_factors(&self, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let l = self.lambda.as_ref().ok_or(Error::MissingTrace("loadings"))?;
        let f = self.factors.as_ref().ok_or(Error::MissingTrace("factors"))?;
        let (n, q, periods) = (self.n, self.q, self.periods);
        Ok((
            DMatrix::from_column_slice(n, q, &l[r * n * q..(r + 1) * n * q]),
            DMatrix::from_column_slice(q, periods, &f[r * q * periods..(r + 1) * q * periods]),
        ))
    }

    /// Scalar parameter names in output order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["rho".to_string(), "gamma".to_string(), "delta".to_string()];
        names.extend((1..=self.k).map(|c| format!("beta_{c}")));
        if self.tau2.is_some() {
            names.extend((1..=self.q).map(|m| format!("tau2_{m}")));
        }
        if self.phi2.is_some() {
            names.push("phi2".to_string());
        }
        names
    }

    /// The draw series of a scalar parameter (`loglik` is also accepted).
    pub fn parameter(&self, name: &str) -> Result<Vec<f64>> {
        let indexed = |prefix: &str| -> Option<usize> {
            name.strip_prefix(prefix)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&c| c >= 1)
        };
        match name {
            "rho" => return Ok(self.rho.clone()),
            "gamma" => return Ok(self.gamma.clone()),
            "delta" => return Ok(self.delta.clone()),
            "loglik" => return Ok(self.loglik.clone()),
            "phi2" => {
                if let Some(p) = &self.phi2 {
                    return Ok(p.clone());
                }
            }
            _ => {}
        }
        if let Some(c) = indexed("beta_").filter(|&c| c <= self.k) {
            return Ok((0..self.len()).map(|r| self.beta[r * self.k + c - 1]).collect());
        }
        if let (Some(m), Some(t)) = (indexed("tau2_"), &self.tau2) {
            if m <= self.q {
                return Ok((0..self.len()).map(|r| t[r * self.q + m - 1]).collect());
            }
        }
        Err(Error::UnknownParameter(name.to_string()))
    }
}

/// Accumulates draws and running means while a chain runs.
#[derive(Debug, Clone)]
pub struct DrawsBuilder {
    draws: PosteriorDraws,
    sum_common: DMatrix<f64>,
    sum_mixture_mean: DMatrix<f64>,
    sum_mixture_var: DMatrix<f64>,
    sum_beta: DVector<f64>,
    sums: [f64; 3],
}

impl DrawsBuilder {
    pub fn new(
        n: usize,
        periods: usize,
        k: usize,
        q: usize,
        store_factors: bool,
        shrinkage: bool,
        manifest: ChainManifest,
    ) -> Self {
        let means = PosteriorMeans {
            rho: 0.0,
            gamma: 0.0,
            delta: 0.0,
            beta: DVector::zeros(k),
            common: DMatrix::zeros(n, periods),
            mixture_mean: DMatrix::zeros(n, periods),
            mixture_variance: DMatrix::zeros(n, periods),
        };
        let keep = store_factors && q > 0;
        Self {
            draws: PosteriorDraws {
                n,
                periods,
                k,
                q,
                iteration: Vec::new(),
                rho: Vec::new(),
                gamma: Vec::new(),
                delta: Vec::new(),
                beta: Vec::new(),
                loglik: Vec::new(),
                lambda: keep.then(Vec::new),
                factors: keep.then(Vec::new),
                tau2: shrinkage.then(Vec::new),
                phi2: shrinkage.then(Vec::new),
                means,
                manifest,
            },
            sum_common: DMatrix::zeros(n, periods),
            sum_mixture_mean: DMatrix::zeros(n, periods),
            sum_mixture_var: DMatrix::zeros(n, periods),
            sum_beta: DVector::zeros(k),
            sums: [0.0; 3],
        }
    }

    pub fn reserve(&mut self, draws: usize) {
        let d = &mut self.draws;
        d.rho.reserve(draws);
        d.gamma.reserve(draws);
        d.delta.reserve(draws);
        d.loglik.reserve(draws);
        d.iteration.reserve(draws);
        d.beta.reserve(draws * d.k);
        if let Some(l) = &mut d.lambda {
            l.reserve(draws * d.n * d.q);
        }
        if let Some(f) = &mut d.factors {
            f.reserve(draws * d.q * d.periods);
        }
    }

    pub fn push(
        &mut self,
        iteration: usize,
        state: &ChainState,
        loglik: f64,
        table: &MixtureTable,
        shrinkage: Option<(&[f64], f64)>,
    ) {
        let d = &mut self.draws;
        d.iteration.push(iteration);
        d.rho.push(state.rho);
        d.gamma.push(state.gamma);
        d.delta.push(state.delta);
        d.beta.extend_from_slice(state.beta.as_slice());
        d.loglik.push(loglik);
        if let Some(l) = &mut d.lambda {
            l.extend_from_slice(state.lambda.as_slice());
        }
        if let Some(f) = &mut d.factors {
            f.extend_from_slice(state.factors.as_slice());
        }
        if let (Some((tau2, phi2)), Some(tv), Some(pv)) = (shrinkage, &mut d.tau2, &mut d.phi2) {
            tv.extend_from_slice(tau2);
            pv.push(phi2);
        }
        self.sums[0] += state.rho;
        self.sums[1] += state.gamma;
        self.sums[2] += state.delta;
        self.sum_beta += &state.beta;
        if state.q() > 0 {
            self.sum_common
                .gemm(1.0, &state.lambda, &state.factors, 1.0);
        }
        for (cell, &j) in state.z.iter().enumerate() {
            self.sum_mixture_mean[cell] += table.mu[j as usize];
            self.sum_mixture_var[cell] += table.sigma2[j as usize];
        }
    }

    pub fn manifest_mut(&mut self) -> &mut ChainManifest {
        &mut self.draws.manifest
    }

    pub fn finish(mut self) -> PosteriorDraws {
        let r = self.draws.len().max(1) as f64;
        let m = &mut self.draws.means;
        m.rho = self.sums[0] / r;
        m.gamma = self.sums[1] / r;
        m.delta = self.sums[2] / r;
        m.beta = self.sum_beta / r;
        m.common = self.sum_common / r;
        m.mixture_mean = self.sum_mixture_mean / r;
        m.mixture_variance = self.sum_mixture_var / r;
        self.draws.manifest.retained = self.draws.len();
        self.draws
    }
}
