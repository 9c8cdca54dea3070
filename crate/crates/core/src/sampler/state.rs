use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::mixture::MixtureTable;
use crate::model::SpatialParams;
use crate::sampler::prior::PriorSpec;

/// One state of the Markov chain.
///
/// Indicators are stored 0-based (component `j` here is component `j + 1`
/// in the printed mixture table) with cell `(i, t)` at index `t * n + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<u8>,
    pub beta: DVector<f64>,
    /// `n x q` loadings, row `i` is `lambda(s_i)'`.
    pub lambda: DMatrix<f64>,
    /// `q x T` factors, column `t` is `f_t`.
    pub factors: DMatrix<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
}

impl ChainState {
    /// `beta = 0`, `phi = 0`, `rho = 0`, loading rows at the prior mean,
    /// `F = 0` and indicators drawn from the mixture weights.
    pub fn initial<R: Rng + ?Sized>(
        n: usize,
        periods: usize,
        prior: &PriorSpec,
        table: &MixtureTable,
        rng: &mut R,
    ) -> Self {
        let k = prior.k();
        let q = prior.q();
        let z = (0..n * periods)
            .map(|_| table.sample_component(rng) as u8)
            .collect();
        let lambda = DMatrix::from_fn(n, q, |_, m| prior.b_lambda[m]);
        Self {
            z,
            beta: DVector::zeros(k),
            lambda,
            factors: DMatrix::zeros(q, periods),
            gamma: 0.0,
            delta: 0.0,
            rho: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn q(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn periods(&self) -> usize {
        self.factors.ncols()
    }

    pub fn params(&self) -> SpatialParams {
        SpatialParams::new(self.rho, self.gamma, self.delta)
    }

    /// `Lambda F`, the common component of every cell (`n x T`).
    pub fn common(&self) -> DMatrix<f64> {
        if self.q() == 0 {
            DMatrix::zeros(self.n(), self.periods())
        } else {
            &self.lambda * &self.factors
        }
    }

    #[inline]
    pub fn component(&self, i: usize, t: usize) -> usize {
        self.z[t * self.n() + i] as usize
    }

    /// `d_t` stacked over periods: `mu_{Z_t(s_i)}` as an `n x T` matrix.
    pub fn mixture_means(&self, table: &MixtureTable) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.periods(), |i, t| table.mu[self.component(i, t)])
    }

    /// Diagonal of `Sigma_t` stacked over periods.
    pub fn mixture_variances(&self, table: &MixtureTable) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.periods(), |i, t| {
            table.sigma2[self.component(i, t)]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.beta.iter().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite())
            && self.factors.iter().all(|v| v.is_finite())
            && self.gamma.is_finite()
            && self.delta.is_finite()
            && self.rho.is_finite()
    }
}
