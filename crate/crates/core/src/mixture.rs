//! The log-chi-squared(1) error law and its ten-component normal mixture
//! approximation.
//!
//! If `e ~ N(0, 1)` then `log e^2` follows a log-chi-squared distribution with
//! one degree of freedom. It is strongly left-skewed, so the samplers replace
//! it by a fixed mixture of ten normals and augment the model with the
//! component indicator of every cell.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Mean of log-chi-squared(1): `-EULER_GAMMA - ln 2`.
pub const LOG_CHI2_MEAN: f64 = -EULER_GAMMA - LN_2;

/// Variance of log-chi-squared(1): `pi^2 / 2`.
pub const LOG_CHI2_VARIANCE: f64 = PI * PI / 2.0;

/// Number of mixture components.
pub const COMPONENTS: usize = 10;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Component probabilities, means and variances of the ten-component mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTable {
    pub p: [f64; COMPONENTS],
    pub mu: [f64; COMPONENTS],
    pub sigma2: [f64; COMPONENTS],
}

/// The moment-matched table used throughout the crate.
pub const STANDARD_TABLE: MixtureTable = MixtureTable {
    p: [
        0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
    ],
    mu: [
        1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384,
        -14.65000,
    ],
    sigma2: [
        0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
    ],
};

impl Default for MixtureTable {
    fn default() -> Self {
        STANDARD_TABLE
    }
}

impl MixtureTable {
    pub fn standard() -> Self {
        STANDARD_TABLE
    }

    /// Mean of the mixture, `sum p_j mu_j`.
    pub fn mean(&self) -> f64 {
        self.p.iter().zip(&self.mu).map(|(p, m)| p * m).sum()
    }

    /// Variance of the mixture.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = (0..COMPONENTS)
            .map(|j| self.p[j] * (self.sigma2[j] + self.mu[j] * self.mu[j]))
            .sum();
        second - mean * mean
    }

    /// Log weight of each component at `x`: `ln p_j + ln N(x | mu_j, sigma2_j)`.
    pub fn component_log_weights(&self, x: f64) -> [f64; COMPONENTS] {
        let mut out = [0.0; COMPONENTS];
        for (j, w) in out.iter_mut().enumerate() {
            *w = self.p[j].ln() + normal_log_density(x, self.mu[j], self.sigma2[j]);
        }
        out
    }

    /// Posterior probabilities of the ten components given a residual `x`.
    pub fn component_posterior(&self, x: f64) -> [f64; COMPONENTS] {
        let mut w = self.component_log_weights(x);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in w.iter_mut() {
            let e = *v - max;
            // exp(-40) is below the rounding error of a total that is at least one.
            *v = if e < -40.0 { 0.0 } else { e.exp() };
            total += *v;
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        w
    }

    /// Log density of the mixture at `x`, evaluated with a max shift.
    pub fn log_density(&self, x: f64) -> f64 {
        let w = self.component_log_weights(x);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + w.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    /// Draw a component from `Categorical(p)`.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        categorical(&self.p, rng.random::<f64>())
    }
}

/// Pick the index whose cumulative weight first exceeds `u * sum(weights)`.
pub(crate) fn categorical(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return j;
        }
    }
    weights.len() - 1
}

#[inline]
pub(crate) fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

/// Density of `log e^2` for `e ~ N(0, 1)`.
pub fn log_chi2_density(x: f64) -> f64 {
    log_chi2_log_density(x).exp()
}

pub fn log_chi2_log_density(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * (x.exp() - x)
}

/// Density of the ten-component mixture at `x`.
pub fn mixture_density(x: f64, table: &MixtureTable) -> f64 {
    table.log_density(x).exp()
}

/// Draw `(component, value)` with `component ~ Categorical(p)` and
/// `value ~ N(mu_component, sigma2_component)`.
pub fn sample_mixture_error<R: Rng + ?Sized>(table: &MixtureTable, rng: &mut R) -> (usize, f64) {
    let j = table.sample_component(rng);
    let z: f64 = StandardNormal.sample(rng);
    (j, table.mu[j] + table.sigma2[j].sqrt() * z)
}

/// Precomputed per-component terms for the indicator update, which is the
/// hottest loop of both samplers.
#[derive(Debug, Clone)]
pub(crate) struct ComponentKernel {
    pub offset: [f64; COMPONENTS],
    pub neg_half_precision: [f64; COMPONENTS],
    pub mu: [f64; COMPONENTS],
}

impl ComponentKernel {
    pub fn new(table: &MixtureTable) -> Self {
        let mut offset = [0.0; COMPONENTS];
        let mut neg_half_precision = [0.0; COMPONENTS];
        for j in 0..COMPONENTS {
            offset[j] = table.p[j].ln() - LN_SQRT_2PI - 0.5 * table.sigma2[j].ln();
            neg_half_precision[j] = -0.5 / table.sigma2[j];
        }
        Self {
            offset,
            neg_half_precision,
            mu: table.mu,
        }
    }

    /// Draw a component for residual `x` given a uniform `u`.
    #[inline]
    pub fn draw(&self, x: f64, u: f64) -> usize {
        let mut w = [0.0; COMPONENTS];
        let mut max = f64::NEG_INFINITY;
        for j in 0..COMPONENTS {
            let d = x - self.mu[j];
            w[j] = self.offset[j] + self.neg_half_precision[j] * d * d;
            if w[j] > max {
                max = w[j];
            }
        }
        let mut total = 0.0;
        for v in w.iter_mut() {
            let e = *v - max;
            // exp(-40) is below the rounding error of a total that is at least one.
            *v = if e < -40.0 { 0.0 } else { e.exp() };
            total += *v;
        }
        let target = u * total;
        let mut acc = 0.0;
        for (j, v) in w.iter().enumerate() {
            acc += v;
            if target < acc {
                return j;
            }
        }
        COMPONENTS - 1
    }
}
