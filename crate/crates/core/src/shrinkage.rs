//! Bayesian-Lasso variant of the sampler: loadings get a Laplace prior,
//! written as a normal scale mixture `lambda_m(s_i) | tau2_m ~ N(0, tau2_m)`,
//! `tau2_m ~ Exp(rate phi2 / 2)`, `phi2 ~ Gamma(c, rate d)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, InverseGaussian};
use serde::{Deserialize, Serialize};

use crate::dist::sample_gig;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::sampler::chain::{run, Mode};
use crate::sampler::{ModelData, PriorSpec, SamplerConfig};

/// Below this column norm the `tau2` conditional is replaced by its prior.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Which `tau2` update to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauConditional {
    /// The full conditional of `tau2_m` given its column of loadings:
    /// `GIG(1 - n/2, phi2, sum_i lambda_m(s_i)^2)`.
    #[default]
    Exact,
    /// `1 / tau2_m ~ InverseGaussian(mean sqrt(S / phi2), shape S)` with
    /// `S = sum_i lambda_m(s_i)^2`. Not the conditional of the hierarchy
    /// above; kept for comparison.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShrinkageOptions {
    pub tau_conditional: TauConditional,
    /// Hold every `tau2_m` at this value and skip the `tau2`/`phi2` updates.
    pub frozen_tau2: Option<f64>,
}

/// Lasso hyper-parameters carried by the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageState {
    pub tau2: Vec<f64>,
    /// Squared Lasso parameter.
    pub phi2: f64,
    /// Gamma hyper-prior shape.
    pub c: f64,
    /// Gamma hyper-prior rate.
    pub d: f64,
}

impl ShrinkageState {
    /// `tau2 = 1`, `phi2` at its prior mean `c / d`.
    pub fn initial(q: usize, prior: &PriorSpec) -> Self {
        Self {
            tau2: vec![1.0; q],
            phi2: prior.lasso_c / prior.lasso_d,
            c: prior.lasso_c,
            d: prior.lasso_d,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.phi2.is_finite() && self.phi2 > 0.0 && self.tau2.iter().all(|t| t.is_finite() && *t > 0.0)
    }
}

/// Squared norm of each loading column.
pub fn column_norms(lambda: &DMatrix<f64>) -> Vec<f64> {
    lambda.column_iter().map(|c| c.norm_squared()).collect()
}

/// One `tau2_m` per loading column.
pub fn sample_tau2<R: Rng + ?Sized>(
    lambda: &DMatrix<f64>,
    phi2: f64,
    conditional: TauConditional,
    rng: &mut R,
) -> Vec<f64> {
    let n = lambda.nrows() as f64;
    column_norms(lambda)
        .into_iter()
        .map(|s| {
            if s < DEGENERATE_NORM {
                return sample_tau2_prior(phi2, rng);
            }
            match conditional {
                TauConditional::Exact => sample_gig(1.0 - 0.5 * n, phi2, s, rng),
                TauConditional::Printed => 1.0 / sample_inverse_gaussian((s / phi2).sqrt(), s, rng),
            }
        })
        .collect()
}

/// `tau2 ~ Exp(rate phi2 / 2)`.
pub fn sample_tau2_prior<R: Rng + ?Sized>(phi2: f64, rng: &mut R) -> f64 {
    Exp::new(0.5 * phi2).expect("positive rate").sample(rng)
}

pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    InverseGaussian::new(mean, shape)
        .expect("positive mean and shape")
        .sample(rng)
}

/// `phi2 ~ Gamma(shape c + q, rate d + sum_m tau2_m / 2)`.
pub fn sample_phi2_lasso<R: Rng + ?Sized>(tau2: &[f64], c: f64, d: f64, rng: &mut R) -> f64 {
    let shape = c + tau2.len() as f64;
    let rate = d + 0.5 * tau2.iter().sum::<f64>();
    Gamma::new(shape, 1.0 / rate).expect("positive shape and rate").sample(rng)
}

/// Shrinkage sampler with `q_max` factors and the exact `tau2` conditional.
pub fn run_chain_shrinkage(
    data: &ModelData,
    prior: &PriorSpec,
    cfg: &SamplerConfig,
    q_max: usize,
) -> Result<PosteriorDraws> {
    run_chain_shrinkage_with(data, prior, cfg, q_max, ShrinkageOptions::default())
}

pub fn run_chain_shrinkage_with(
    data: &ModelData,
    prior: &PriorSpec,
    cfg: &SamplerConfig,
    q_max: usize,
    options: ShrinkageOptions,
) -> Result<PosteriorDraws> {
    if !(prior.lasso_c > 0.0 && prior.lasso_d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lasso hyper-parameters must be positive, got c = {}, d = {}",
            prior.lasso_c, prior.lasso_d
        )));
    }
    if let Some(t) = options.frozen_tau2 {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidArgument(format!("frozen tau2 must be positive, got {t}")));
        }
    }
    run(data, prior, cfg, q_max, Mode::Shrinkage(options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        (m, v)
    }

    fn median(xs: &mut [f64]) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_inverse_gaussian(2.0, 3.0, &mut rng))
            .collect();
        let (m, v) = mean_var(&xs);
        let var = 8.0 / 3.0;
        let se_m = (var / xs.len() as f64).sqrt();
        assert!((m - 2.0).abs() < 3.0 * se_m, "mean {m}");
        // Fourth central moment of IG(mu, l): 15 mu^7 / l^3 + 3 var^2.
        let mu4 = 15.0 * 2f64.powi(7) / 27.0 + 3.0 * var * var;
        let se_v = ((mu4 - var * var) / xs.len() as f64).sqrt();
        assert!((v - var).abs() < 3.0 * se_v, "var {v}");
    }

    fn column(n: usize, value: f64) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, value)
    }

    #[test]
    fn exact_conditional_grows_with_loading_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let small = column(49, 0.05);
        let large = column(49, 0.8);
        let mut a: Vec<f64> = (0..20_000)
            .map(|_| sample_tau2(&small, 1.0, TauConditional::Exact, &mut rng)[0])
            .collect();
        let mut b: Vec<f64> = (0..20_000)
            .map(|_| sample_tau2(&large, 1.0, TauConditional::Exact, &mut rng)[0])
            .collect();
        let (ma, mb) = (median(&mut a), median(&mut b));
        assert!(mb > 10.0 * ma, "{ma} vs {mb}");
        // stochastic order: quantiles of b dominate quantiles of a
        for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
            let k = (p * a.len() as f64) as usize;
            assert!(b[k] > a[k]);
        }
    }

    #[test]
    fn printed_conditional_runs_the_other_way() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let small = column(49, 0.05);
        let large = column(49, 0.8);
        let mut a: Vec<f64> = (0..20_000)
            .map(|_| sample_tau2(&small, 1.0, TauConditional::Printed, &mut rng)[0])
            .collect();
        let mut b: Vec<f64> = (0..20_000)
            .map(|_| sample_tau2(&large, 1.0, TauConditional::Printed, &mut rng)[0])
            .collect();
        assert!(median(&mut a) > median(&mut b));
    }

    #[test]
    fn exact_conditional_matches_single_loading_inverse_gaussian() {
        // n = 1: 1/tau2 | lambda ~ InverseGaussian(sqrt(phi2 / lambda^2), phi2)
        let (lam, phi2) = (0.7f64, 2.5f64);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 200_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| 1.0 / sample_tau2(&column(1, lam), phi2, TauConditional::Exact, &mut rng)[0])
            .collect();
        let (m, _) = mean_var(&xs);
        let mean = (phi2 / (lam * lam)).sqrt();
        let se = (mean.powi(3) / phi2 / draws as f64).sqrt();
        assert!((m - mean).abs() < 4.0 * se, "{m} vs {mean}");
    }

    #[test]
    fn exact_conditional_matches_grid_posterior() {
        // Unnormalized posterior of tau2 for a 4-unit column on a log grid.
        let lambda = DMatrix::from_column_slice(4, 1, &[0.3, -0.5, 0.1, 0.9]);
        let s: f64 = column_norms(&lambda)[0];
        let phi2 = 1.7;
        let log_post = |t: f64| -2.0 * t.ln() - s / (2.0 * t) - 0.5 * phi2 * t;
        let (mut z, mut m1) = (0.0, 0.0);
        let h = 1e-4;
        let mut u = -15.0f64;
        while u < 8.0 {
            let t = u.exp();
            let w = (log_post(t) + u).exp();
            z += w;
            m1 += w * t;
            u += h;
        }
        let mean = m1 / z;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 200_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_tau2(&lambda, phi2, TauConditional::Exact, &mut rng)[0])
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m - mean).abs() < 4.0 * (v / draws as f64).sqrt(), "{m} vs {mean}");
    }

    #[test]
    fn degenerate_column_uses_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = DMatrix::zeros(5, 1);
        let phi2 = 4.0;
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_tau2(&zero, phi2, TauConditional::Exact, &mut rng)[0])
            .collect();
        let (m, _) = mean_var(&xs);
        // Exp(rate 2): mean 0.5, sd 0.5
        assert!((m - 0.5).abs() < 3.0 * 0.5 / (xs.len() as f64).sqrt());
        assert!(xs.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn exchangeable_across_columns() {
        let lambda = DMatrix::from_column_slice(3, 2, &[0.1, 0.2, -0.1, 1.0, -0.7, 0.4]);
        let swapped = DMatrix::from_column_slice(3, 2, &[1.0, -0.7, 0.4, 0.1, 0.2, -0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 50_000;
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..draws {
            a += sample_tau2(&lambda, 1.0, TauConditional::Exact, &mut rng)[0];
            b += sample_tau2(&swapped, 1.0, TauConditional::Exact, &mut rng)[1];
        }
        let (a, b) = (a / draws as f64, b / draws as f64);
        assert!((a - b).abs() < 0.05 * a, "{a} vs {b}");
    }

    #[test]
    fn phi2_gamma_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tau2 = [0.5, 2.0, 1.5];
        let (c, d) = (1.0, 1.0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_phi2_lasso(&tau2, c, d, &mut rng))
            .collect();
        let (shape, rate) = (c + 3.0, d + 2.0);
        let (m, _) = mean_var(&xs);
        let se = ((shape / (rate * rate)) / xs.len() as f64).sqrt();
        assert!((m - shape / rate).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn phi2_without_factors_is_the_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c, d) = (2.0, 0.5);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_phi2_lasso(&[], c, d, &mut rng))
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m - c / d).abs() < 3.0 * ((c / (d * d)) / xs.len() as f64).sqrt());
        assert!((v / (c / (d * d)) - 1.0).abs() < 0.05);
    }

    #[test]
    fn phi2_falls_as_tau2_grows_under_rate_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws = 50_000;
        let lo: f64 = (0..draws).map(|_| sample_phi2_lasso(&[0.1, 0.1], 1.0, 1.0, &mut rng)).sum();
        let hi: f64 = (0..draws).map(|_| sample_phi2_lasso(&[5.0, 5.0], 1.0, 1.0, &mut rng)).sum();
        assert!(hi < lo);
    }

    /// Laplace density `(phi / 2) exp(-phi |x|)` recovered by drawing
    /// `tau2 ~ Exp(phi2 / 2)` then `lambda ~ N(0, tau2)`.
    #[test]
    fn scale_mixture_reproduces_laplace() {
        use rand_distr::StandardNormal;
        let phi = 1.3f64;
        let phi2 = phi * phi;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 2_000_000;
        let width = 0.1;
        let bins = 100;
        let mut counts = vec![0usize; bins];
        for _ in 0..draws {
            let t = sample_tau2_prior(phi2, &mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = t.sqrt() * z;
            if (-5.0..5.0).contains(&x) {
                counts[((x + 5.0) / width) as usize] += 1;
            }
        }
        let mut gap = 0.0f64;
        for (b, &c) in counts.iter().enumerate() {
            let lo = -5.0 + b as f64 * width;
            let hi = lo + width;
            // exact bin mass of the Laplace law
            let cdf = |x: f64| {
                if x < 0.0 {
                    0.5 * (phi * x).exp()
                } else {
                    1.0 - 0.5 * (-phi * x).exp()
                }
            };
            let exact = (cdf(hi) - cdf(lo)) / width;
            gap = gap.max((c as f64 / draws as f64 / width - exact).abs());
        }
        assert!(gap < 0.01, "sup gap {gap}");
    }
}
