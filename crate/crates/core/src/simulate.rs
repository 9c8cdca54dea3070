//! Synthetic panels from the data generating process, drawn through the
//! reduced form `Y*_t = S^{-1}(gamma Y*_{t-1} + delta M Y*_{t-1} + X_t beta + Lambda f_t + eps*_t)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{require_stable, SpatialParams};
use crate::panel::{Covariates, PanelData};
use crate::weights::{queen_contiguity, WeightMatrix};

/// Law of each covariate entry, drawn independently over units, periods and
/// columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for CovariateLaw {
    fn default() -> Self {
        CovariateLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl CovariateLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            CovariateLaw::Normal { mean, sd } => mean + sd * normal(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CovariateLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            CovariateLaw::Normal { mean, .. } => mean,
        }
    }
}

/// Loadings and factors are independent centred normals with these
/// standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorLaw {
    pub loading_sd: f64,
    pub factor_sd: f64,
}

impl Default for FactorLaw {
    fn default() -> Self {
        Self {
            loading_sd: 1.0,
            factor_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub periods: usize,
    pub q: usize,
    pub params: SpatialParams,
    pub beta: Vec<f64>,
    pub weights: WeightMatrix,
    /// Periods simulated from a zero start and discarded; the last one
    /// becomes `Y_0`.
    pub burn_in_periods: usize,
    pub seed: u64,
    pub covariate_law: CovariateLaw,
    pub factor_law: FactorLaw,
}

impl SimConfig {
    /// 49 units on a row-normalized 7x7 queen lattice, two factors,
    /// `(rho, gamma, delta) = (0.16, 0.15, 0.2)`, one Uniform(0, 1)
    /// covariate with coefficient -2.
    pub fn benchmark(periods: usize, seed: u64) -> Self {
        let weights = queen_contiguity(7, 7)
            .expect("7x7 lattice")
            .row_normalize();
        Self {
            periods,
            q: 2,
            params: SpatialParams::new(0.16, 0.15, 0.2),
            beta: vec![-2.0],
            weights,
            burn_in_periods: 200,
            seed,
            covariate_law: CovariateLaw::default(),
            factor_law: FactorLaw::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::InvalidArgument("need at least one period".into()));
        }
        let FactorLaw {
            loading_sd,
            factor_sd,
        } = self.factor_law;
        if !(loading_sd >= 0.0 && factor_sd >= 0.0) {
            return Err(Error::InvalidArgument("factor law needs non-negative scales".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("beta must be finite".into()));
        }
        require_stable(&self.params, &self.weights)?;
        Ok(())
    }
}

/// Latent quantities behind a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub params: SpatialParams,
    pub beta: Vec<f64>,
    /// `n x q`.
    pub lambda: DMatrix<f64>,
    /// `q x T`.
    pub factors: DMatrix<f64>,
    /// Log-volatility `h*_t(s_i)`, `n x T`.
    pub hstar: DMatrix<f64>,
    /// `log eps_t(s_i)^2`, `n x T`.
    pub epsstar: DMatrix<f64>,
    pub ystar: DMatrix<f64>,
    pub ystar0: DVector<f64>,
}

impl Truth {
    pub fn mean_hstar(&self) -> f64 {
        self.hstar.mean()
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub panel: PanelData,
    pub truth: Truth,
}

// Independent streams so that changing one law leaves the other draws intact.
const STREAM_COVARIATES: u64 = 1;
const STREAM_LOADINGS: u64 = 2;
const STREAM_FACTORS: u64 = 3;
const STREAM_ERRORS: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A standard normal draw that is never exactly zero.
fn nonzero_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let e: f64 = StandardNormal.sample(rng);
        if e != 0.0 {
            return e;
        }
    }
}

pub fn simulate_panel(cfg: &SimConfig) -> Result<Simulated> {
    cfg.validate()?;
    let n = cfg.n();
    let k = cfg.k();
    let q = cfg.q;
    let periods = cfg.periods;
    let SpatialParams { rho, gamma, delta } = cfg.params;
    let m = cfg.weights.matrix();
    let lu = cfg.weights.build_s(rho)?.lu();

    let mut rng_x = stream(cfg.seed, STREAM_COVARIATES);
    let mut rng_l = stream(cfg.seed, STREAM_LOADINGS);
    let mut rng_f = stream(cfg.seed, STREAM_FACTORS);
    let mut rng_e = stream(cfg.seed, STREAM_ERRORS);

    let FactorLaw {
        loading_sd,
        factor_sd,
    } = cfg.factor_law;
    let lambda = DMatrix::from_fn(n, q, |_, _| {
        loading_sd * normal(&mut rng_l)
    });

    let total = cfg.burn_in_periods + periods;
    let mut prev = DVector::zeros(n);
    let mut ystar0 = DVector::zeros(n);
    let mut y0 = DVector::from_element(n, 1.0);
    let mut x = Covariates::zeros(n, periods, k);
    let mut factors = DMatrix::zeros(q, periods);
    let mut ystar = DMatrix::zeros(n, periods);
    let mut hstar = DMatrix::zeros(n, periods);
    let mut epsstar = DMatrix::zeros(n, periods);
    let mut y = DMatrix::zeros(n, periods);

    for step in 0..total {
        let mut xt = vec![0.0; n * k];
        for v in xt.iter_mut() {
            *v = cfg.covariate_law.sample(&mut rng_x);
        }
        let f = DVector::from_fn(q, |_, _| factor_sd * normal(&mut rng_f));
        let eps = DVector::from_fn(n, |_, _| nonzero_normal(&mut rng_e));
        let common = &lambda * &f;
        let mprev = m * &prev;

        // Everything on the right-hand side except eps*, i.e. h*_t - rho M Y*_t.
        let mut base = DVector::zeros(n);
        for i in 0..n {
            let xb: f64 = xt[i * k..(i + 1) * k].iter().zip(&cfg.beta).map(|(a, b)| a * b).sum();
            base[i] = gamma * prev[i] + delta * mprev[i] + xb + common[i];
        }
        let es = eps.map(|e| (e * e).ln());
        let rhs = &base + &es;
        let cur = lu
            .solve(&rhs)
            .ok_or(Error::Dimension("singular S(rho)".into()))?;

        if step + 1 == cfg.burn_in_periods {
            ystar0 = cur.clone();
            y0 = eps.map(f64::signum).component_mul(&cur.map(|v| (0.5 * v).exp()));
        }
        if step >= cfg.burn_in_periods {
            let t = step - cfg.burn_in_periods;
            let mcur = m * &cur;
            for i in 0..n {
                x.row_mut(i, t).copy_from_slice(&xt[i * k..(i + 1) * k]);
                ystar[(i, t)] = cur[i];
                epsstar[(i, t)] = es[i];
                hstar[(i, t)] = rho * mcur[i] + base[i];
                y[(i, t)] = eps[i].signum() * (0.5 * cur[i]).exp();
            }
            factors.set_column(t, &f);
        }
        prev = cur;
    }

    let panel = PanelData::new(y, y0, x)?;
    Ok(Simulated {
        panel,
        truth: Truth {
            params: cfg.params,
            beta: cfg.beta.clone(),
            lambda,
            factors,
            hstar,
            epsstar,
            ystar,
            ystar0,
        },
    })
}
