use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::draws::{Algorithm, ChainManifest, DrawsBuilder, PosteriorDraws};
use crate::error::{Error, Result};
use crate::mixture::{ComponentKernel, MixtureTable};
use crate::sampler::data::ModelData;
use crate::sampler::likelihood::log_likelihood_cached;
use crate::sampler::prior::{PriorPrecision, PriorSpec};
use crate::sampler::state::ChainState;
use crate::sampler::steps::{
    cell_precisions, factor_residual, sample_beta_with, sample_factors_with, sample_loadings_with,
    sample_phi_with, sample_rho_mh_with, sample_z_with, LoadingPrior,
};
use crate::shrinkage::{sample_phi2_lasso, sample_tau2, ShrinkageOptions, ShrinkageState};

/// Chain length, thinning and the `rho` proposal schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial random-walk step for `rho`.
    pub rho_step: f64,
    /// Acceptance band the step is steered into during burn-in.
    pub adapt_band: (f64, f64),
    pub adapt_window: usize,
    /// Multiplicative step change per window.
    pub adapt_factor: f64,
    pub seed: u64,
    /// Keep per-draw loadings and factors (needed for per-draw volatility).
    pub store_factors: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            burn_in: 20_000,
            thin: 1,
            rho_step: 0.02,
            adapt_band: (0.40, 0.60),
            adapt_window: 100,
            adapt_factor: 1.1,
            seed: 0,
            store_factors: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::InvalidArgument("thin and adapt_window must be positive".into()));
        }
        if !(self.rho_step > 0.0 && self.adapt_factor > 1.0) {
            return Err(Error::InvalidArgument("rho_step > 0 and adapt_factor > 1 required".into()));
        }
        let (lo, hi) = self.adapt_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("bad adaptation band ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Number of draws a run retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Tracks acceptance of the `rho` update and steers the step size during
/// burn-in; the step is frozen afterwards.
#[derive(Debug, Clone)]
pub(crate) struct StepAdapter {
    pub step: f64,
    window_accepts: usize,
    window_len: usize,
    pub history: Vec<f64>,
    pub burn_accepts: usize,
    pub main_accepts: usize,
    pub main_proposals: usize,
}

impl StepAdapter {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            window_accepts: 0,
            window_len: 0,
            history: Vec::new(),
            burn_accepts: 0,
            main_accepts: 0,
            main_proposals: 0,
        }
    }

    pub fn record(&mut self, accepted: bool, in_burn_in: bool, cfg: &SamplerConfig) {
        if !in_burn_in {
            self.main_proposals += 1;
            self.main_accepts += accepted as usize;
            return;
        }
        self.burn_accepts += accepted as usize;
        self.window_accepts += accepted as usize;
        self.window_len += 1;
        if self.window_len == cfg.adapt_window {
            let rate = self.window_accepts as f64 / self.window_len as f64;
            self.history.push(rate);
            if rate < cfg.adapt_band.0 {
                self.step /= cfg.adapt_factor;
            } else if rate > cfg.adapt_band.1 {
                self.step *= cfg.adapt_factor;
            }
            self.window_accepts = 0;
            self.window_len = 0;
        }
    }
}

pub(crate) enum Mode {
    Standard,
    Shrinkage(ShrinkageOptions),
}

/// Standard sampler: cycles the indicator, `beta`, factor, loading, `phi`
/// and `rho` updates. With `q = 0` the factor and loading updates are
/// skipped.
pub fn run_chain(data: &ModelData, prior: &PriorSpec, cfg: &SamplerConfig, q: usize) -> Result<PosteriorDraws> {
    run(data, prior, cfg, q, Mode::Standard)
}

pub(crate) fn run(
    data: &ModelData,
    prior: &PriorSpec,
    cfg: &SamplerConfig,
    q: usize,
    mode: Mode,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    prior.validate(data.k(), q)?;
    let started = Instant::now();
    let n = data.n();
    let periods = data.periods();
    let table = MixtureTable::standard();
    let kernel = ComponentKernel::new(&table);
    let pp = PriorPrecision::new(prior)?;
    let interval = prior.rho_interval(&data.weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState::initial(n, periods, prior, &table, &mut rng);

    let (algorithm, mut lasso) = match &mode {
        Mode::Standard => (Algorithm::Standard, None),
        Mode::Shrinkage(opts) => (
            Algorithm::Shrinkage,
            Some({
                let mut s = ShrinkageState::initial(q, prior);
                if let Some(t) = opts.frozen_tau2 {
                    s.tau2.fill(t);
                }
                (s, *opts)
            }),
        ),
    };

    let manifest = ChainManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        algorithm,
        n,
        periods,
        k: data.k(),
        q,
        seed: cfg.seed,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        retained: 0,
        enforce_stability: prior.enforce_stability,
        rho_interval: interval,
        rho_step_initial: cfg.rho_step,
        rho_step_final: cfg.rho_step,
        acceptance_rate: 0.0,
        burn_in_acceptance_rate: 0.0,
        acceptance_history: Vec::new(),
        runtime_seconds: 0.0,
    };
    let mut builder = DrawsBuilder::new(
        n,
        periods,
        data.k(),
        q,
        cfg.store_factors,
        lasso.is_some(),
        manifest,
    );
    builder.reserve(cfg.retained());
    let mut adapter = StepAdapter::new(cfg.rho_step);
    let mut log_det_cache = None;

    for g in 1..=cfg.iterations {
        sample_z_with(data, &mut state, &table, &kernel, &mut rng);
        let prec = cell_precisions(&state, &table);
        sample_beta_with(data, &mut state, &table, &pp, &prec, &mut rng)?;
        if q > 0 {
            let y = factor_residual(data, &state, &table);
            sample_factors_with(&mut state, &y, &prec, &mut rng)?;
            match &mut lasso {
                None => {
                    let lp = LoadingPrior::Normal {
                        precision: &pp.lambda,
                        potential: &pp.lambda_h,
                    };
                    sample_loadings_with(&mut state, &y, &prec, &lp, &mut rng)?;
                }
                Some((shrink, opts)) => {
                    let lp = LoadingPrior::Scales(&shrink.tau2);
                    sample_loadings_with(&mut state, &y, &prec, &lp, &mut rng)?;
                    if opts.frozen_tau2.is_none() {
                        shrink.tau2 = sample_tau2(&state.lambda, shrink.phi2, opts.tau_conditional, &mut rng);
                        shrink.phi2 = sample_phi2_lasso(&shrink.tau2, shrink.c, shrink.d, &mut rng);
                    }
                }
            }
        }
        sample_phi_with(data, &mut state, &table, &pp, &prec, prior.enforce_stability, &mut rng)?;
        let update = sample_rho_mh_with(
            data,
            &mut state,
            &table,
            &prec,
            interval,
            prior.enforce_stability,
            adapter.step,
            &mut log_det_cache,
            &mut rng,
        );
        adapter.record(update.accepted, g <= cfg.burn_in, cfg);

        if !state.is_finite() {
            return Err(Error::NonFiniteDraw {
                iteration: g,
                block: "state",
            });
        }
        if let Some((shrink, _)) = &lasso {
            if !shrink.is_valid() {
                return Err(Error::NonFiniteDraw {
                    iteration: g,
                    block: "shrinkage",
                });
            }
        }
        if g > cfg.burn_in && (g - cfg.burn_in) % cfg.thin == 0 {
            let ll = log_likelihood_cached(data, &state, &table, &mut log_det_cache)?;
            if !ll.is_finite() {
                return Err(Error::NonFiniteDraw {
                    iteration: g,
                    block: "log-likelihood",
                });
            }
            let extras = lasso.as_ref().map(|(s, _)| (s.tau2.as_slice(), s.phi2));
            builder.push(g, &state, ll, &table, extras);
        }
    }

    let m = builder.manifest_mut();
    m.rho_step_final = adapter.step;
    m.acceptance_rate = ratio(adapter.main_accepts, adapter.main_proposals);
    m.burn_in_acceptance_rate = ratio(adapter.burn_accepts, cfg.burn_in);
    m.acceptance_history = adapter.history;
    m.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(builder.finish())
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}
