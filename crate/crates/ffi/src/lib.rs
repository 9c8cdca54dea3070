//! C interface to the `logarch` sampler.
//!
//! Every function returns a [`LogarchStatus`]; on failure the message is
//! available from [`logarch_last_error`] on the same thread. Handles are
//! opaque and released with their `_free` function. Matrices cross the
//! boundary row-major with units as rows.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use logarch::inference::{recover_volatility, summarize_series};
use logarch::panel::DEFAULT_FLOOR;
use logarch::sampler::{run_chain, PriorFile};
use logarch::selection::{compute_dic_with, DicLikelihood};
use logarch::shrinkage::run_chain_shrinkage;
use logarch::simulate::{simulate_panel, SimConfig};
use logarch::weights::queen_contiguity;
use logarch::{Covariates, Error, ModelData, PanelData, PosteriorDraws, SamplerConfig, SpatialParams, WeightMatrix};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogarchStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    Unstable = 5,
    Numerical = 6,
    StabilityBudget = 7,
    UnknownParameter = 8,
    Io = 9,
    Parse = 10,
    Panic = 11,
}

impl From<&Error> for LogarchStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::NonFiniteDraw { .. } => LogarchStatus::NonFinite,
            Error::Dimension(_) => LogarchStatus::Dimension,
            Error::InvalidArgument(_)
            | Error::NegativeWeight { .. }
            | Error::TooFewDraws { .. }
            | Error::MissingTrace(_) => LogarchStatus::InvalidArgument,
            Error::RhoOutOfSupport { .. } | Error::Unstable(_) => LogarchStatus::Unstable,
            Error::NotPositiveDefinite { .. } => LogarchStatus::Numerical,
            Error::StabilityBudget { .. } => LogarchStatus::StabilityBudget,
            Error::UnknownParameter(_) => LogarchStatus::UnknownParameter,
            Error::Io(_) => LogarchStatus::Io,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => LogarchStatus::Parse,
        }
    }
}

/// Opaque weight matrix.
pub struct LogarchWeights(WeightMatrix);

/// Opaque panel of outcomes, initial values and covariates.
pub struct LogarchPanel(PanelData);

/// Opaque fitted chain together with the data it was fitted on.
pub struct LogarchFit {
    draws: PosteriorDraws,
    data: ModelData,
}

/// Settings for [`logarch_simulate`]. `beta` points at `k` coefficients.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LogarchSimOptions {
    pub periods: usize,
    pub q: usize,
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: *const f64,
    pub k: usize,
    pub seed: u64,
}

/// Settings for [`logarch_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LogarchFitOptions {
    /// Number of factors, or the maximum number when `shrinkage` is set.
    pub q: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub shrinkage: bool,
    /// Optional JSON prior, NUL-terminated. Null means the diffuse prior.
    pub prior_json: *const c_char,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LogarchSummary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LogarchDic {
    pub dic: f64,
    pub mean_deviance: f64,
    pub plug_in_deviance: f64,
    pub p_d: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LogarchStatus, msg: impl Into<String>) -> LogarchStatus {
    set_error(msg.into());
    status
}

type Outcome = Result<(), LogarchStatus>;

fn null(what: &str) -> LogarchStatus {
    fail(LogarchStatus::NullPointer, format!("{what} is null"))
}

fn core(e: Error) -> LogarchStatus {
    let status = LogarchStatus::from(&e);
    fail(status, e.to_string())
}

/// Run `f`, clearing the last error first and turning panics into
/// [`LogarchStatus::Panic`].
fn guard<F: FnOnce() -> Outcome>(f: F) -> LogarchStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LogarchStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(LogarchStatus::Panic, msg)
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], LogarchStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], LogarchStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, LogarchStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) -> Outcome {
    let (n, periods) = m.shape();
    if out.len() != n * periods {
        return Err(fail(
            LogarchStatus::Dimension,
            format!("buffer holds {} values, expected {n}*{periods}", out.len()),
        ));
    }
    for i in 0..n {
        for t in 0..periods {
            out[i * periods + t] = m[(i, t)];
        }
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn logarch_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn logarch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Queen contiguity on a `rows x cols` lattice, optionally row-normalized.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_weights_queen(
    rows: usize,
    cols: usize,
    row_normalize: bool,
    out: *mut *mut LogarchWeights,
) -> LogarchStatus {
    guard(|| {
        let w = queen_contiguity(rows, cols).map_err(core)?;
        let w = if row_normalize { w.row_normalize() } else { w };
        put(out, LogarchWeights(w))
    })
}

/// Weight matrix from an `n x n` row-major buffer.
///
/// # Safety
/// `m` must point at `n * n` doubles and `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_weights_from_dense(
    n: usize,
    m: *const f64,
    row_normalize: bool,
    out: *mut *mut LogarchWeights,
) -> LogarchStatus {
    guard(|| {
        let values = input(m, n * n, "weights")?;
        let w = WeightMatrix::new(DMatrix::from_row_slice(n, n, values)).map_err(core)?;
        let w = if row_normalize { w.row_normalize() } else { w };
        put(out, LogarchWeights(w))
    })
}

/// # Safety
/// `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn logarch_weights_n(w: *const LogarchWeights, n: *mut usize) -> LogarchStatus {
    guard(|| {
        let w = handle(w, "weights")?;
        output(n, 1, "n")?[0] = w.0.n();
        Ok(())
    })
}

/// # Safety
/// `w` must come from this library and is invalid afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn logarch_weights_free(w: *mut LogarchWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Panel from row-major buffers: `y` is `n x periods`, `y0` has `n`
/// values, `x` is `n x periods x k` with `x[(i * periods + t) * k + c]`.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `x` may be null when
/// `k == 0`.
#[no_mangle]
pub unsafe extern "C" fn logarch_panel_new(
    n: usize,
    periods: usize,
    k: usize,
    y: *const f64,
    y0: *const f64,
    x: *const f64,
    out: *mut *mut LogarchPanel,
) -> LogarchStatus {
    guard(|| {
        let y = input(y, n * periods, "y")?;
        let y0 = input(y0, n, "y0")?;
        let x = input(x, n * periods * k, "x")?;
        let mut cov = vec![0.0; n * periods * k];
        for i in 0..n {
            for t in 0..periods {
                let src = (i * periods + t) * k;
                let dst = (t * n + i) * k;
                cov[dst..dst + k].copy_from_slice(&x[src..src + k]);
            }
        }
        let cov = Covariates::new(n, periods, k, cov).map_err(core)?;
        let panel = PanelData::new(
            DMatrix::from_row_slice(n, periods, y),
            DVector::from_column_slice(y0),
            cov,
        )
        .map_err(core)?;
        put(out, LogarchPanel(panel))
    })
}

/// Units, periods and covariates of a panel. Any output may be null.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn logarch_panel_shape(
    p: *const LogarchPanel,
    n: *mut usize,
    periods: *mut usize,
    k: *mut usize,
) -> LogarchStatus {
    guard(|| {
        let p = &handle(p, "panel")?.0;
        for (slot, v) in [(n, p.n()), (periods, p.periods()), (k, p.k())] {
            if let Some(s) = slot.as_mut() {
                *s = v;
            }
        }
        Ok(())
    })
}

/// Copy the `n x periods` outcomes into `y`.
///
/// # Safety
/// `y` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn logarch_panel_outcomes(p: *const LogarchPanel, y: *mut f64, len: usize) -> LogarchStatus {
    guard(|| {
        let p = &handle(p, "panel")?.0;
        write_matrix(&p.y, output(y, len, "y")?)
    })
}

/// # Safety
/// `p` must come from this library and is invalid afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn logarch_panel_free(p: *mut LogarchPanel) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Simulate a panel on `weights`. Covariates are Uniform(0, 1); loadings
/// and factors standard normal.
///
/// # Safety
/// `opts.beta` must point at `opts.k` doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_simulate(
    weights: *const LogarchWeights,
    opts: *const LogarchSimOptions,
    out: *mut *mut LogarchPanel,
) -> LogarchStatus {
    guard(|| {
        let w = handle(weights, "weights")?;
        let o = handle(opts, "options")?;
        let beta = input(o.beta, o.k, "beta")?.to_vec();
        let mut cfg = SimConfig::benchmark(o.periods, o.seed);
        cfg.weights = w.0.clone();
        cfg.q = o.q;
        cfg.params = SpatialParams::new(o.rho, o.gamma, o.delta);
        cfg.beta = beta;
        let sim = simulate_panel(&cfg).map_err(core)?;
        put(out, LogarchPanel(sim.panel))
    })
}

/// Fit one chain. With `opts.shrinkage` the Lasso sampler runs with
/// `opts.q` as the maximum number of factors.
///
/// # Safety
/// Handles must be live and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit(
    panel: *const LogarchPanel,
    weights: *const LogarchWeights,
    opts: *const LogarchFitOptions,
    out: *mut *mut LogarchFit,
) -> LogarchStatus {
    guard(|| {
        let p = &handle(panel, "panel")?.0;
        let w = &handle(weights, "weights")?.0;
        let o = handle(opts, "options")?;
        let prior_file: PriorFile = if o.prior_json.is_null() {
            PriorFile::default()
        } else {
            let text = CStr::from_ptr(o.prior_json)
                .to_str()
                .map_err(|_| fail(LogarchStatus::Parse, "prior is not UTF-8"))?;
            serde_json::from_str(text).map_err(|e| core(e.into()))?
        };
        let prior = prior_file.resolve(p.k(), o.q).map_err(core)?;
        let (data, _) = ModelData::from_panel(p, w.clone(), DEFAULT_FLOOR).map_err(core)?;
        let cfg = SamplerConfig {
            iterations: o.iterations,
            burn_in: o.burn_in,
            thin: o.thin,
            seed: o.seed,
            ..Default::default()
        };
        let draws = if o.shrinkage {
            run_chain_shrinkage(&data, &prior, &cfg, o.q)
        } else {
            run_chain(&data, &prior, &cfg, o.q)
        }
        .map_err(core)?;
        put(out, LogarchFit { draws, data })
    })
}

/// Number of retained draws.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_len(fit: *const LogarchFit, len: *mut usize) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        output(len, 1, "len")?[0] = f.draws.len();
        Ok(())
    })
}

/// Post burn-in acceptance rate of the `rho` proposal.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_acceptance_rate(fit: *const LogarchFit, rate: *mut f64) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        output(rate, 1, "rate")?[0] = f.draws.manifest.acceptance_rate;
        Ok(())
    })
}

/// Copy the retained draws of a named parameter (`rho`, `gamma`, `delta`,
/// `beta_1`, ..., `tau2_1`, ..., `phi2`) into `values`.
///
/// # Safety
/// `name` must be NUL-terminated and `values` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_parameter(
    fit: *const LogarchFit,
    name: *const c_char,
    values: *mut f64,
    len: usize,
) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let series = named(f, name)?;
        let out = output(values, len, "values")?;
        if out.len() != series.len() {
            return Err(fail(
                LogarchStatus::Dimension,
                format!("buffer holds {} values, chain has {}", out.len(), series.len()),
            ));
        }
        out.copy_from_slice(&series);
        Ok(())
    })
}

unsafe fn named(f: &LogarchFit, name: *const c_char) -> Result<Vec<f64>, LogarchStatus> {
    if name.is_null() {
        return Err(null("name"));
    }
    let name = CStr::from_ptr(name)
        .to_str()
        .map_err(|_| fail(LogarchStatus::InvalidArgument, "name is not UTF-8"))?;
    f.draws.parameter(name).map_err(core)
}

/// Posterior mean, sd, median and 95% interval of a named parameter.
///
/// # Safety
/// `name` must be NUL-terminated and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_summary(
    fit: *const LogarchFit,
    name: *const c_char,
    out: *mut LogarchSummary,
) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let series = named(f, name)?;
        let s = summarize_series("", &series).map_err(core)?;
        let slot = output(out, 1, "summary")?;
        slot[0] = LogarchSummary {
            mean: s.mean,
            sd: s.sd,
            median: s.median,
            lo: s.lo,
            hi: s.hi,
        };
        Ok(())
    })
}

/// Deviance information criterion of the chain. With `marginal` set the
/// mixture indicators are summed out of the likelihood.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_dic(fit: *const LogarchFit, marginal: bool, out: *mut LogarchDic) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let kind = if marginal {
            DicLikelihood::Marginal
        } else {
            DicLikelihood::Conditional
        };
        let t = compute_dic_with(&f.draws, &f.data, kind).map_err(core)?;
        output(out, 1, "dic")?[0] = LogarchDic {
            dic: t.dic,
            mean_deviance: t.mean_deviance,
            plug_in_deviance: t.plug_in_deviance,
            p_d: t.p_d,
        };
        Ok(())
    })
}

/// Cellwise median and 95% interval of the log-volatility, each an
/// `n x periods` row-major buffer of `len` doubles. `overall` receives the
/// average of the median field and may be null.
///
/// # Safety
/// Buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_volatility(
    fit: *const LogarchFit,
    median: *mut f64,
    lo: *mut f64,
    hi: *mut f64,
    len: usize,
    overall: *mut f64,
) -> LogarchStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        let field = recover_volatility(&f.draws, &f.data).map_err(core)?;
        write_matrix(&field.median, output(median, len, "median")?)?;
        write_matrix(&field.lo, output(lo, len, "lo")?)?;
        write_matrix(&field.hi, output(hi, len, "hi")?)?;
        if let Some(o) = overall.as_mut() {
            *o = field.overall_average;
        }
        Ok(())
    })
}

/// # Safety
/// `fit` must come from this library and is invalid afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn logarch_fit_free(fit: *mut LogarchFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
