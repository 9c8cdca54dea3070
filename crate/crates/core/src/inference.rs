//! Posterior summaries, volatility recovery and trace export.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::sampler::ModelData;

/// Fewest draws [`summarize`] accepts.
pub const MIN_SUMMARY_DRAWS: usize = 100;

/// Type-7 sample quantile (linear interpolation between order statistics
/// `floor(h)` and `floor(h) + 1`, `h = (len - 1) p`) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let j = h.floor() as usize;
    let frac = h - j as f64;
    if j + 1 >= sorted.len() {
        return sorted[j];
    }
    sorted[j] + frac * (sorted[j + 1] - sorted[j])
}

/// Type-7 quantile by selection; reorders `buf`.
pub fn quantile_select(buf: &mut [f64], p: f64) -> f64 {
    assert!(!buf.is_empty(), "quantile of an empty sample");
    let h = (buf.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let j = h.floor() as usize;
    let frac = h - j as f64;
    let (_, &mut a, rest) = buf.select_nth_unstable_by(j, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return a;
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Effective sample size from batch means.
    pub ess: f64,
}

pub fn summarize_series(name: &str, values: &[f64]) -> Result<ParameterSummary> {
    if values.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::TooFewDraws {
            have: values.len(),
            need: MIN_SUMMARY_DRAWS,
        });
    }
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let se = batch_means_se(values);
    let ess = if se > 0.0 { (var / (se * se)).min(len) } else { len };
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        median: quantile_sorted(&sorted, 0.5),
        lo: quantile_sorted(&sorted, 0.025),
        hi: quantile_sorted(&sorted, 0.975),
        ess,
    })
}

/// Median and central 95% interval of every scalar parameter.
pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<ParameterSummary>> {
    draws
        .parameter_names()
        .iter()
        .map(|name| summarize_series(name, &draws.parameter(name)?))
        .collect()
}

/// Monte Carlo standard error of the mean using `floor(sqrt(len))` batches.
pub fn batch_means_se(values: &[f64]) -> f64 {
    let len = values.len();
    let batches = (len as f64).sqrt().floor() as usize;
    if batches < 2 {
        return f64::NAN;
    }
    let size = len / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Text table with one column per parameter and median / CI rows.
pub fn summary_table(rows: &[ParameterSummary]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(18);
    let mut out = format!("{:<10}", "");
    for r in rows {
        out.push_str(&format!(" {:>width$}", r.name));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", "median"));
    for r in rows {
        out.push_str(&format!(" {:>width$.4}", r.median));
    }
    out.push('\n');
    out.push_str(&format!("{:<10}", "95% CI"));
    for r in rows {
        let ci = format!("[{:.3}, {:.3}]", r.lo, r.hi);
        out.push_str(&format!(" {ci:>width$}"));
    }
    out.push('\n');
    out
}

/// `h*_t(s_i)` of draw `r`:
/// `rho M Y*_t + gamma Y*_{t-1} + delta M Y*_{t-1} + X_t beta + Lambda f_t`.
pub fn hstar_draw(draws: &PosteriorDraws, data: &ModelData, r: usize) -> Result<DMatrix<f64>> {
    check_dims(draws, data)?;
    if !draws.has_common() {
        return Err(Error::MissingTrace("loadings and factors"));
    }
    let mut h = draws.common(r)?;
    add_linear_part(
        &mut h,
        data,
        draws.rho[r],
        draws.gamma[r],
        draws.delta[r],
        draws.beta_draw(r),
    );
    Ok(h)
}

fn add_linear_part(h: &mut DMatrix<f64>, data: &ModelData, rho: f64, gamma: f64, delta: f64, beta: &[f64]) {
    for t in 0..data.periods() {
        for i in 0..data.n() {
            let xb: f64 = data.x.row(i, t).iter().zip(beta).map(|(x, b)| x * b).sum();
            h[(i, t)] += rho * data.my[(i, t)] + gamma * data.ylag[(i, t)] + delta * data.mylag[(i, t)] + xb;
        }
    }
}

fn check_dims(draws: &PosteriorDraws, data: &ModelData) -> Result<()> {
    if draws.n != data.n() || draws.periods != data.periods() || draws.k != data.k() {
        return Err(Error::Dimension(format!(
            "draws are for n={}, T={}, k={}; data has n={}, T={}, k={}",
            draws.n,
            draws.periods,
            draws.k,
            data.n(),
            data.periods(),
            data.k()
        )));
    }
    Ok(())
}

/// Cellwise posterior summary of the log-volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityField {
    pub median: DMatrix<f64>,
    pub lo: DMatrix<f64>,
    pub hi: DMatrix<f64>,
    /// Average over cells of the median field.
    pub overall_average: f64,
    /// 2.5% and 97.5% quantiles over cells of the median field.
    pub overall_interval: (f64, f64),
    /// Field evaluated at the posterior means.
    pub plug_in: DMatrix<f64>,
}

/// Per-draw `h*` summarized cell by cell across draws.
pub fn recover_volatility(draws: &PosteriorDraws, data: &ModelData) -> Result<VolatilityField> {
    check_dims(draws, data)?;
    if draws.is_empty() {
        return Err(Error::TooFewDraws { have: 0, need: 1 });
    }
    if !draws.has_common() {
        return Err(Error::MissingTrace("loadings and factors"));
    }
    let n = data.n();
    let periods = data.periods();
    let r_len = draws.len();
    let cells: Vec<(f64, f64, f64)> = (0..n * periods)
        .into_par_iter()
        .map_init(
            || vec![0.0; r_len],
            |buf, cell| {
                let (i, t) = (cell % n, cell / n);
                let my = data.my[(i, t)];
                let yl = data.ylag[(i, t)];
                let ml = data.mylag[(i, t)];
                let x = data.x.row(i, t);
                for (r, slot) in buf.iter_mut().enumerate() {
                    let xb: f64 = x.iter().zip(draws.beta_draw(r)).map(|(a, b)| a * b).sum();
                    *slot = draws.rho[r] * my
                        + draws.gamma[r] * yl
                        + draws.delta[r] * ml
                        + xb
                        + draws.common_cell(r, i, t);
                }
                let lo = quantile_select(buf, 0.025);
                let med = quantile_select(buf, 0.5);
                let hi = quantile_select(buf, 0.975);
                (med, lo, hi)
            },
        )
        .collect();
    let median = DMatrix::from_iterator(n, periods, cells.iter().map(|c| c.0));
    let lo = DMatrix::from_iterator(n, periods, cells.iter().map(|c| c.1));
    let hi = DMatrix::from_iterator(n, periods, cells.iter().map(|c| c.2));

    let mut sorted: Vec<f64> = median.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let overall_average = median.mean();
    let overall_interval = (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975));

    let m = &draws.means;
    let mut plug_in = m.common.clone();
    add_linear_part(&mut plug_in, data, m.rho, m.gamma, m.delta, m.beta.as_slice());

    Ok(VolatilityField {
        median,
        lo,
        hi,
        overall_average,
        overall_interval,
        plug_in,
    })
}

/// One row per retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    pub iteration: Vec<usize>,
    pub value: Vec<f64>,
    pub running_mean: Vec<f64>,
}

pub fn trace(draws: &PosteriorDraws, name: &str) -> Result<Trace> {
    trace_series(name, &draws.iteration, draws.parameter(name)?)
}

/// Trace of an arbitrary draw series.
pub fn trace_series(name: &str, iteration: &[usize], value: Vec<f64>) -> Result<Trace> {
    if value.is_empty() {
        return Err(Error::TooFewDraws { have: 0, need: 1 });
    }
    if iteration.len() != value.len() {
        return Err(Error::Dimension(format!(
            "{} iterations for {} values",
            iteration.len(),
            value.len()
        )));
    }
    let mut sum = 0.0;
    let running_mean = value
        .iter()
        .enumerate()
        .map(|(j, v)| {
            sum += v;
            sum / (j + 1) as f64
        })
        .collect();
    Ok(Trace {
        name: name.to_string(),
        iteration: iteration.to_vec(),
        value,
        running_mean,
    })
}

/// Traces for each requested parameter.
pub fn trace_export(draws: &PosteriorDraws, names: &[&str]) -> Result<Vec<Trace>> {
    names.iter().map(|n| trace(draws, n)).collect()
}
