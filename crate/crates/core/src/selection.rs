//! Deviance information criterion and the scan over the number of factors.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::draws::{ChainManifest, PosteriorDraws};
use crate::error::{Error, Result};
use crate::mixture::MixtureTable;
use crate::sampler::{
    log_likelihood_with, marginal_log_likelihood, run_chain, ModelData, PriorFile, SamplerConfig,
};

/// The two deviance terms and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicTerms {
    /// `-2` times the average retained log-likelihood.
    pub mean_deviance: f64,
    /// `-2` times the log-likelihood at the posterior means.
    pub plug_in_deviance: f64,
    /// `2 * mean_deviance - plug_in_deviance`.
    pub dic: f64,
    /// Effective number of parameters, `mean_deviance - plug_in_deviance`.
    pub p_d: f64,
}

/// Which likelihood the deviance is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DicLikelihood {
    /// Given the sampled mixture indicators.
    #[default]
    Conditional,
    /// Indicators summed out, each cell scored under the full mixture.
    /// Needs the stored loadings and factors.
    Marginal,
}

impl std::str::FromStr for DicLikelihood {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Self::Conditional),
            "marginal" => Ok(Self::Marginal),
            _ => Err(Error::InvalidArgument(format!("unknown DIC likelihood `{s}`"))),
        }
    }
}

/// DIC of one chain.
///
/// The plug-in point uses the posterior means of `rho`, `phi`, `beta` and
/// `Lambda f_t`; the discrete indicator enters through the per-cell mixture
/// mean and variance averaged over the retained draws.
pub fn compute_dic(draws: &PosteriorDraws, data: &ModelData) -> Result<DicTerms> {
    if draws.is_empty() || draws.loglik.len() != draws.len() {
        return Err(Error::MissingTrace("log-likelihood"));
    }
    if draws.n != data.n() || draws.periods != data.periods() || draws.k != data.k() {
        return Err(Error::Dimension("draws do not match the data".into()));
    }
    let mean_ll = draws.loglik.iter().sum::<f64>() / draws.len() as f64;
    let m = &draws.means;
    let common = (draws.q > 0).then_some(&m.common);
    let plug_ll = log_likelihood_with(
        data,
        m.rho,
        m.gamma,
        m.delta,
        m.beta.as_slice(),
        common,
        |cell| (m.mixture_mean[cell], m.mixture_variance[cell]),
    )?;
    Ok(terms_from(mean_ll, plug_ll))
}

/// [`compute_dic`] or its indicator-free counterpart.
pub fn compute_dic_with(draws: &PosteriorDraws, data: &ModelData, kind: DicLikelihood) -> Result<DicTerms> {
    match kind {
        DicLikelihood::Conditional => compute_dic(draws, data),
        DicLikelihood::Marginal => marginal_dic(draws, data),
    }
}

fn marginal_dic(draws: &PosteriorDraws, data: &ModelData) -> Result<DicTerms> {
    if draws.is_empty() {
        return Err(Error::MissingTrace("draws"));
    }
    if draws.n != data.n() || draws.periods != data.periods() || draws.k != data.k() {
        return Err(Error::Dimension("draws do not match the data".into()));
    }
    if !draws.has_common() {
        return Err(Error::MissingTrace("loadings and factors"));
    }
    let table = MixtureTable::standard();
    let lls = (0..draws.len())
        .into_par_iter()
        .map(|r| {
            let common = (draws.q > 0).then(|| draws.common(r)).transpose()?;
            marginal_log_likelihood(
                data,
                draws.rho[r],
                draws.gamma[r],
                draws.delta[r],
                draws.beta_draw(r),
                common.as_ref(),
                &table,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_ll = lls.iter().sum::<f64>() / lls.len() as f64;
    let m = &draws.means;
    let common = (draws.q > 0).then_some(&m.common);
    let plug_ll = marginal_log_likelihood(data, m.rho, m.gamma, m.delta, m.beta.as_slice(), common, &table)?;
    Ok(terms_from(mean_ll, plug_ll))
}

fn terms_from(mean_ll: f64, plug_ll: f64) -> DicTerms {
    let mean_deviance = -2.0 * mean_ll;
    let plug_in_deviance = -2.0 * plug_ll;
    DicTerms {
        mean_deviance,
        plug_in_deviance,
        dic: 2.0 * mean_deviance - plug_in_deviance,
        p_d: mean_deviance - plug_in_deviance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicEntry {
    pub q: usize,
    #[serde(flatten)]
    pub terms: DicTerms,
    pub manifest: ChainManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicFailure {
    pub q: usize,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicReport {
    /// Successful fits in increasing `q`.
    pub entries: Vec<DicEntry>,
    pub failures: Vec<DicFailure>,
    /// `q` with the smallest DIC, the smaller `q` on ties.
    pub selected_q: Option<usize>,
    #[serde(default)]
    pub likelihood: DicLikelihood,
}

impl DicReport {
    pub fn from_results(results: Vec<(usize, Result<(DicTerms, ChainManifest)>)>) -> Self {
        let mut entries = Vec::new();
        let mut failures = Vec::new();
        for (q, res) in results {
            match res {
                Ok((terms, manifest)) => entries.push(DicEntry { q, terms, manifest }),
                Err(e) => failures.push(DicFailure {
                    q,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        entries.sort_by_key(|e| e.q);
        failures.sort_by_key(|f| f.q);
        let selected_q = entries
            .iter()
            .fold(None::<&DicEntry>, |best, e| match best {
                Some(b) if b.terms.dic <= e.terms.dic => Some(b),
                _ => Some(e),
            })
            .map(|e| e.q);
        Self {
            entries,
            failures,
            selected_q,
            likelihood: DicLikelihood::Conditional,
        }
    }

    pub fn get(&self, q: usize) -> Option<&DicEntry> {
        self.entries.iter().find(|e| e.q == q)
    }

    /// One column per `q`, rows for DIC and its two deviance terms.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<18}", "");
        for e in &self.entries {
            let _ = write!(s, "{:>14}", format!("q = {}", e.q));
        }
        s.push('\n');
        let rows: [(&str, fn(&DicTerms) -> f64); 4] = [
            ("DIC", |t| t.dic),
            ("mean deviance", |t| t.mean_deviance),
            ("plug-in deviance", |t| t.plug_in_deviance),
            ("pD", |t| t.p_d),
        ];
        for (label, f) in rows {
            let _ = write!(s, "{label:<18}");
            for e in &self.entries {
                let _ = write!(s, "{:>14.2}", f(&e.terms));
            }
            s.push('\n');
        }
        for f in &self.failures {
            let _ = writeln!(s, "q = {} failed: {}", f.q, f.message);
        }
        if let Some(q) = self.selected_q {
            let _ = writeln!(s, "selected q = {q}");
        }
        s
    }
}

/// Fit one chain per entry of `q_list` and collect the DIC of each.
///
/// At most `jobs` chains run at once. Every chain uses `cfg.seed`, and the
/// prior is resolved separately for each `q`. A failing chain is recorded
/// and the scan continues.
pub fn scan_q(
    data: &ModelData,
    prior: &PriorFile,
    cfg: &SamplerConfig,
    q_list: &[usize],
    jobs: usize,
    likelihood: DicLikelihood,
) -> Result<DicReport> {
    if q_list.is_empty() {
        return Err(Error::InvalidArgument("q list is empty".into()));
    }
    cfg.validate()?;
    let mut qs = q_list.to_vec();
    qs.sort_unstable();
    qs.dedup();
    let cfg = SamplerConfig {
        store_factors: likelihood == DicLikelihood::Marginal,
        ..cfg.clone()
    };
    let fit = |q: usize| -> Result<(DicTerms, ChainManifest)> {
        let spec = prior.resolve(data.k(), q)?;
        let draws = run_chain(data, &spec, &cfg, q)?;
        let terms = compute_dic_with(&draws, data, likelihood)?;
        Ok((terms, draws.manifest))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results = pool.install(|| qs.par_iter().map(|&q| (q, fit(q))).collect::<Vec<_>>());
    let mut report = DicReport::from_results(results);
    report.likelihood = likelihood;
    Ok(report)
}
