//! Command-line front end: `simulate`, `fit`, `select` and `summarize`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::draws::{ChainManifest, PosteriorDraws};
use crate::error::{Error, Result};
use crate::inference::{recover_volatility, summarize_series, summary_table, trace_series, ParameterSummary};
use crate::io::{
    default_unit_labels, read_json, read_panel_csv, read_weights_dense, read_weights_edges,
    write_hstar_csv, write_json, write_panel_csv, write_trace_csv, write_weights_dense, DrawsTable,
    TruthFile,
};
use crate::mixture::MixtureTable;
use crate::model::SpatialParams;
use crate::panel::DEFAULT_FLOOR;
use crate::sampler::{run_chain, ModelData, PriorFile, SamplerConfig};
use crate::selection::{compute_dic, scan_q, DicLikelihood, DicTerms};
use crate::shrinkage::{run_chain_shrinkage_with, ShrinkageOptions, TauConditional};
use crate::simulate::{simulate_panel, CovariateLaw, SimConfig};
use crate::weights::{queen_contiguity, WeightMatrix};

/// Environment variable that supplies the output directory when `--out` is
/// not given.
pub const OUT_DIR_ENV: &str = "LOGARCH_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "logarch", version, about = "Bayesian spatiotemporal log-ARCH models with common factors")]
pub struct Cli {
    /// Print the mixture table used for the log-squared error and exit.
    #[arg(long, global = true)]
    pub dump_mixture: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and write it with its weights and latent truth.
    Simulate(SimulateArgs),
    /// Fit one chain and write draws, volatility summaries and a manifest.
    Fit(FitArgs),
    /// Fit a chain per number of factors and compare them by DIC.
    Select(SelectArgs),
    /// Summarize the draws of a finished run.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Dense weight matrix CSV (n rows of n values, no header).
    #[arg(long, group = "weight_source")]
    pub weights: Option<PathBuf>,
    /// Edge list CSV `i,j,weight` with 0-based unit indices.
    #[arg(long, group = "weight_source")]
    pub edges: Option<PathBuf>,
    /// Binary queen contiguity on a ROWSxCOLS lattice, e.g. `7x7`.
    #[arg(long, group = "weight_source", value_parser = parse_lattice)]
    pub lattice: Option<(usize, usize)>,
    /// Divide every row of the weight matrix by its sum.
    #[arg(long)]
    pub row_normalize: bool,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 100_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 20_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial random-walk step for rho.
    #[arg(long, default_value_t = 0.02)]
    pub rho_step: f64,
    /// Prior JSON; omitted fields take the diffuse defaults.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Do not truncate the draws of (rho, gamma, delta) to the stable region.
    #[arg(long)]
    pub no_stability: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format panel CSV with header `unit,time,y[,x1,...]`.
    #[arg(long)]
    pub panel: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Floor applied to y^2 before taking logs.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub periods: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 0.16, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.15, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub delta: f64,
    /// Covariate coefficients, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "-2", allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = CovariateChoice::Uniform)]
    pub covariates: CovariateChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Discarded warm-up periods before Y_0.
    #[arg(long, default_value_t = 200)]
    pub warm_up: usize,
    /// Weights to simulate on; defaults to the row-normalized 7x7 queen lattice.
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovariateChoice {
    /// Uniform(0, 1).
    Uniform,
    /// Standard normal.
    Normal,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of common factors.
    #[arg(long, default_value_t = 2, conflicts_with = "shrinkage")]
    pub q: usize,
    /// Use the Lasso shrinkage prior on the loadings.
    #[arg(long, requires = "q_max")]
    pub shrinkage: bool,
    /// Number of factors under shrinkage.
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Conditional used for the Lasso scales.
    #[arg(long, value_enum, default_value_t = TauChoice::Exact)]
    pub tau_conditional: TauChoice,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TauChoice {
    Exact,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DicChoice {
    Conditional,
    Marginal,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Factor counts to compare: `1..8`, `1..=3` or `1,2,4`.
    #[arg(long, value_parser = parse_q_list, default_value = "1..3")]
    pub q: QList,
    /// Chains run at the same time.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Deviance given the mixture indicators, or with them summed out.
    #[arg(long, value_enum, default_value_t = DicChoice::Conditional)]
    pub dic_likelihood: DicChoice,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QList(pub Vec<usize>);

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// Parameters to export as trace CSVs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub traces: Vec<String>,
    /// Directory for trace files; defaults to the run directory.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

fn parse_lattice(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let r = r.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    Ok((r, c))
}

fn parse_q_list(s: &str) -> std::result::Result<QList, String> {
    let number = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad factor count `{v}`"));
    let mut qs = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = match b.strip_prefix('=') {
            Some(b) => (number(a)?, number(b)?),
            None => (number(a)?, number(b)?),
        };
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        (a..=b).collect::<Vec<_>>()
    } else {
        s.split(',').map(number).collect::<std::result::Result<Vec<_>, _>>()?
    };
    qs.sort_unstable();
    qs.dedup();
    if qs.is_empty() {
        return Err("empty factor list".into());
    }
    Ok(QList(qs))
}

impl WeightArgs {
    fn given(&self) -> bool {
        self.weights.is_some() || self.edges.is_some() || self.lattice.is_some()
    }

    fn load(&self, n: usize) -> Result<WeightMatrix> {
        let w = if let Some(p) = &self.weights {
            read_weights_dense(p)?
        } else if let Some(p) = &self.edges {
            read_weights_edges(p, n)?
        } else if let Some((r, c)) = self.lattice {
            queen_contiguity(r, c)?
        } else {
            return Err(Error::InvalidArgument(
                "one of --weights, --edges or --lattice is required".into(),
            ));
        };
        Ok(if self.row_normalize { w.row_normalize() } else { w })
    }
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            rho_step: self.rho_step,
            seed: self.seed,
            ..SamplerConfig::default()
        }
    }

    fn prior_file(&self) -> Result<PriorFile> {
        let mut p: PriorFile = match &self.prior {
            Some(path) => read_json(path)?,
            None => PriorFile::default(),
        };
        if self.no_stability {
            p.enforce_stability = Some(false);
        }
        Ok(p)
    }
}

struct LoadedData {
    data: ModelData,
    units: Vec<String>,
    floored: usize,
}

fn load_data(args: &DataArgs) -> Result<LoadedData> {
    let file = read_panel_csv(&args.panel)?;
    let weights = args.weights.load(file.panel.n())?;
    let (data, floored) = ModelData::from_panel(&file.panel, weights, args.floor)?;
    Ok(LoadedData {
        data,
        units: file.units,
        floored,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())))
    })
}

#[derive(Debug, Serialize)]
struct SimulateManifest {
    version: String,
    seed: u64,
    periods: usize,
    n: usize,
    q: usize,
    params: SpatialParams,
    beta: Vec<f64>,
    covariates: CovariateLaw,
    warm_up: usize,
}

fn simulate(args: &SimulateArgs) -> Result<String> {
    let weights = if args.weights.edges.is_some() {
        return Err(Error::InvalidArgument(
            "simulate takes --weights or --lattice; an edge list does not fix the number of units".into(),
        ));
    } else if args.weights.given() {
        args.weights.load(0)?
    } else {
        queen_contiguity(7, 7)?.row_normalize()
    };
    let covariate_law = match args.covariates {
        CovariateChoice::Uniform => CovariateLaw::Uniform { lo: 0.0, hi: 1.0 },
        CovariateChoice::Normal => CovariateLaw::Normal { mean: 0.0, sd: 1.0 },
    };
    let cfg = SimConfig {
        periods: args.periods,
        q: args.q,
        params: SpatialParams::new(args.rho, args.gamma, args.delta),
        beta: args.beta.clone(),
        weights,
        burn_in_periods: args.warm_up,
        seed: args.seed,
        covariate_law,
        ..SimConfig::benchmark(args.periods, args.seed)
    };
    let sim = simulate_panel(&cfg)?;
    let dir = &args.out.out;
    prepare_out(dir)?;
    let units = default_unit_labels(cfg.n());
    write_panel_csv(&dir.join("panel.csv"), &sim.panel, &units)?;
    write_weights_dense(&dir.join("weights.csv"), &cfg.weights)?;
    write_json(&dir.join("truth.json"), &TruthFile::new(&sim.truth, &units))?;
    write_json(
        &dir.join("manifest.json"),
        &SimulateManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            periods: cfg.periods,
            n: cfg.n(),
            q: cfg.q,
            params: cfg.params,
            beta: cfg.beta.clone(),
            covariates: cfg.covariate_law,
            warm_up: cfg.burn_in_periods,
        },
    )?;
    Ok(format!(
        "simulated {} units x {} periods into {}\n",
        cfg.n(),
        cfg.periods,
        dir.display()
    ))
}

#[derive(Debug, Serialize)]
struct FitManifest {
    panel: PathBuf,
    floored_cells: usize,
    q: usize,
    shrinkage: bool,
    tau_conditional: Option<TauConditional>,
    prior_file: Option<PathBuf>,
    chain: ChainManifest,
    dic: DicTerms,
    overall_average_hstar: f64,
    overall_interval_hstar: (f64, f64),
    summary: Vec<ParameterSummary>,
    wall_seconds: f64,
}

fn summarize_table(table: &DrawsTable) -> Result<Vec<ParameterSummary>> {
    table
        .parameter_names()
        .map(|name| summarize_series(name, table.column(name)?))
        .collect()
}

fn fit(args: &FitArgs) -> Result<String> {
    let started = Instant::now();
    let loaded = load_data(&args.data)?;
    let data = &loaded.data;
    let cfg = args.sampler.config();
    let prior_file = args.sampler.prior_file()?;
    let q = if args.shrinkage {
        args.q_max.unwrap_or(args.q)
    } else {
        args.q
    };
    let prior = prior_file.resolve(data.k(), q)?;
    let tau_conditional = match args.tau_conditional {
        TauChoice::Exact => TauConditional::Exact,
        TauChoice::Printed => TauConditional::Printed,
    };
    let draws: PosteriorDraws = if args.shrinkage {
        let opts = ShrinkageOptions {
            tau_conditional,
            ..ShrinkageOptions::default()
        };
        run_chain_shrinkage_with(data, &prior, &cfg, q, opts)?
    } else {
        run_chain(data, &prior, &cfg, q)?
    };
    let dic = compute_dic(&draws, data)?;
    let field = recover_volatility(&draws, data)?;
    let table = DrawsTable::from_draws(&draws)?;
    let summary = summarize_table(&table)?;

    let dir = &args.out.out;
    prepare_out(dir)?;
    table.write(&dir.join("draws.csv"))?;
    write_hstar_csv(&dir.join("hstar.csv"), &field, &loaded.units)?;
    let manifest = FitManifest {
        panel: args.data.panel.clone(),
        floored_cells: loaded.floored,
        q,
        shrinkage: args.shrinkage,
        tau_conditional: args.shrinkage.then_some(tau_conditional),
        prior_file: args.sampler.prior.clone(),
        chain: draws.manifest.clone(),
        dic,
        overall_average_hstar: field.overall_average,
        overall_interval_hstar: field.overall_interval,
        summary: summary.clone(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;

    let mut out = summary_table(&summary);
    out.push_str(&format!(
        "log h*: overall average {:.3}, 95% CI [{:.3}, {:.3}]\n",
        field.overall_average, field.overall_interval.0, field.overall_interval.1
    ));
    out.push_str(&format!(
        "DIC {:.2}, rho acceptance {:.3}\n",
        dic.dic, draws.manifest.acceptance_rate
    ));
    Ok(out)
}

fn select(args: &SelectArgs) -> Result<String> {
    let loaded = load_data(&args.data)?;
    let cfg = args.sampler.config();
    let prior = args.sampler.prior_file()?;
    let likelihood = match args.dic_likelihood {
        DicChoice::Conditional => DicLikelihood::Conditional,
        DicChoice::Marginal => DicLikelihood::Marginal,
    };
    let report = scan_q(&loaded.data, &prior, &cfg, &args.q.0, args.jobs, likelihood)?;
    let dir = &args.out.out;
    prepare_out(dir)?;
    write_json(&dir.join("dic.json"), &report)?;
    let table = report.table();
    std::fs::write(dir.join("dic.txt"), &table)?;
    if report.entries.is_empty() {
        let reasons: Vec<String> = report
            .failures
            .iter()
            .map(|f| format!("q = {}: {}", f.q, f.message))
            .collect();
        return Err(Error::InvalidArgument(format!(
            "every chain failed ({})",
            reasons.join("; ")
        )));
    }
    Ok(table)
}

fn summarize(args: &SummarizeArgs) -> Result<String> {
    let table = DrawsTable::read(&args.run.join("draws.csv"))?;
    let summary = summarize_table(&table)?;
    if !args.traces.is_empty() {
        let dir = args.out.clone().unwrap_or_else(|| args.run.clone());
        prepare_out(&dir)?;
        for name in &args.traces {
            let values = table.column(name)?.to_vec();
            let trace = trace_series(name, &table.iteration, values)?;
            write_trace_csv(&dir.join(format!("trace_{name}.csv")), &trace)?;
        }
    }
    Ok(summary_table(&summary))
}

/// The mixture table as CSV text.
pub fn mixture_dump() -> String {
    let t = MixtureTable::standard();
    let mut s = String::from("component,p,mu,sigma2\n");
    for j in 0..t.p.len() {
        s.push_str(&format!("{},{},{},{}\n", j + 1, t.p[j], t.mu[j], t.sigma2[j]));
    }
    s
}

/// Run a parsed command line and return what should go to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    if cli.dump_mixture {
        return Ok(mixture_dump());
    }
    match &cli.command {
        Some(Command::Simulate(a)) => simulate(a),
        Some(Command::Fit(a)) => fit(a),
        Some(Command::Select(a)) => select(a),
        Some(Command::Summarize(a)) => summarize(a),
        None => Err(Error::InvalidArgument(
            "no subcommand given; see --help".into(),
        )),
    }
}

/// Machine-readable error report written to stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn q_lists() {
        assert_eq!(parse_q_list("1..8").unwrap().0, (1..=8).collect::<Vec<_>>());
        assert_eq!(parse_q_list("1..=3").unwrap().0, vec![1, 2, 3]);
        assert_eq!(parse_q_list("4,2,2").unwrap().0, vec![2, 4]);
        assert!(parse_q_list("3..1").is_err());
        assert!(parse_q_list("a").is_err());
    }

    #[test]
    fn lattice_spec() {
        assert_eq!(parse_lattice("7x7").unwrap(), (7, 7));
        assert_eq!(parse_lattice("2X3").unwrap(), (2, 3));
        assert!(parse_lattice("7").is_err());
    }

    #[test]
    fn mixture_dump_has_ten_rows() {
        assert_eq!(mixture_dump().lines().count(), 11);
    }
}
