//! CSV and JSON readers and writers for panels, weights, draws and summaries.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same value, so every file round-trips exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::inference::{Trace, VolatilityField};
use crate::panel::{Covariates, PanelData};
use crate::simulate::Truth;
use crate::weights::WeightMatrix;

/// A panel together with the unit labels of its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    pub panel: PanelData,
    /// Labels in row order (lexicographic).
    pub units: Vec<String>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("{what}: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{what}: `{field}` is not finite")));
    }
    Ok(v)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

/// Read a long-format panel with header `unit,time,y[,x1,...]`.
///
/// Time `0` holds the initial outcome; its covariate fields may be empty.
/// Units are ordered lexicographically by label.
pub fn read_panel_csv(path: &Path) -> Result<PanelFile> {
    parse_panel_csv(open(path)?, path)
}

/// [`read_panel_csv`] from any reader; `path` is only used in messages.
pub fn parse_panel_csv<R: Read>(reader: R, path: &Path) -> Result<PanelFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "unit" || names[1] != "time" || names[2] != "y" {
        return Err(parse_error(path, 1, "header must start with `unit,time,y`"));
    }
    let k = names.len() - 3;

    struct Row {
        y: f64,
        x: Option<Vec<f64>>,
    }
    let mut cells: BTreeMap<String, BTreeMap<usize, Row>> = BTreeMap::new();
    let mut max_time = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != names.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        let unit = rec[0].to_string();
        if unit.is_empty() {
            return Err(parse_error(path, line, "empty unit label"));
        }
        let time: usize = rec[1]
            .parse()
            .map_err(|_| parse_error(path, line, format!("time `{}` is not a nonnegative integer", &rec[1])))?;
        let y = parse_f64(path, line, &rec[2], "y")?;
        let x = if time == 0 && rec.iter().skip(3).all(str::is_empty) {
            None
        } else {
            Some(
                (0..k)
                    .map(|c| parse_f64(path, line, &rec[3 + c], names[3 + c]))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let slot = cells.entry(unit.clone()).or_default();
        if slot.insert(time, Row { y, x }).is_some() {
            return Err(parse_error(path, line, format!("duplicate cell (unit {unit}, time {time})")));
        }
        max_time = max_time.max(time);
    }
    if cells.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    if max_time == 0 {
        return Err(parse_error(path, 1, "panel needs at least one period after time 0"));
    }
    let n = cells.len();
    let periods = max_time;
    let mut y = DMatrix::zeros(n, periods);
    let mut y0 = DVector::zeros(n);
    let mut x = Covariates::zeros(n, periods, k);
    for (i, (unit, rows)) in cells.iter().enumerate() {
        for t in 0..=max_time {
            let Some(row) = rows.get(&t) else {
                return Err(Error::InvalidArgument(format!(
                    "{}: missing cell (unit {unit}, time {t})",
                    path.display()
                )));
            };
            if t == 0 {
                y0[i] = row.y;
            } else {
                y[(i, t - 1)] = row.y;
                match &row.x {
                    Some(v) => x.row_mut(i, t - 1).copy_from_slice(v),
                    None if k > 0 => {
                        return Err(Error::InvalidArgument(format!(
                            "{}: missing covariates (unit {unit}, time {t})",
                            path.display()
                        )))
                    }
                    None => {}
                }
            }
        }
    }
    Ok(PanelFile {
        panel: PanelData::new(y, y0, x)?,
        units: cells.into_keys().collect(),
    })
}

/// Zero-padded labels `u01, u02, ...` that sort in row order.
pub fn default_unit_labels(n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (1..=n).map(|i| format!("u{i:0width$}")).collect()
}

pub fn write_panel_csv(path: &Path, panel: &PanelData, units: &[String]) -> Result<()> {
    let mut w = create(path)?;
    write_panel(&mut w, panel, units)?;
    w.flush()?;
    Ok(())
}

pub fn write_panel<W: Write>(w: &mut W, panel: &PanelData, units: &[String]) -> Result<()> {
    let n = panel.n();
    if units.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} units", units.len())));
    }
    let k = panel.k();
    let mut header = String::from("unit,time,y");
    for c in 1..=k {
        header.push_str(&format!(",x{c}"));
    }
    writeln!(w, "{header}")?;
    for (i, unit) in units.iter().enumerate() {
        write!(w, "{unit},0,{}", panel.y0[i])?;
        for _ in 0..k {
            write!(w, ",")?;
        }
        writeln!(w)?;
        for t in 0..panel.periods() {
            write!(w, "{unit},{},{}", t + 1, panel.y[(i, t)])?;
            for v in panel.x.row(i, t) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Dense `n x n` weights, one row per line, no header.
pub fn read_weights_dense(path: &Path) -> Result<WeightMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| parse_f64(path, line, f, "weight"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows[0].len() != n {
        return Err(Error::Dimension(format!(
            "{}: weight matrix must be square, got {n} rows and {} columns",
            path.display(),
            rows.first().map_or(0, Vec::len)
        )));
    }
    WeightMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn write_weights_dense(path: &Path, w: &WeightMatrix) -> Result<()> {
    let mut out = create(path)?;
    let m = w.matrix();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Edge list `i,j,weight` with 0-based indices; an optional header line is
/// skipped. Unlisted pairs have weight zero; repeated pairs are rejected.
pub fn read_weights_edges(path: &Path, n: usize) -> Result<WeightMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut m = DMatrix::zeros(n, n);
    let mut seen = HashMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if idx == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_error(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let index = |f: &str| -> Result<usize> {
            let v: usize = f
                .parse()
                .map_err(|_| parse_error(path, line, format!("`{f}` is not a unit index")))?;
            if v >= n {
                return Err(parse_error(path, line, format!("index {v} out of range for {n} units")));
            }
            Ok(v)
        };
        let (i, j) = (index(&rec[0])?, index(&rec[1])?);
        let v = parse_f64(path, line, &rec[2], "weight")?;
        if let Some(prev) = seen.insert((i, j), line) {
            return Err(parse_error(path, line, format!("edge ({i}, {j}) already given on line {prev}")));
        }
        m[(i, j)] = v;
    }
    WeightMatrix::new(m)
}

/// Scalar draws as named columns, the layout of the draws CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsTable {
    pub names: Vec<String>,
    pub iteration: Vec<usize>,
    pub columns: Vec<Vec<f64>>,
}

impl DrawsTable {
    /// `rho, gamma, delta, beta_*`, the shrinkage columns when present, and
    /// `loglik`.
    pub fn from_draws(draws: &PosteriorDraws) -> Result<Self> {
        let mut names = draws.parameter_names();
        names.push("loglik".to_string());
        let columns = names
            .iter()
            .map(|n| draws.parameter(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names,
            iteration: draws.iteration.clone(),
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iteration.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|c| self.columns[c].as_slice())
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Parameter columns (everything except `loglik`).
    pub fn parameter_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str).filter(|n| *n != "loglik")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        writeln!(w, "iteration,{}", self.names.join(","))?;
        for (r, it) in self.iteration.iter().enumerate() {
            write!(w, "{it}")?;
            for c in &self.columns {
                write!(w, ",{}", c[r])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("iteration") {
            return Err(parse_error(path, 1, "first column must be `iteration`"));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut iteration = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = line_of(&rec);
            iteration.push(
                rec[0]
                    .parse()
                    .map_err(|_| parse_error(path, line, format!("bad iteration `{}`", &rec[0])))?,
            );
            for (c, col) in columns.iter_mut().enumerate() {
                col.push(parse_f64(path, line, &rec[c + 1], &names[c])?);
            }
        }
        Ok(Self {
            names,
            iteration,
            columns,
        })
    }
}

/// Per-cell volatility summary: `unit,time,median,lo,hi`, time starting at 1.
pub fn write_hstar_csv(path: &Path, field: &VolatilityField, units: &[String]) -> Result<()> {
    let (n, periods) = field.median.shape();
    if units.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} units", units.len())));
    }
    let mut w = create(path)?;
    writeln!(w, "unit,time,median,lo,hi")?;
    for (i, unit) in units.iter().enumerate() {
        for t in 0..periods {
            writeln!(
                w,
                "{unit},{},{},{},{}",
                t + 1,
                field.median[(i, t)],
                field.lo[(i, t)],
                field.hi[(i, t)]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iteration,value,running_mean")?;
    for ((it, v), m) in trace.iteration.iter().zip(&trace.value).zip(&trace.running_mean) {
        writeln!(w, "{it},{v},{m}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut trace = Trace {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().trim_start_matches("trace_").to_string())
            .unwrap_or_default(),
        iteration: Vec::new(),
        value: Vec::new(),
        running_mean: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(parse_error(path, line, "expected 3 fields"));
        }
        trace
            .iteration
            .push(rec[0].parse().map_err(|_| parse_error(path, line, "bad iteration"))?);
        trace.value.push(parse_f64(path, line, &rec[1], "value")?);
        trace.running_mean.push(parse_f64(path, line, &rec[2], "running_mean")?);
    }
    Ok(trace)
}

/// Simulation truth in row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub units: Vec<String>,
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub beta: Vec<f64>,
    /// `n x q`.
    pub lambda: Vec<Vec<f64>>,
    /// `q x T`.
    pub factors: Vec<Vec<f64>>,
    /// `n x T`.
    pub hstar: Vec<Vec<f64>>,
    pub mean_hstar: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TruthFile {
    pub fn new(truth: &Truth, units: &[String]) -> Self {
        Self {
            units: units.to_vec(),
            rho: truth.params.rho,
            gamma: truth.params.gamma,
            delta: truth.params.delta,
            beta: truth.beta.clone(),
            lambda: rows(&truth.lambda),
            factors: rows(&truth.factors),
            hstar: rows(&truth.hstar),
            mean_hstar: truth.mean_hstar(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    serde_json::from_str(&s).map_err(|e| parse_error(path, e.line(), e.to_string()))
}
