//! Spatial and network weight matrices and the `S(rho) = I - rho M` kernels.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default weight assigned to perfectly correlated pairs in
/// [`correlation_network`], where `1 / d_ij` is unbounded.
pub const DEFAULT_CORRELATION_CAP: f64 = 1e6;

/// Nonnegative `n x n` weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    m: DMatrix<f64>,
    row_normalized: bool,
    spectral_radius: f64,
}

impl WeightMatrix {
    /// Validate and wrap a weight matrix. Row-stochastic inputs are detected
    /// and flagged as normalized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::Dimension(format!("weight matrix is {rows}x{cols}")));
        }
        if rows == 0 {
            return Err(Error::Dimension("weight matrix is empty".into()));
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite weight at ({i}, {j})"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::NegativeWeight {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            if m[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal weight m[{i},{i}] = {} must be zero",
                    m[(i, i)]
                )));
            }
        }
        let row_normalized = is_row_stochastic(&m);
        let spectral_radius = spectral_radius(&m);
        Ok(Self {
            m,
            row_normalized,
            spectral_radius,
        })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn is_row_normalized(&self) -> bool {
        self.row_normalized
    }

    /// Largest eigenvalue modulus of `M`.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Open interval of `rho` for which `S(rho)` is guaranteed invertible.
    pub fn rho_support(&self) -> (f64, f64) {
        if self.row_normalized {
            (-1.0, 1.0)
        } else if self.spectral_radius > 0.0 {
            (-1.0 / self.spectral_radius, 1.0 / self.spectral_radius)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    /// Divide each row with positive sum by that sum; all-zero rows stay zero.
    pub fn row_normalize(&self) -> WeightMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            let s: f64 = m.row(i).sum();
            if s > 0.0 {
                m.row_mut(i).scale_mut(1.0 / s);
            }
        }
        let spectral_radius = spectral_radius(&m);
        WeightMatrix {
            m,
            row_normalized: true,
            spectral_radius,
        }
    }

    /// `M v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    pub fn is_symmetric(&self) -> bool {
        self.m == self.m.transpose()
    }

    fn check_rho(&self, rho: f64) -> Result<()> {
        let (lo, hi) = self.rho_support();
        if rho.is_finite() && rho > lo && rho < hi {
            Ok(())
        } else {
            Err(Error::RhoOutOfSupport { rho, lo, hi })
        }
    }

    /// `S(rho) = I - rho M`.
    pub fn build_s(&self, rho: f64) -> Result<DMatrix<f64>> {
        self.check_rho(rho)?;
        Ok(self.build_s_unchecked(rho))
    }

    pub(crate) fn build_s_unchecked(&self, rho: f64) -> DMatrix<f64> {
        let n = self.n();
        let mut s = &self.m * (-rho);
        for i in 0..n {
            s[(i, i)] += 1.0;
        }
        s
    }

    /// Solve `S(rho) x = b`.
    pub fn solve_s(&self, rho: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.build_s(rho)?;
        s.lu()
            .solve(b)
            .ok_or(Error::RhoOutOfSupport {
                rho,
                lo: self.rho_support().0,
                hi: self.rho_support().1,
            })
    }

    /// `log |det S(rho)|` via an LU factorization.
    pub fn log_abs_det_s(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(log_abs_det_lu(self.build_s_unchecked(rho)))
    }

    /// Eigenvalues of `M` (complex in general).
    /// Eigenvalues of `M`, or `None` if the QR iteration does not converge.
    pub fn eigenvalues(&self) -> Option<Vec<Complex<f64>>> {
        eigenvalues(&self.m)
    }
}

fn is_row_stochastic(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| {
        let s: f64 = m.row(i).sum();
        s == 0.0 || (s - 1.0).abs() <= ROW_SUM_TOLERANCE
    })
}

const SCHUR_MAX_ITERATIONS: usize = 10_000;
const SCHUR_TOLERANCE: f64 = 1e-13;

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    if m.is_square() && m == &m.transpose() {
        return Some(
            m.clone()
                .symmetric_eigenvalues()
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .collect(),
        );
    }
    // The shifted QR iteration can stall on very sparse or nilpotent
    // patterns; the transpose and a diagonal similarity share the spectrum
    // and usually converge when the original does not.
    let n = m.nrows();
    let d = DVector::from_fn(n, |i, _| 1.0 + 0.37 * i as f64);
    let similar = DMatrix::from_fn(n, n, |i, j| d[i] * m[(i, j)] / d[j]);
    [m.clone(), m.transpose(), similar].into_iter().find_map(|a| {
        Schur::try_new(a, SCHUR_TOLERANCE, SCHUR_MAX_ITERATIONS)
            .map(|s| s.complex_eigenvalues().iter().copied().collect())
    })
}

pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    match eigenvalues(m) {
        Some(eig) => eig.iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

/// `lim ||A^k||^(1/k)` by repeated squaring with rescaling.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0;
    for _ in 0..50 {
        let norm = a.norm();
        if norm == 0.0 {
            return 0.0;
        }
        a /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        a = &a * &a;
        k *= 2.0;
    }
    ((log_scale + a.norm().ln()) / k).exp()
}

pub(crate) fn log_abs_det_lu(s: DMatrix<f64>) -> f64 {
    let lu = s.lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// How `log |det S(rho)|` is evaluated inside the samplers.
#[derive(Debug, Clone)]
pub enum LogDetMethod {
    /// Dense LU per evaluation.
    DenseLu,
    /// Precomputed eigenvalues `w_i` of `M`: `sum_i log |1 - rho w_i|`.
    Spectrum(Vec<Complex<f64>>),
}

/// Default `n` above which the eigenvalue route replaces per-call LU.
pub const DEFAULT_DENSE_THRESHOLD: usize = 200;

/// Cached evaluator for `log |det S(rho)|`.
#[derive(Debug, Clone)]
pub struct LogDetS {
    method: LogDetMethod,
}

impl LogDetS {
    pub fn new(w: &WeightMatrix, dense_threshold: usize) -> Self {
        let method = if w.n() <= dense_threshold {
            LogDetMethod::DenseLu
        } else {
            match w.eigenvalues() {
                Some(eig) => LogDetMethod::Spectrum(eig),
                None => LogDetMethod::DenseLu,
            }
        };
        Self { method }
    }

    pub fn with_method(method: LogDetMethod) -> Self {
        Self { method }
    }

    pub fn method(&self) -> &LogDetMethod {
        &self.method
    }

    /// Caller guarantees `rho` lies in the support of `w`.
    pub fn eval(&self, w: &WeightMatrix, rho: f64) -> f64 {
        match &self.method {
            LogDetMethod::DenseLu => log_abs_det_lu(w.build_s_unchecked(rho)),
            LogDetMethod::Spectrum(eig) => eig
                .iter()
                .map(|z| (Complex::new(1.0, 0.0) - z * rho).norm().ln())
                .sum(),
        }
    }
}

/// Binary queen contiguity on a `rows x cols` lattice. Cell `(r, c)` has index
/// `r * cols + c`; cells sharing an edge or a corner are neighbors.
pub fn queen_contiguity(rows: usize, cols: usize) -> Result<WeightMatrix> {
    let n = rows * cols;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "queen lattice {rows}x{cols} needs at least two cells"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    m[(i, nr as usize * cols + nc as usize)] = 1.0;
                }
            }
        }
    }
    WeightMatrix::new(m)
}

/// Pearson correlation of every pair of rows.
pub fn pearson_correlation(series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, len) = series.shape();
    if len < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two periods".into()));
    }
    let mut centered = series.clone();
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let mean = series.row(i).mean();
        let mut ss = 0.0;
        for t in 0..len {
            let d = series[(i, t)] - mean;
            centered[(i, t)] = d;
            ss += d * d;
        }
        if !(ss > 0.0) || !ss.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "series {i} has zero or non-finite variance"
            )));
        }
        norms[i] = ss.sqrt();
    }
    let mut corr = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dot = centered.row(i).dot(&centered.row(j));
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    Ok(corr)
}

/// Correlation-distance network: `d_ij = sqrt(2 (1 - r_ij))` and
/// `m_ij = min(1 / d_ij, cap)` off the diagonal. The result is not normalized.
pub fn correlation_network(returns: &DMatrix<f64>, cap: f64) -> Result<WeightMatrix> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!("cap must be positive, got {cap}")));
    }
    let corr = pearson_correlation(returns)?;
    let n = corr.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            distance_weight(corr[(i, j)], cap)
        }
    });
    WeightMatrix::new(m)
}

/// `min(1 / sqrt(2 (1 - r)), cap)`.
pub fn distance_weight(r: f64, cap: f64) -> f64 {
    let d = (2.0 * (1.0 - r).max(0.0)).sqrt();
    if d == 0.0 {
        cap
    } else {
        (1.0 / d).min(cap)
    }
}
