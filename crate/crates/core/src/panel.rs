//! Panel data and the log-squared transform.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default floor applied to `Y^2` before taking logs.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Exogenous covariates `x_t(s_i)`, stored period-major: all units of period
/// `t` are contiguous, each unit holding its `k` regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    n: usize,
    periods: usize,
    k: usize,
    data: Vec<f64>,
}

impl Covariates {
    pub fn new(n: usize, periods: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * periods * k {
            return Err(Error::Dimension(format!(
                "covariate buffer has {} values, expected {n}*{periods}*{k}",
                data.len()
            )));
        }
        Ok(Self {
            n,
            periods,
            k,
            data,
        })
    }

    pub fn empty(n: usize, periods: usize) -> Self {
        Self {
            n,
            periods,
            k: 0,
            data: Vec::new(),
        }
    }

    pub fn zeros(n: usize, periods: usize, k: usize) -> Self {
        Self {
            n,
            periods,
            k,
            data: vec![0.0; n * periods * k],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Regressors of unit `i` in period `t` (0-based, first modelled period is 0).
    #[inline]
    pub fn row(&self, i: usize, t: usize) -> &[f64] {
        let start = (t * self.n + i) * self.k;
        &self.data[start..start + self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize, t: usize) -> &mut [f64] {
        let start = (t * self.n + i) * self.k;
        &mut self.data[start..start + self.k]
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize, c: usize) -> f64 {
        self.data[(t * self.n + i) * self.k + c]
    }

    /// `x_t(s_i)' beta` for every cell, as an `n x T` matrix.
    pub fn times(&self, beta: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(beta.len(), self.k);
        DMatrix::from_fn(self.n, self.periods, |i, t| {
            self.row(i, t).iter().zip(beta).map(|(x, b)| x * b).sum()
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Reorder units: unit `i` of the result is unit `perm[i]` of `self`.
    pub fn permute_units(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, self.periods, self.k);
        for t in 0..self.periods {
            for (i, &src) in perm.iter().enumerate() {
                out.row_mut(i, t).copy_from_slice(self.row(src, t));
            }
        }
        out
    }
}

/// Outcomes `Y` (n x T), initial vector `Y_0` and covariates over the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub y: DMatrix<f64>,
    pub y0: DVector<f64>,
    pub x: Covariates,
}

impl PanelData {
    pub fn new(y: DMatrix<f64>, y0: DVector<f64>, x: Covariates) -> Result<Self> {
        let (n, periods) = y.shape();
        if y0.len() != n {
            return Err(Error::Dimension(format!(
                "Y0 has length {}, expected {n}",
                y0.len()
            )));
        }
        if x.n() != n || x.periods() != periods {
            return Err(Error::Dimension(format!(
                "covariates are {}x{}, outcomes are {n}x{periods}",
                x.n(),
                x.periods()
            )));
        }
        if n == 0 || periods == 0 {
            return Err(Error::Dimension("panel must have at least one unit and one period".into()));
        }
        Ok(Self { y, y0, x })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn periods(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> usize {
        self.x.k()
    }
}

/// `Y*_t(s_i) = log Y_t(s_i)^2` together with `Y*_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSquaredPanel {
    pub ystar: DMatrix<f64>,
    pub ystar0: DVector<f64>,
    /// Number of cells (including the initial vector) whose square was floored.
    pub floored: usize,
}

impl LogSquaredPanel {
    pub fn n(&self) -> usize {
        self.ystar.nrows()
    }

    pub fn periods(&self) -> usize {
        self.ystar.ncols()
    }
}

/// Apply `log(max(y^2, floor))` to every outcome and to `Y_0`.
///
/// Non-finite entries are rejected with their position; the initial vector is
/// reported as time 0 and modelled periods as times `1..=T`.
pub fn log_squared_transform(panel: &PanelData, floor: f64) -> Result<LogSquaredPanel> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::InvalidArgument(format!("floor must be positive, got {floor}")));
    }
    let mut floored = 0usize;
    let mut transform = |v: f64, unit: usize, time: usize| -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::NonFinite { unit, time });
        }
        let sq = v * v;
        if sq < floor {
            floored += 1;
            Ok(floor.ln())
        } else {
            Ok(sq.ln())
        }
    };
    let n = panel.n();
    let periods = panel.periods();
    let mut ystar0 = DVector::zeros(n);
    for i in 0..n {
        ystar0[i] = transform(panel.y0[i], i, 0)?;
    }
    let mut ystar = DMatrix::zeros(n, periods);
    for t in 0..periods {
        for i in 0..n {
            ystar[(i, t)] = transform(panel.y[(i, t)], i, t + 1)?;
        }
    }
    Ok(LogSquaredPanel {
        ystar,
        ystar0,
        floored,
    })
}
