use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::{log_squared_transform, Covariates, LogSquaredPanel, PanelData};
use crate::weights::{LogDetS, WeightMatrix, DEFAULT_DENSE_THRESHOLD};

/// Log-squared outcomes with their spatial and temporal lags precomputed.
///
/// Column `t` of every matrix refers to modelled period `t` (0-based);
/// `ylag` holds `Y*_{t-1}` so its first column is `Y*_0`.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub ystar: DMatrix<f64>,
    pub ystar0: DVector<f64>,
    pub ylag: DMatrix<f64>,
    /// `M Y*_t`.
    pub my: DMatrix<f64>,
    /// `M Y*_{t-1}`.
    pub mylag: DMatrix<f64>,
    pub x: Covariates,
    pub weights: WeightMatrix,
    pub(crate) logdet: LogDetS,
}

impl ModelData {
    pub fn new(ls: &LogSquaredPanel, x: Covariates, weights: WeightMatrix) -> Result<Self> {
        Self::with_threshold(ls, x, weights, DEFAULT_DENSE_THRESHOLD)
    }

    pub fn with_threshold(
        ls: &LogSquaredPanel,
        x: Covariates,
        weights: WeightMatrix,
        dense_threshold: usize,
    ) -> Result<Self> {
        let n = ls.n();
        if weights.n() != n {
            return Err(Error::Dimension(format!(
                "weight matrix has {} units, panel has {n}",
                weights.n()
            )));
        }
        if x.n() != n || x.periods() != ls.periods() {
            return Err(Error::Dimension("covariates do not match the panel".into()));
        }
        if let Some(pos) = ls.ystar.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                unit: pos % n,
                time: pos / n + 1,
            });
        }
        let logdet = LogDetS::new(&weights, dense_threshold);
        Ok(Self::assemble(ls.ystar.clone(), ls.ystar0.clone(), x, weights, logdet))
    }

    /// Log-squared transform of `panel` followed by [`ModelData::new`].
    pub fn from_panel(panel: &PanelData, weights: WeightMatrix, floor: f64) -> Result<(Self, usize)> {
        let ls = log_squared_transform(panel, floor)?;
        let floored = ls.floored;
        Ok((Self::new(&ls, panel.x.clone(), weights)?, floored))
    }

    fn assemble(
        ystar: DMatrix<f64>,
        ystar0: DVector<f64>,
        x: Covariates,
        weights: WeightMatrix,
        logdet: LogDetS,
    ) -> Self {
        let (n, periods) = ystar.shape();
        let mut ylag = DMatrix::zeros(n, periods);
        ylag.set_column(0, &ystar0);
        for t in 1..periods {
            ylag.set_column(t, &ystar.column(t - 1));
        }
        let my = weights.matrix() * &ystar;
        let mylag = weights.matrix() * &ylag;
        Self {
            ystar,
            ystar0,
            ylag,
            my,
            mylag,
            x,
            weights,
            logdet,
        }
    }

    /// Same covariates, weights and `Y*_0`, new outcomes.
    pub fn with_ystar(&self, ystar: DMatrix<f64>) -> Self {
        Self::assemble(
            ystar,
            self.ystar0.clone(),
            self.x.clone(),
            self.weights.clone(),
            self.logdet.clone(),
        )
    }

    pub fn n(&self) -> usize {
        self.ystar.nrows()
    }

    pub fn periods(&self) -> usize {
        self.ystar.ncols()
    }

    pub fn k(&self) -> usize {
        self.x.k()
    }

    pub fn cells(&self) -> usize {
        self.n() * self.periods()
    }

    /// `log |det S(rho)|`; `rho` must lie in the support.
    pub fn log_det_s(&self, rho: f64) -> f64 {
        self.logdet.eval(&self.weights, rho)
    }
}
