use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, spd_inverse};
use crate::weights::WeightMatrix;

/// Variance used for every diffuse normal prior block.
pub const DIFFUSE_VARIANCE: f64 = 100.0;

/// Independent normal priors on `phi = (gamma, delta)'`, `beta` and each
/// loading row, a uniform prior on `rho`, and the Gamma hyper-prior of the
/// Lasso shrinkage parameter. Factors always have a `N(0, I_q)` prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub b_phi: DVector<f64>,
    pub cov_phi: DMatrix<f64>,
    pub b_beta: DVector<f64>,
    pub cov_beta: DMatrix<f64>,
    pub b_lambda: DVector<f64>,
    pub cov_lambda: DMatrix<f64>,
    /// `None` means the invertibility interval of the weight matrix.
    pub rho_support: Option<(f64, f64)>,
    pub enforce_stability: bool,
    /// Gamma shape of the squared Lasso parameter.
    pub lasso_c: f64,
    /// Gamma rate of the squared Lasso parameter.
    pub lasso_d: f64,
}

impl PriorSpec {
    /// Zero means, `100 I` covariances, `c = d = 1`, stability enforced.
    pub fn diffuse(k: usize, q: usize) -> Self {
        Self {
            b_phi: DVector::zeros(2),
            cov_phi: DMatrix::identity(2, 2) * DIFFUSE_VARIANCE,
            b_beta: DVector::zeros(k),
            cov_beta: DMatrix::identity(k, k) * DIFFUSE_VARIANCE,
            b_lambda: DVector::zeros(q),
            cov_lambda: DMatrix::identity(q, q) * DIFFUSE_VARIANCE,
            rho_support: None,
            enforce_stability: true,
            lasso_c: 1.0,
            lasso_d: 1.0,
        }
    }

    pub fn k(&self) -> usize {
        self.b_beta.len()
    }

    pub fn q(&self) -> usize {
        self.b_lambda.len()
    }

    pub fn validate(&self, k: usize, q: usize) -> Result<()> {
        check_block("phi", &self.b_phi, &self.cov_phi, 2)?;
        check_block("beta", &self.b_beta, &self.cov_beta, k)?;
        check_block("lambda", &self.b_lambda, &self.cov_lambda, q)?;
        if !(self.lasso_c > 0.0 && self.lasso_d > 0.0) {
            return Err(Error::InvalidArgument("lasso_c and lasso_d must be positive".into()));
        }
        if let Some((lo, hi)) = self.rho_support {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty rho support ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    /// Effective `rho` interval: the user interval intersected with the
    /// invertibility interval of `w`.
    pub fn rho_interval(&self, w: &WeightMatrix) -> Result<(f64, f64)> {
        let (lo, hi) = w.rho_support();
        match self.rho_support {
            None => Ok((lo, hi)),
            Some((a, b)) => {
                if a < lo || b > hi {
                    return Err(Error::InvalidArgument(format!(
                        "rho support ({a}, {b}) exceeds invertibility interval ({lo}, {hi})"
                    )));
                }
                Ok((a, b))
            }
        }
    }
}

fn check_block(name: &str, mean: &DVector<f64>, cov: &DMatrix<f64>, dim: usize) -> Result<()> {
    if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
        return Err(Error::Dimension(format!(
            "prior for {name} must have dimension {dim}, got mean {} and covariance {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    if !is_symmetric(cov, 1e-12) {
        return Err(Error::InvalidArgument(format!("prior covariance for {name} is not symmetric")));
    }
    if dim > 0 && nalgebra::Cholesky::new(cov.clone()).is_none() {
        return Err(Error::InvalidArgument(format!(
            "prior covariance for {name} is not positive definite"
        )));
    }
    Ok(())
}

/// Prior blocks in information form.
#[derive(Debug, Clone)]
pub(crate) struct PriorPrecision {
    pub phi: DMatrix<f64>,
    pub phi_h: DVector<f64>,
    pub beta: DMatrix<f64>,
    pub beta_h: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub lambda_h: DVector<f64>,
}

impl PriorPrecision {
    pub fn new(prior: &PriorSpec) -> Result<Self> {
        let phi = spd_inverse(&prior.cov_phi, "phi prior")?;
        let beta = if prior.k() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            spd_inverse(&prior.cov_beta, "beta prior")?
        };
        let lambda = if prior.q() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            spd_inverse(&prior.cov_lambda, "lambda prior")?
        };
        Ok(Self {
            phi_h: &phi * &prior.b_phi,
            beta_h: &beta * &prior.b_beta,
            lambda_h: &lambda * &prior.b_lambda,
            phi,
            beta,
            lambda,
        })
    }
}

/// A covariance given either as a full matrix or as a scalar multiple of
/// the identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceInput {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl CovarianceInput {
    fn resolve(&self, dim: usize, name: &str) -> Result<DMatrix<f64>> {
        match self {
            CovarianceInput::Scalar(s) => Ok(DMatrix::identity(dim, dim) * *s),
            CovarianceInput::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Dimension(format!(
                        "prior covariance for {name} must be {dim}x{dim}"
                    )));
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }
}

/// JSON prior file. Every field is optional; missing fields take the
/// diffuse defaults of [`PriorSpec::diffuse`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorFile {
    pub b_phi: Option<Vec<f64>>,
    #[serde(rename = "B_phi")]
    pub cov_phi: Option<CovarianceInput>,
    pub b_beta: Option<Vec<f64>>,
    #[serde(rename = "B_beta")]
    pub cov_beta: Option<CovarianceInput>,
    pub b_lambda: Option<Vec<f64>>,
    #[serde(rename = "B_lambda")]
    pub cov_lambda: Option<CovarianceInput>,
    pub rho_support: Option<(f64, f64)>,
    pub enforce_stability: Option<bool>,
    pub lasso_c: Option<f64>,
    pub lasso_d: Option<f64>,
}

impl PriorFile {
    pub fn resolve(&self, k: usize, q: usize) -> Result<PriorSpec> {
        let mut p = PriorSpec::diffuse(k, q);
        let vector = |v: &Vec<f64>, dim: usize, name: &str| -> Result<DVector<f64>> {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "prior mean for {name} must have length {dim}, got {}",
                    v.len()
                )));
            }
            Ok(DVector::from_column_slice(v))
        };
        if let Some(v) = &self.b_phi {
            p.b_phi = vector(v, 2, "phi")?;
        }
        if let Some(c) = &self.cov_phi {
            p.cov_phi = c.resolve(2, "phi")?;
        }
        if let Some(v) = &self.b_beta {
            p.b_beta = vector(v, k, "beta")?;
        }
        if let Some(c) = &self.cov_beta {
            p.cov_beta = c.resolve(k, "beta")?;
        }
        if let Some(v) = &self.b_lambda {
            p.b_lambda = vector(v, q, "lambda")?;
        }
        if let Some(c) = &self.cov_lambda {
            p.cov_lambda = c.resolve(q, "lambda")?;
        }
        p.rho_support = self.rho_support;
        if let Some(e) = self.enforce_stability {
            p.enforce_stability = e;
        }
        if let Some(c) = self.lasso_c {
            p.lasso_c = c;
        }
        if let Some(d) = self.lasso_d {
            p.lasso_d = d;
        }
        p.validate(k, q)?;
        Ok(p)
    }
}
