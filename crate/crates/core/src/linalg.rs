use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Gaussian in information form: precision `P` and potential `h`, so that
/// the mean is `P^{-1} h` and the covariance `P^{-1}`.
pub struct GaussianInfo {
    chol: Cholesky<f64, Dyn>,
    mean: DVector<f64>,
}

impl GaussianInfo {
    pub fn new(precision: DMatrix<f64>, potential: &DVector<f64>, block: &'static str) -> Result<Self> {
        let chol = Cholesky::new(precision).ok_or(Error::NotPositiveDefinite { block })?;
        let mean = chol.solve(potential);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { block });
        }
        Ok(Self { chol, mean })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `mean + L^{-T} z` with `z ~ N(0, I)` and `P = L L'`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        let l = self.chol.l_dirty();
        let dev = l
            .tr_solve_lower_triangular(&z)
            .expect("cholesky factor has a positive diagonal");
        &self.mean + dev
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>, block: &'static str) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite { block })?;
    Ok(chol.inverse())
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}
