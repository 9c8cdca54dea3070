//! Spatial, temporal and spatiotemporal effects and the stability condition.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{spectral_radius, WeightMatrix};

/// `rho` (contemporaneous spillover), `gamma` (own lag) and `delta` (lagged
/// spillover).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl SpatialParams {
    pub fn new(rho: f64, gamma: f64, delta: f64) -> Self {
        Self { rho, gamma, delta }
    }

    pub fn abs_sum(&self) -> f64 {
        self.rho.abs() + self.gamma.abs() + self.delta.abs()
    }
}

/// Which test decided a [`StabilityVerdict`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityCriterion {
    /// `|rho| + |gamma| + |delta| < 1` with a row-normalized `M`.
    RowSumSufficient,
    /// Spectral radius of `A(rho, phi)` below one.
    Eigenvalue,
    /// `S(rho)` is singular.
    SingularS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub criterion: StabilityCriterion,
    pub spectral_radius: Option<f64>,
}

/// Relative pivot size below which `S(rho)` is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

/// `A(rho, phi) = S(rho)^{-1} (gamma I + delta M)`, or `None` when `S(rho)` is
/// singular.
pub fn transition_matrix(params: &SpatialParams, w: &WeightMatrix) -> Option<DMatrix<f64>> {
    let n = w.n();
    let s = w.build_s_unchecked(params.rho);
    let mut rhs = w.matrix() * params.delta;
    for i in 0..n {
        rhs[(i, i)] += params.gamma;
    }
    let lu = s.lu();
    let u = lu.u();
    let pivots = u.diagonal().map(f64::abs);
    if pivots.min() <= SINGULAR_PIVOT_RATIO * pivots.max() {
        return None;
    }
    lu.solve(&rhs)
}

/// Decide whether the log-squared process is stable. With a row-normalized
/// `M` the row-sum condition is tried first; otherwise, or when it fails, the
/// eigenvalues of `A(rho, phi)` decide.
pub fn stability_check(params: &SpatialParams, w: &WeightMatrix) -> StabilityVerdict {
    if w.is_row_normalized() && params.abs_sum() < 1.0 {
        return StabilityVerdict {
            stable: true,
            criterion: StabilityCriterion::RowSumSufficient,
            spectral_radius: None,
        };
    }
    match transition_matrix(params, w) {
        Some(a) => {
            let r = spectral_radius(&a);
            StabilityVerdict {
                stable: r < 1.0,
                criterion: StabilityCriterion::Eigenvalue,
                spectral_radius: Some(r),
            }
        }
        None => StabilityVerdict {
            stable: false,
            criterion: StabilityCriterion::SingularS,
            spectral_radius: None,
        },
    }
}

/// Like [`stability_check`] but turns an unstable verdict into an error.
pub fn require_stable(params: &SpatialParams, w: &WeightMatrix) -> Result<StabilityVerdict> {
    let v = stability_check(params, w);
    if v.stable {
        Ok(v)
    } else {
        Err(Error::Unstable(v.spectral_radius.unwrap_or(f64::INFINITY)))
    }
}
