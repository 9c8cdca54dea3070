//! Generalized inverse Gaussian variates.

use rand::Rng;

/// Draw from the generalized inverse Gaussian law with density proportional
/// to `x^(p-1) exp(-(a x + b / x) / 2)` on `x > 0`, for `a > 0`, `b > 0`.
///
/// Uses Devroye's (2014) uniformly bounded rejection scheme on the
/// log scale of the two-parameter form `GIG(lambda, omega)`.
pub fn sample_gig<R: Rng + ?Sized>(p: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0, "GIG needs a > 0 and b > 0");
    let omega = (a * b).sqrt();
    let swap = p < 0.0;
    let lambda = p.abs();
    let x = sample_gig_standard(lambda, omega, rng);
    let x = if swap { 1.0 / x } else { x };
    x * (b / a).sqrt()
}

fn psi(x: f64, alpha: f64, lambda: f64) -> f64 {
    -alpha * (x.cosh() - 1.0) - lambda * (x.exp() - x - 1.0)
}

fn dpsi(x: f64, alpha: f64, lambda: f64) -> f64 {
    -alpha * x.sinh() - lambda * (x.exp() - 1.0)
}

/// Density proportional to `x^(lambda-1) exp(-omega (x + 1/x) / 2)`,
/// `lambda >= 0`, `omega > 0`.
fn sample_gig_standard<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let alpha = (omega * omega + lambda * lambda).sqrt() - lambda;

    let x = -psi(1.0, alpha, lambda);
    let t = if (0.5..=2.0).contains(&x) {
        1.0
    } else if x > 2.0 {
        if alpha == 0.0 && lambda == 0.0 {
            1.0
        } else {
            (2.0 / (alpha + lambda)).sqrt()
        }
    } else if alpha == 0.0 && lambda == 0.0 {
        1.0
    } else {
        (4.0 / (alpha + 2.0 * lambda)).ln()
    };

    let x = -psi(-1.0, alpha, lambda);
    let s = if (0.5..=2.0).contains(&x) {
        1.0
    } else if x > 2.0 {
        if alpha == 0.0 && lambda == 0.0 {
            1.0
        } else {
            (4.0 / (alpha * 1f64.cosh() + lambda)).sqrt()
        }
    } else if alpha == 0.0 && lambda == 0.0 {
        1.0
    } else if alpha == 0.0 {
        1.0 / lambda
    } else {
        let bound = (1.0 + 1.0 / alpha + (1.0 / (alpha * alpha) + 2.0 / alpha).sqrt()).ln();
        if lambda == 0.0 {
            bound
        } else {
            bound.min(1.0 / lambda)
        }
    };

    let eta = -psi(t, alpha, lambda);
    let zeta = -dpsi(t, alpha, lambda);
    let theta = -psi(-s, alpha, lambda);
    let xi = dpsi(-s, alpha, lambda);
    let p = 1.0 / xi;
    let r = 1.0 / zeta;
    let td = t - r * eta;
    let sd = s - p * theta;
    let q = td + sd;
    let total = p + q + r;

    let log_x = loop {
        let u: f64 = rng.random();
        let v: f64 = 1.0 - rng.random::<f64>();
        let w: f64 = rng.random();
        let cand = if u < q / total {
            -sd + q * v
        } else if u < (q + r) / total {
            td - r * v.ln()
        } else {
            -sd + p * v.ln()
        };
        let envelope = if cand > td {
            (-eta - zeta * (cand - t)).exp()
        } else if cand < -sd {
            (-theta + xi * (cand + s)).exp()
        } else {
            1.0
        };
        if w * envelope <= psi(cand, alpha, lambda).exp() {
            break cand;
        }
    };
    let scale = lambda / omega + (1.0 + lambda * lambda / (omega * omega)).sqrt();
    log_x.exp() * scale
}
