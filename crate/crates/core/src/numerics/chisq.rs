//! Central and noncentral chi-squared distribution functions.
//!
//! The noncentral CDF is the Poisson mixture
//! `F(x; k, nc) = sum_j Pois(j; nc/2) * P(chi2_{k+2j} <= x)`, summed outward
//! from the Poisson mode and truncated once a geometric bound on the
//! remaining Poisson mass on each side falls below [`TAIL_MASS`].

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{invalid, Result};

const TAIL_MASS: f64 = 1e-13;

fn check_args(x: f64, k: u32, nc: f64) -> Result<()> {
    if k == 0 {
        return Err(invalid("chi-squared degrees of freedom must be positive"));
    }
    if !(x >= 0.0) || x.is_nan() {
        return Err(invalid(format!("chi-squared quantile must be >= 0, got {x}")));
    }
    if !(nc >= 0.0) || !nc.is_finite() {
        return Err(invalid(format!("noncentrality must be finite and >= 0, got {nc}")));
    }
    Ok(())
}

/// `P(chi2_dof <= x)`.
pub fn central_chisq_cdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(dof / 2.0, x / 2.0)
}

/// `P(chi2_dof > x)`.
pub fn central_chisq_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(dof / 2.0, x / 2.0)
}

fn poisson_mixture(nc: f64, k: u32, term: impl Fn(f64) -> f64) -> f64 {
    let lambda = nc / 2.0;
    let mode = lambda.floor();
    let log_w = |j: f64| -lambda + j * lambda.ln() - ln_gamma(j + 1.0);
    let w_mode = log_w(mode).exp();
    let dof = |j: f64| k as f64 + 2.0 * j;

    let mut sum = w_mode * term(dof(mode));

    // upward: w_{j+1} = w_j * lambda / (j + 1); ratios shrink once j + 1 > lambda
    let mut j = mode;
    let mut w = w_mode;
    loop {
        let next = w * lambda / (j + 1.0);
        j += 1.0;
        w = next;
        sum += w * term(dof(j));
        let ratio = lambda / (j + 1.0);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < TAIL_MASS {
            break;
        }
        if w == 0.0 && j > lambda {
            break;
        }
    }

    // downward: w_{j-1} = w_j * j / lambda
    let mut j = mode;
    let mut w = w_mode;
    while j > 0.0 {
        w *= j / lambda;
        j -= 1.0;
        sum += w * term(dof(j));
        let ratio = j / lambda;
        if w * ratio / (1.0 - ratio) < TAIL_MASS {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Noncentral chi-squared CDF `F(x; k, nc)`.
pub fn noncentral_chisq_cdf(x: f64, k: u32, nc: f64) -> Result<f64> {
    check_args(x, k, nc)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if nc == 0.0 {
        return Ok(central_chisq_cdf(x, k as f64));
    }
    Ok(poisson_mixture(nc, k, |dof| central_chisq_cdf(x, dof)))
}

/// Noncentral chi-squared survival function `1 - F(x; k, nc)`, summed
/// directly so that small tail probabilities keep their relative accuracy.
pub fn noncentral_chisq_sf(x: f64, k: u32, nc: f64) -> Result<f64> {
    check_args(x, k, nc)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if nc == 0.0 {
        return Ok(central_chisq_sf(x, k as f64));
    }
    Ok(poisson_mixture(nc, k, |dof| central_chisq_sf(x, dof)))
}
