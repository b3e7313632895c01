//! Scalar path maps: the prediction at multiplier `lambda` as a function of
//! the unconstrained prediction and the pointwise weight.

use crate::error::{Error, Result};

/// Below this magnitude the multiplier is treated as zero.
pub const LAMBDA_ZERO: f64 = 1e-10;

/// Squared-error path for a linear constraint with weight `c`.
#[inline]
pub fn linear_shift(psi0: f64, c: f64, lambda: f64) -> f64 {
    psi0 - lambda * c / 2.0
}

/// Cross-entropy path for a linear constraint with weight `c`: the root in
/// `(0, 1)` of `a psi^2 - (1 + a) psi + psi0` with `a = lambda * c`.
///
/// The quadratic is positive at 0 and negative at 1, so exactly one root lies
/// in the unit interval whatever the sign of `a`; it is the smaller root for
/// `a > 0` and the larger (negative-denominator) one for `a < 0`, and in both
/// cases equals `(b - sqrt(D)) / (2a)`. The form `2 psi0 / (b + sqrt(D))` is
/// used when `b >= 0` to avoid cancellation.
pub fn unit_root(psi0: f64, c: f64, lambda: f64) -> Result<f64> {
    if lambda.abs() < LAMBDA_ZERO {
        return Ok(psi0);
    }
    let a = lambda * c;
    if a == 0.0 {
        return Ok(psi0);
    }
    let b = 1.0 + a;
    let mut disc = b * b - 4.0 * a * psi0;
    if disc < 0.0 {
        if disc > -1e-12 * (b * b).max(1.0) {
            disc = 0.0;
        } else {
            return Err(Error::NegativeDiscriminant { value: disc });
        }
    }
    let root_d = disc.sqrt();
    let psi = if b >= 0.0 {
        2.0 * psi0 / (b + root_d)
    } else {
        (b - root_d) / (2.0 * a)
    };
    into_open_unit(psi)
}

/// Equalized-case-risk path: `psi0 (1 + lambda c) / (1 + lambda c psi0)`.
#[inline]
pub fn case_reweight(psi0: f64, c: f64, lambda: f64) -> f64 {
    let a = lambda * c;
    psi0 * (1.0 + a) / (1.0 + a * psi0)
}

/// Two-multiplier path for equal case and control risks:
/// `psi0 (1 + l1 c1) / (1 + l1 c1 psi0 + l2 c0 (1 - psi0))`.
#[inline]
pub fn cases_controls(psi0: f64, c1: f64, c0: f64, l1: f64, l2: f64) -> f64 {
    let a = l1 * c1;
    psi0 * (1.0 + a) / (1.0 + a * psi0 + l2 * c0 * (1.0 - psi0))
}

/// Residual of the cross-entropy path quadratic.
pub fn quadratic_residual(psi: f64, psi0: f64, c: f64, lambda: f64) -> f64 {
    let a = lambda * c;
    a * psi * psi - (1.0 + a) * psi + psi0
}

/// Map a mathematically interior value onto the open interval, absorbing
/// rounding onto the endpoints.
fn into_open_unit(psi: f64) -> Result<f64> {
    if !psi.is_finite() {
        return Err(Error::NoValidRoot);
    }
    const TOP: f64 = 1.0 - f64::EPSILON / 2.0;
    if psi >= 1.0 {
        if psi > 1.0 + 1e-9 {
            return Err(Error::NoValidRoot);
        }
        return Ok(TOP);
    }
    if psi <= 0.0 {
        if psi < -1e-9 {
            return Err(Error::NoValidRoot);
        }
        return Ok(f64::MIN_POSITIVE);
    }
    Ok(psi)
}
