//! Characteristic function in the 0-parameterization.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::params::{skew_tan, StableParams};

/// `Phi(u) = E[exp(i u X)]` for `X ~ S(alpha, beta, gamma, delta; 0)`.
pub fn characteristic_function(params: &StableParams, u: f64) -> Complex64 {
    log_characteristic_function(params, u).exp()
}

/// Logarithm of the characteristic function (the bracketed exponent).
pub fn log_characteristic_function(params: &StableParams, u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let StableParams { alpha, beta, gamma, delta } = *params;
    let au = u.abs();
    let gu = gamma * au;
    let sign = u.signum();
    if params.is_unit_alpha() {
        let skew = beta * (2.0 / PI) * sign * gu.ln();
        Complex64::new(-gu, delta * u - gu * skew)
    } else {
        let scale = gu.powf(alpha);
        // |gamma u|^(1 - alpha) - 1, accurate when alpha is close to 1.
        let correction = ((1.0 - alpha) * gu.ln()).exp_m1();
        let skew = beta * skew_tan(alpha) * sign * correction;
        Complex64::new(-scale, delta * u - scale * skew)
    }
}
