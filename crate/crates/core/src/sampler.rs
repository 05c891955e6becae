//! Chambers–Mallows–Stuck simulation of stable variates.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::params::{is_unit_alpha, skew_tan, StableParams};
use crate::rng::{open_angle, unit_exponential, SeedStream};

/// Deterministic kernel mapping a uniform angle `u` in (-pi/2, pi/2) and a
/// positive `v` to a standard stable variate `Z ~ S(alpha, beta, 1, 0; 1)`.
///
/// Returns a non-finite value when the exact result overflows `f64`, which
/// happens for very small `alpha`.
pub fn sample_standard(alpha: f64, beta: f64, u: f64, v: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) || !(-1.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha}, beta = {beta}")));
    }
    if !(u.abs() < FRAC_PI_2) || u.cos() <= 0.0 {
        return Err(Error::AngleDomain(u));
    }
    if !(v > 0.0) {
        return Err(Error::ExponentialDomain(v));
    }
    if alpha == 2.0 {
        return Ok(2.0 * u.sin() * v.sqrt());
    }
    if is_unit_alpha(alpha) {
        let shifted = FRAC_PI_2 + beta * u;
        let z = shifted * u.tan() - beta * (FRAC_PI_2 * v * u.cos() / shifted).ln();
        return Ok(z * 2.0 / PI);
    }
    let w = (beta * skew_tan(alpha)).atan() / alpha;
    let num = (alpha * (w + u)).sin();
    if num == 0.0 {
        return Ok(0.0);
    }
    // Assemble the magnitude in log space; the two power factors can be
    // individually huge when alpha is small.
    let log_mag = num.abs().ln() - ((alpha * w).cos() * u.cos()).ln() / alpha
        + (1.0 - alpha) / alpha * (((alpha * w + (alpha - 1.0) * u).cos()).ln() - v.ln());
    Ok(num.signum() * log_mag.exp())
}

/// Maps a standard variate onto `S(alpha, beta, gamma, delta; 0)`.
pub fn scale_shift(z: f64, params: &StableParams) -> f64 {
    if params.is_unit_alpha() {
        params.gamma * z + params.delta
    } else {
        params.gamma * (z - params.beta * skew_tan(params.alpha)) + params.delta
    }
}

/// One draw from `S(alpha, beta, gamma, delta; 0)`.
pub fn sample<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let u = open_angle(rng);
    let v = unit_exponential(rng);
    let z = sample_standard(params.alpha, params.beta, u, v).expect("validated parameters and open-interval draws");
    scale_shift(z, params)
}

/// Fills `out` with i.i.d. draws.
pub fn sample_into<R: Rng + ?Sized>(params: &StableParams, rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = sample(params, rng);
    }
}

/// `count` i.i.d. draws, reproducible from `seed`.
///
/// Fails with [`Error::NonFiniteDraw`] if a draw overflows `f64`.
pub fn generate_observations(params: &StableParams, count: usize, seed: u64) -> Result<ObservationSet> {
    generate_from_stream(params, count, SeedStream::new(seed), seed)
}

pub(crate) fn generate_from_stream(
    params: &StableParams,
    count: usize,
    stream: SeedStream,
    seed_label: u64,
) -> Result<ObservationSet> {
    if count == 0 {
        return Err(Error::InvalidObservations("count must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let mut values = vec![0.0; count];
    sample_into(params, &mut rng, &mut values);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDraw { alpha: params.alpha });
    }
    let mut obs = ObservationSet::new(values, format!("synthetic-{seed_label}"))?;
    obs.seed = Some(seed_label);
    obs.params = Some(*params);
    Ok(obs)
}
