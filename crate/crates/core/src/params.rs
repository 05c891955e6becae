use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open_unit;

/// Distance from 1 below which the stability index is treated as exactly 1.
pub const UNIT_ALPHA_SNAP: f64 = 1e-10;

/// Parameter vector `[alpha, beta, gamma, delta]` of a stable law in the
/// 0-parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 2]")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta = {beta} outside [-1, 1]")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta = {delta} must be finite")));
        }
        Ok(StableParams { alpha, beta, gamma, delta })
    }

    pub fn from_array(theta: [f64; 4]) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2], theta[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }

    /// True when the alpha = 1 branch of the formulas applies.
    pub fn is_unit_alpha(&self) -> bool {
        is_unit_alpha(self.alpha)
    }

    /// Mean of the law, defined only for `1 < alpha <= 2`.
    pub fn mean(&self) -> Option<f64> {
        if self.alpha > 1.0 && !self.is_unit_alpha() {
            Some(self.delta - self.beta * self.gamma * skew_tan(self.alpha))
        } else {
            None
        }
    }
}

impl fmt::Display for StableParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.alpha, self.beta, self.gamma, self.delta)
    }
}

impl FromStr for StableParams {
    type Err = Error;

    /// Parses `a,b,g,d`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("cannot parse '{s}': {e}")))?;
        if parts.len() != 4 {
            return Err(Error::InvalidParameter(format!("expected 4 comma-separated values, got '{s}'")));
        }
        Self::new(parts[0], parts[1], parts[2], parts[3])
    }
}

pub(crate) fn is_unit_alpha(alpha: f64) -> bool {
    (alpha - 1.0).abs() < UNIT_ALPHA_SNAP
}

/// `tan(pi * alpha / 2)`, exactly zero at alpha = 2.
pub(crate) fn skew_tan(alpha: f64) -> f64 {
    if alpha == 2.0 {
        0.0
    } else {
        (PI * alpha / 2.0).tan()
    }
}

/// Axis-aligned box in `(alpha, beta, gamma, delta)` space. Serves both as the
/// support of the uniform prior and as the truncation region of proposals.
///
/// The lower ends of alpha and gamma are open when they sit at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl ParamBox {
    pub fn new(lower: [f64; 4], upper: [f64; 4]) -> Result<Self> {
        for k in 0..4 {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(Error::InvalidBox(format!(
                    "component {k}: need finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
        }
        if lower[0] < 0.0 || upper[0] > 2.0 {
            return Err(Error::InvalidBox("alpha range must lie within (0, 2]".into()));
        }
        if lower[1] < -1.0 || upper[1] > 1.0 {
            return Err(Error::InvalidBox("beta range must lie within [-1, 1]".into()));
        }
        if lower[2] < 0.0 {
            return Err(Error::InvalidBox("gamma range must be positive".into()));
        }
        Ok(ParamBox { lower, upper })
    }

    /// (0,2] x [-1,1] x (0,10] x [-5,5].
    pub fn p1() -> Self {
        ParamBox { lower: [0.0, -1.0, 0.0, -5.0], upper: [2.0, 1.0, 10.0, 5.0] }
    }

    /// (0,2] x [-1,1] x (0,100] x [-50,50].
    pub fn p2() -> Self {
        ParamBox { lower: [0.0, -1.0, 0.0, -50.0], upper: [2.0, 1.0, 100.0, 50.0] }
    }

    /// (0,2] x [-1,1] x (0,50] x [-10,10], used for the displacement data.
    pub fn p3() -> Self {
        ParamBox { lower: [0.0, -1.0, 0.0, -10.0], upper: [2.0, 1.0, 50.0, 10.0] }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "p1" => Ok(Self::p1()),
            "p2" => Ok(Self::p2()),
            "p3" => Ok(Self::p3()),
            other => Err(Error::InvalidBox(format!("unknown prior preset '{other}'"))),
        }
    }

    /// Parses `a_lo,a_hi,b_lo,b_hi,g_lo,g_hi,d_lo,d_hi`.
    pub fn parse_custom(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidBox(format!("cannot parse '{s}': {e}")))?;
        if v.len() != 8 {
            return Err(Error::InvalidBox("custom box needs 8 comma-separated bounds".into()));
        }
        Self::new([v[0], v[2], v[4], v[6]], [v[1], v[3], v[5], v[7]])
    }

    pub fn widths(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.upper[k] - self.lower[k])
    }

    pub fn midpoint(&self) -> [f64; 4] {
        std::array::from_fn(|k| 0.5 * (self.lower[k] + self.upper[k]))
    }

    pub fn contains(&self, theta: &[f64; 4]) -> bool {
        if !(theta[0] > 0.0 && theta[2] > 0.0) {
            return false;
        }
        (0..4).all(|k| theta[k] >= self.lower[k] && theta[k] <= self.upper[k])
    }

    /// Log density of the uniform prior on this box (`-inf` outside).
    pub fn log_density(&self, theta: &[f64; 4]) -> f64 {
        if self.contains(theta) {
            self.log_density_inside()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub(crate) fn log_density_inside(&self) -> f64 {
        -self.widths().iter().map(|w| w.ln()).sum::<f64>()
    }

    /// Independent uniform draw on the open box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        std::array::from_fn(|k| self.lower[k] + (self.upper[k] - self.lower[k]) * open_unit(rng))
    }

    /// Moves a point into the box, nudging off open zero boundaries.
    pub(crate) fn clamp(&self, theta: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for k in 0..4 {
            let lo = if (k == 0 || k == 2) && self.lower[k] <= 0.0 {
                f64::EPSILON * self.upper[k]
            } else {
                self.lower[k]
            };
            out[k] = theta[k].clamp(lo, self.upper[k]);
        }
        out
    }
}
