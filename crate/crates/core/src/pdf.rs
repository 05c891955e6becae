//! Stable densities and the factorized log-likelihood.
//!
//! General densities are computed from the Zolotarev integral
//! representation on a finite angular interval, evaluated entirely in log
//! space: `f(x) = c(x) * Int g(th) exp(-g(th)) d th` where `g` is monotone in
//! `th`. The integrand is a single bump located where `g = 1`; that point and
//! two truncation levels are found by root finding before the interval is
//! handed to adaptive Gauss–Kronrod quadrature. Each half of the interval is
//! parameterized by the distance to its own endpoint so that bumps pressed
//! against either end are resolved at full relative precision.
//!
//! Far tails (beyond `tail_switch` standardized units) use the power series
//! in `x^(-alpha k - 1)` when its truncation error is negligible. Gaussian
//! (`alpha = 2`) and Cauchy (`alpha = 1, beta = 0`) laws use closed forms.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::params::{skew_tan, StableParams};
use crate::quadrature::integrate;

/// Density floor applied before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Relative accuracy requested from the quadrature.
const QUAD_REL_TOL: f64 = 1e-8;
/// Relative error accepted when the node budget runs out.
const QUAD_REL_ACCEPT: f64 = 1e-6;
/// Truncation levels for `log g`; the neglected mass is below `e^-40` relative.
const LOG_G_LOW: f64 = -27.0;
const LOG_G_HIGH: f64 = 3.401_197_381_662_155; // ln 30
/// Relative truncation error demanded from the tail series.
const SERIES_REL_TOL: f64 = 1e-11;
const SERIES_MAX_TERMS: usize = 80;
/// Within this distance of 1, alpha is treated as exactly 1. Wider than the
/// sampler's snap: the general formula loses about `eps / |alpha - 1|`.
const PDF_UNIT_SNAP: f64 = 1e-8;
/// Below this `|beta|`, the alpha = 1 law is treated as Cauchy.
const UNIT_BETA_EPS: f64 = 1e-12;
/// Standardized distances from the mode point `zeta` treated as zero.
const ZETA_EPS: f64 = 1e-14;

/// Accuracy knobs for density evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfAccuracy {
    /// Absolute density error budget.
    pub target_abs_error: f64,
    /// Maximum integrand evaluations per density value.
    pub integration_nodes: usize,
    /// Standardized distance beyond which the tail series is tried.
    pub tail_switch: f64,
}

impl Default for PdfAccuracy {
    fn default() -> Self {
        PdfAccuracy { target_abs_error: 1e-6, integration_nodes: 3000, tail_switch: 50.0 }
    }
}

impl PdfAccuracy {
    pub fn new(target_abs_error: f64, integration_nodes: usize, tail_switch: f64) -> Result<Self> {
        if !(target_abs_error > 0.0) {
            return Err(Error::InvalidConfig("target_abs_error must be positive".into()));
        }
        if integration_nodes < 64 {
            return Err(Error::InvalidConfig("integration_nodes must be at least 64".into()));
        }
        if !(tail_switch > 0.0) {
            return Err(Error::InvalidConfig("tail_switch must be positive".into()));
        }
        Ok(PdfAccuracy { target_abs_error, integration_nodes, tail_switch })
    }
}

/// Log-density value with its error bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    /// Natural log of the density (`-inf` outside the support).
    pub log_density: f64,
    /// Estimated absolute error of the density itself.
    pub abs_error: f64,
    /// False when the accuracy budget could not be met.
    pub accurate: bool,
}

impl DensityEstimate {
    fn exact(log_density: f64) -> Self {
        DensityEstimate { log_density, abs_error: 0.0, accurate: true }
    }

    pub fn density(&self) -> f64 {
        self.log_density.exp()
    }
}

/// Summed log-likelihood of an observation vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    pub value: f64,
    /// True when at least one point density hit [`DENSITY_FLOOR`].
    pub floored: bool,
    pub floored_points: usize,
    /// Points whose density missed the accuracy budget (lenient mode only).
    pub inexact_points: usize,
}

/// Constants of one skew orientation of the Zolotarev integral (`alpha != 1`).
#[derive(Debug, Clone, Copy)]
struct Orientation {
    alpha: f64,
    zeta: f64,
    theta0: f64,
    span: f64,
    /// `alpha / (alpha - 1)`
    e1: f64,
    /// `ln cos(alpha theta0) / (alpha - 1)`
    cos_term: f64,
    /// `ln(alpha / (pi |alpha - 1|))`
    log_c: f64,
    /// `ln(1 + zeta^2)^(1/2)` used by the tail series.
    log_r: f64,
    /// `cos(theta0 + (alpha - 1) phi) = sin(lam + (1 - alpha) phi)`
    lam: f64,
    /// `cos(theta0 + (alpha - 1) phi) = sin(kappa + (alpha - 1) psi)`, and
    /// `sin(alpha phi) = sin(kappa + alpha psi)`
    kappa: f64,
}

impl Orientation {
    fn new(alpha: f64, beta: f64) -> Self {
        let bt = beta * skew_tan(alpha);
        let alpha_theta0 = bt.atan();
        let theta0 = alpha_theta0 / alpha;
        let log_cos_at0 = -0.5 * (bt * bt).ln_1p();
        let span = FRAC_PI_2 + theta0;
        // Both end offsets vanish for totally skewed laws; the atan2 forms keep them exact there.
        let (lam, kappa) = if alpha < 1.0 {
            let tv = (FRAC_PI_2 * alpha).tan();
            let lam = (1.0 - beta) * tv;
            let lam = lam.atan2(1.0 + beta * tv * tv) / alpha;
            (lam, FRAC_PI_2 - theta0 - (alpha - 1.0) * span)
        } else {
            let tw = (PI * (1.0 - 0.5 * alpha)).tan();
            (FRAC_PI_2 - theta0, ((1.0 + beta) * tw).atan2(1.0 - beta * tw * tw))
        };
        Orientation {
            alpha,
            zeta: -bt,
            theta0,
            span,
            e1: alpha / (alpha - 1.0),
            cos_term: log_cos_at0 / (alpha - 1.0),
            log_c: (alpha / (PI * (alpha - 1.0).abs())).ln(),
            log_r: 0.5 * (bt * bt).ln_1p(),
            lam,
            kappa,
        }
    }

    /// `log g` at the point with distance `phi` from the lower and `psi`
    /// from the upper end of the interval; `shift = e1 ln x1 + cos_term`.
    #[inline]
    fn log_g(&self, shift: f64, phi: f64, psi: f64) -> f64 {
        let a = self.alpha;
        // Measured from the nearer end so that factors vanishing there keep full precision.
        let (cos_theta, sin_aphi, c) = if phi < psi {
            ((self.lam + phi).sin(), (a * phi).sin(), (self.lam + (1.0 - a) * phi).sin())
        } else {
            (psi.sin(), (self.kappa + a * psi).sin(), (self.kappa + (a - 1.0) * psi).sin())
        };
        let ln_cos_theta = cos_theta.ln();
        shift + self.e1 * (ln_cos_theta - sin_aphi.ln()) + c.ln() - ln_cos_theta
    }

    /// `g` increases along the interval when alpha < 1.
    fn increasing(&self) -> bool {
        self.alpha < 1.0
    }

    /// Density at `x1 = x0 - zeta = 0`.
    fn log_density_at_zeta(&self) -> f64 {
        ln_gamma(1.0 + 1.0 / self.alpha) + self.theta0.cos().ln() - PI.ln() - (1.0 + self.zeta * self.zeta).ln() / (2.0 * self.alpha)
    }

    /// Tail power series in `x1`; `None` when it has not converged.
    fn tail_series(&self, x1: f64) -> Option<DensityEstimate> {
        let ln_x = x1.ln();
        let mut sum = 0.0;
        let mut prev_mag = f64::INFINITY;
        let mut err = f64::INFINITY;
        for k in 1..=SERIES_MAX_TERMS {
            let kf = k as f64;
            let log_mag = ln_gamma(self.alpha * kf + 1.0) - ln_gamma(kf + 1.0) + kf * self.log_r - self.alpha * kf * ln_x;
            let mag = log_mag.exp();
            let s = (kf * self.alpha * self.span).sin();
            let term = if k % 2 == 1 { mag * s } else { -mag * s };
            if mag > prev_mag {
                // Asymptotic series started diverging; the previous term bounds the error.
                err = prev_mag;
                break;
            }
            sum += term;
            prev_mag = mag;
            err = mag;
            if mag <= 1e-17 * sum.abs() {
                break;
            }
        }
        if sum > 0.0 && err <= SERIES_REL_TOL * sum {
            let log_density = sum.ln() - ln_x - PI.ln();
            Some(DensityEstimate { log_density, abs_error: err / (PI * x1), accurate: true })
        } else {
            None
        }
    }
}

/// Position on the angular interval: distance from the lower end (`Lower`)
/// or from the upper end (`Upper`), whichever half the point lies in.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Pos {
    Lower(f64),
    Upper(f64),
}

impl Pos {
    /// Monotone key along the interval.
    fn key(&self, span: f64) -> f64 {
        match *self {
            Pos::Lower(phi) => phi,
            Pos::Upper(psi) => span - psi,
        }
    }

    fn phi_psi(&self, span: f64) -> (f64, f64) {
        match *self {
            Pos::Lower(phi) => (phi, span - phi),
            Pos::Upper(psi) => (span - psi, psi),
        }
    }
}

/// Solve `h(coord) = 0` for an `h` monotone in `coord` on `(0, hi]`, working
/// in `ln(coord)`. Returns the clamped end when no sign change exists.
fn solve_log_coordinate<F: FnMut(f64) -> f64>(mut h: F, hi: f64, increasing: bool) -> f64 {
    let lo = hi * 1e-290;
    let sign = if increasing { 1.0 } else { -1.0 };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut fa = sign * h(lo);
    let mut fb = sign * h(hi);
    if !(fa < 0.0) {
        return lo;
    }
    if !(fb > 0.0) {
        return hi;
    }
    // Illinois variant of regula falsi on an increasing function.
    let mut side = 0;
    for _ in 0..200 {
        let c = if fa.is_finite() && fb.is_finite() { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = sign * h(c.exp());
        if fc.abs() < 1e-3 || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            return c.exp();
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    (0.5 * (a + b)).exp()
}

/// Monotone integrand description shared by the alpha != 1 and alpha = 1 cases.
trait Bump {
    fn span(&self) -> f64;
    fn increasing(&self) -> bool;
    fn log_g_at(&self, phi: f64, psi: f64) -> f64;
}

struct GeneralBump<'a> {
    o: &'a Orientation,
    shift: f64,
}

impl Bump for GeneralBump<'_> {
    fn span(&self) -> f64 {
        self.o.span
    }
    fn increasing(&self) -> bool {
        self.o.increasing()
    }
    #[inline]
    fn log_g_at(&self, phi: f64, psi: f64) -> f64 {
        self.o.log_g(self.shift, phi, psi)
    }
}

struct UnitBump {
    beta: f64,
    /// `-pi x / (2 beta) + ln(2 / pi)`
    shift: f64,
}

impl Bump for UnitBump {
    fn span(&self) -> f64 {
        PI
    }
    fn increasing(&self) -> bool {
        true
    }
    #[inline]
    fn log_g_at(&self, phi: f64, psi: f64) -> f64 {
        // theta = phi - pi/2 = pi/2 - psi
        let (cos_theta, tan_theta) = if phi < psi {
            let s = phi.sin();
            (s, -phi.cos() / s)
        } else {
            let s = psi.sin();
            (s, psi.cos() / s)
        };
        let lin = FRAC_PI_2 * (1.0 - self.beta) + self.beta * phi;
        self.shift + lin.ln() - cos_theta.ln() + lin * tan_theta / self.beta
    }
}

fn locate<B: Bump>(bump: &B, level: f64) -> Pos {
    let span = bump.span();
    let mid = 0.5 * span;
    let inc = bump.increasing();
    let at_mid = bump.log_g_at(mid, span - mid) - level;
    // Orient so that `d` increases with phi.
    let d_mid = if inc { at_mid } else { -at_mid };
    if d_mid > 0.0 {
        let phi = solve_log_coordinate(|phi| bump.log_g_at(phi, span - phi) - level, mid, inc);
        Pos::Lower(phi)
    } else {
        let psi = solve_log_coordinate(|psi| bump.log_g_at(span - psi, psi) - level, mid, !inc);
        Pos::Upper(psi)
    }
}

/// `ln Int g exp(-g) d theta` together with the relative error estimate.
fn log_bump_integral<B: Bump>(bump: &B, max_evals: usize, abs_tol_rel: f64) -> (f64, f64, bool) {
    let span = bump.span();
    let mid = 0.5 * span;
    let peak = locate(bump, 0.0);
    let (a, b) = if bump.increasing() {
        (locate(bump, LOG_G_LOW), locate(bump, LOG_G_HIGH))
    } else {
        (locate(bump, LOG_G_HIGH), locate(bump, LOG_G_LOW))
    };
    let (pp, qq) = peak.phi_psi(span);
    let lg_peak = bump.log_g_at(pp, qq);
    let scale = lg_peak - lg_peak.exp();

    let mut points = vec![a, peak, b];
    points.sort_by(|x, y| x.key(span).total_cmp(&y.key(span)));
    points.dedup_by(|x, y| x.key(span) == y.key(span));

    // Build tagged segments: tag 0 integrates over phi, tag 1 over psi.
    let mut segments: Vec<(usize, f64, f64)> = Vec::with_capacity(4);
    for w in points.windows(2) {
        let (l, r) = (w[0], w[1]);
        match (l, r) {
            (Pos::Lower(p1), Pos::Lower(p2)) => segments.push((0, p1, p2)),
            (Pos::Upper(q1), Pos::Upper(q2)) => segments.push((1, q2, q1)),
            (Pos::Lower(p1), Pos::Upper(q2)) => {
                segments.push((0, p1, mid));
                segments.push((1, q2, span - mid));
            }
            (Pos::Upper(_), Pos::Lower(_)) => unreachable!("points are sorted"),
        }
    }
    if segments.is_empty() {
        return (f64::NEG_INFINITY, 0.0, true);
    }

    let integrand = |tag: usize, c: f64| -> f64 {
        let lg = if tag == 0 { bump.log_g_at(c, span - c) } else { bump.log_g_at(span - c, c) };
        let v = (lg - lg.exp() - scale).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let r = integrate(integrand, &segments, 0.0, QUAD_REL_TOL, max_evals);
    if !(r.value > 0.0) {
        return (f64::NEG_INFINITY, 0.0, r.converged);
    }
    let rel = r.error / r.value;
    let ok = r.converged || rel <= QUAD_REL_ACCEPT || rel <= abs_tol_rel;
    (r.value.ln() + scale, rel, ok)
}

/// Standard (`gamma = 1`, `delta = 0`) stable law with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct StandardStable {
    kind: Kind,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Gaussian,
    Cauchy,
    Unit { beta: f64 },
    General { pos: Orientation, neg: Orientation },
}

impl StandardStable {
    pub fn new(alpha: f64, beta: f64) -> Self {
        let kind = if alpha == 2.0 {
            Kind::Gaussian
        } else if (alpha - 1.0).abs() < PDF_UNIT_SNAP {
            if beta.abs() < UNIT_BETA_EPS {
                Kind::Cauchy
            } else {
                Kind::Unit { beta }
            }
        } else {
            Kind::General { pos: Orientation::new(alpha, beta), neg: Orientation::new(alpha, -beta) }
        };
        StandardStable { kind }
    }

    /// Log density at the standardized point `x0`; `abs_tol` is the absolute
    /// error budget for the standardized density.
    pub fn log_density(&self, x0: f64, abs_tol: f64, acc: &PdfAccuracy) -> DensityEstimate {
        match self.kind {
            Kind::Gaussian => DensityEstimate::exact(-0.25 * x0 * x0 - LN_2 - 0.5 * PI.ln()),
            Kind::Cauchy => DensityEstimate::exact(-PI.ln() - x0.mul_add(x0, 1.0).ln()),
            Kind::Unit { beta } => {
                let (x, b) = if beta > 0.0 { (x0, beta) } else { (-x0, -beta) };
                let bump = UnitBump { beta: b, shift: -PI * x / (2.0 * b) + (2.0 / PI).ln() };
                let log_c = -(2.0 * b).ln();
                finish(log_bump_integral(&bump, acc.integration_nodes, abs_tol), log_c, abs_tol)
            }
            Kind::General { pos, neg } => {
                let (o, x1) = if x0 >= pos.zeta { (&pos, x0 - pos.zeta) } else { (&neg, -x0 - neg.zeta) };
                if o.span <= 0.0 {
                    return DensityEstimate::exact(f64::NEG_INFINITY);
                }
                if x1 <= ZETA_EPS * (1.0 + o.zeta.abs()) {
                    return DensityEstimate::exact(o.log_density_at_zeta());
                }
                if x1 > acc.tail_switch {
                    if let Some(est) = o.tail_series(x1) {
                        return est;
                    }
                }
                let ln_x1 = x1.ln();
                let bump = GeneralBump { o, shift: o.e1 * ln_x1 + o.cos_term };
                finish(log_bump_integral(&bump, acc.integration_nodes, abs_tol), o.log_c - ln_x1, abs_tol)
            }
        }
    }
}

fn finish((log_int, rel, ok): (f64, f64, bool), log_c: f64, abs_tol: f64) -> DensityEstimate {
    let log_density = log_int + log_c;
    let abs_error = rel * log_density.exp();
    DensityEstimate { log_density, abs_error, accurate: ok || abs_error <= abs_tol }
}

/// Log density estimate of `S(alpha, beta, gamma, delta; 0)` at `x`.
pub fn log_density_estimate(params: &StableParams, x: f64, acc: &PdfAccuracy) -> DensityEstimate {
    let std = StandardStable::new(params.alpha, params.beta);
    scaled_estimate(&std, params, x, acc)
}

fn scaled_estimate(std: &StandardStable, params: &StableParams, x: f64, acc: &PdfAccuracy) -> DensityEstimate {
    let z = (x - params.delta) / params.gamma;
    let mut est = std.log_density(z, acc.target_abs_error * params.gamma, acc);
    est.log_density -= params.gamma.ln();
    est.abs_error /= params.gamma;
    est
}

/// Density of `S(alpha, beta, gamma, delta; 0)` at `x`.
pub fn pdf(params: &StableParams, x: f64, acc: &PdfAccuracy) -> Result<f64> {
    log_pdf(params, x, acc).map(f64::exp)
}

/// Natural log of the density at `x`.
pub fn log_pdf(params: &StableParams, x: f64, acc: &PdfAccuracy) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x = {x} must be finite")));
    }
    let est = log_density_estimate(params, x, acc);
    if est.accurate {
        Ok(est.log_density)
    } else {
        Err(Error::AccuracyNotMet { estimate: est.density(), error: est.abs_error })
    }
}

fn accumulate(params: &StableParams, obs: &ObservationSet, acc: &PdfAccuracy, strict: bool) -> Result<LogLikelihood> {
    let std = StandardStable::new(params.alpha, params.beta);
    let floor = DENSITY_FLOOR.ln();
    let mut ll = LogLikelihood { value: 0.0, floored: false, floored_points: 0, inexact_points: 0 };
    for &y in &obs.values {
        let est = scaled_estimate(&std, params, y, acc);
        if !est.accurate {
            if strict {
                return Err(Error::AccuracyNotMet { estimate: est.density(), error: est.abs_error });
            }
            ll.inexact_points += 1;
        }
        let lp = if est.log_density.is_nan() { f64::NEG_INFINITY } else { est.log_density };
        if lp < floor {
            ll.floored = true;
            ll.floored_points += 1;
            ll.value += floor;
        } else {
            ll.value += lp;
        }
    }
    Ok(ll)
}

/// `sum_t log max(pdf(y_t), DENSITY_FLOOR)`; fails if any point misses the
/// accuracy budget.
pub fn log_likelihood(params: &StableParams, obs: &ObservationSet, acc: &PdfAccuracy) -> Result<LogLikelihood> {
    accumulate(params, obs, acc, true)
}

/// As [`log_likelihood`], but keeps the best available estimate for points
/// that miss the accuracy budget and counts them in `inexact_points`.
pub fn log_likelihood_lenient(params: &StableParams, obs: &ObservationSet, acc: &PdfAccuracy) -> LogLikelihood {
    accumulate(params, obs, acc, false).expect("lenient accumulation never fails")
}
