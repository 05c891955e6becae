//! Empirical convergence rates of clipped self-normalized importance sampling.
//!
//! Toy problem on `[0, 1]`: unnormalized target `h(x) = 1 + x^2`, uniform
//! proposal, so the raw weight is `g(x) = h(x)` and `1/2 <= g <= 2`, i.e. `a = 2`.
//! Perturbed weights are `g(x) (1 + e' (2x - 1))` with `e = 2 e'`, which keeps
//! `g` bounded by `a_e = 2 (1 + e')`.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rng::{open_unit, SeedStream};
use crate::stats::{fit_line, LineFit};
use crate::weights::{clip_log_weights, normalize_log_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeFunction {
    /// `f(x) = x`
    Identity,
    /// `f(x) = 1`
    One,
}

impl ProbeFunction {
    fn eval(self, x: f64) -> f64 {
        match self {
            ProbeFunction::Identity => x,
            ProbeFunction::One => 1.0,
        }
    }

    /// `(f, pi)` under the unperturbed target.
    pub fn exact(self) -> f64 {
        match self {
            // (1/2 + 1/4) / (4/3)
            ProbeFunction::Identity => 9.0 / 16.0,
            ProbeFunction::One => 1.0,
        }
    }

    pub fn sup_norm(self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NisRateProbe {
    pub sample_sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub replications: usize,
    pub function: ProbeFunction,
    pub seed: u64,
}

impl Default for NisRateProbe {
    fn default() -> Self {
        NisRateProbe {
            sample_sizes: vec![100, 1000, 10_000],
            epsilons: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            replications: 200,
            function: ProbeFunction::Identity,
            seed: 2024,
        }
    }
}

impl NisRateProbe {
    /// Bound on the unperturbed raw weights.
    pub const A: f64 = 2.0;
    /// Normalizing constant `(1, h)`.
    pub const H_MASS: f64 = 4.0 / 3.0;

    pub fn clip_count(m: usize) -> usize {
        (m as f64).sqrt().floor() as usize
    }

    /// Weight bound under perturbation `eps`.
    pub fn a_eps(eps: f64) -> f64 {
        Self::A * (1.0 + eps / 2.0)
    }

    /// Constant in the linear-in-`eps` bias term.
    pub fn c_constant(&self) -> f64 {
        2.0 * self.function.sup_norm() / Self::H_MASS
    }

    fn validate(&self) -> Result<()> {
        if self.sample_sizes.len() < 2 || self.sample_sizes.iter().any(|&m| Self::clip_count(m) < 2 || Self::clip_count(m) >= m) {
            return Err(Error::InvalidConfig("need at least two sample sizes with 1 < floor(sqrt(M)) < M".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(0.0..2.0).contains(e)) {
            return Err(Error::InvalidConfig("epsilons must lie in [0, 2)".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("need at least one replication".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCell {
    pub m: usize,
    pub clip: usize,
    pub epsilon: f64,
    pub mae_unclipped: f64,
    pub mae_clipped: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
    /// `2 a_e^2 |f| M_T / M`
    pub bound: f64,
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl FitSummary {
    fn from_fit(fit: LineFit, n: usize) -> Self {
        let half = if n > 2 && fit.slope_se.is_finite() {
            let t = StudentsT::new(0.0, 1.0, (n - 2) as f64).expect("positive degrees of freedom");
            t.inverse_cdf(0.975) * fit.slope_se
        } else {
            f64::INFINITY
        };
        FitSummary { slope: fit.slope, intercept: fit.intercept, slope_se: fit.slope_se, ci_low: fit.slope - half, ci_high: fit.slope + half }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub probe: NisRateProbe,
    pub exact: f64,
    pub a: f64,
    pub f_sup: f64,
    pub c_constant: f64,
    pub cells: Vec<RateCell>,
    /// log(MAE) on log(M) at the smallest epsilon.
    pub m_slope_unclipped: FitSummary,
    pub m_slope_clipped: FitSummary,
    /// log(mean gap) on log(M) at the smallest epsilon.
    pub gap_slope: FitSummary,
    /// MAE on epsilon at the largest M.
    pub eps_slope_unclipped: Option<FitSummary>,
    pub eps_slope_clipped: Option<FitSummary>,
    pub total_bound_violations: usize,
}

/// Ratio estimate `sum w f / sum w`.
fn ratio(weights: &[f64], fx: &[f64]) -> f64 {
    let num: f64 = weights.iter().zip(fx).map(|(w, f)| w * f).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

/// Unclipped and clipped estimates for one replication.
pub fn estimate_pair(xs: &[f64], epsilon: f64, clip: usize, function: ProbeFunction) -> Result<(f64, f64)> {
    let half = epsilon / 2.0;
    let log_w: Vec<f64> = xs.iter().map(|&x| ((1.0 + x * x) * (1.0 + half * (2.0 * x - 1.0))).ln()).collect();
    let fx: Vec<f64> = xs.iter().map(|&x| function.eval(x)).collect();
    let plain = normalize_log_weights(&log_w)?;
    let clipped = clip_log_weights(&log_w, clip)?;
    Ok((ratio(&plain, &fx), ratio(&clipped, &fx)))
}

pub fn rate_probe(probe: &NisRateProbe) -> Result<RateReport> {
    probe.validate()?;
    let exact = probe.function.exact();
    let f_sup = probe.function.sup_norm();
    let root = SeedStream::new(probe.seed).named("rate-probe");
    let mut cells = Vec::new();
    for &m in &probe.sample_sizes {
        let clip = NisRateProbe::clip_count(m);
        // Common random numbers across epsilons.
        let draws: Vec<Vec<f64>> = (0..probe.replications)
            .map(|r| {
                let mut rng = root.child(m as u64).child(r as u64).rng();
                (0..m).map(|_| open_unit(&mut rng)).collect()
            })
            .collect();
        for &eps in &probe.epsilons {
            let a = NisRateProbe::a_eps(eps);
            let bound = 2.0 * a * a * f_sup * clip as f64 / m as f64;
            let (mut eu, mut ec, mut gap_sum, mut max_gap, mut violations) = (0.0, 0.0, 0.0, 0.0f64, 0);
            for xs in &draws {
                let (u, c) = estimate_pair(xs, eps, clip, probe.function)?;
                let gap = (c - u).abs();
                eu += (u - exact).abs();
                ec += (c - exact).abs();
                gap_sum += gap;
                max_gap = max_gap.max(gap);
                violations += (gap > bound) as usize;
            }
            let n = probe.replications as f64;
            cells.push(RateCell {
                m,
                clip,
                epsilon: eps,
                mae_unclipped: eu / n,
                mae_clipped: ec / n,
                mean_gap: gap_sum / n,
                max_gap,
                bound,
                bound_violations: violations,
            });
        }
    }
    let eps0 = probe.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let at_eps0: Vec<&RateCell> = cells.iter().filter(|c| c.epsilon == eps0).collect();
    let log_m: Vec<f64> = at_eps0.iter().map(|c| (c.m as f64).ln()).collect();
    let loglog = |sel: fn(&RateCell) -> f64| {
        let y: Vec<f64> = at_eps0.iter().map(|c| sel(c).ln()).collect();
        FitSummary::from_fit(fit_line(&log_m, &y), log_m.len())
    };
    let m_slope_unclipped = loglog(|c| c.mae_unclipped);
    let m_slope_clipped = loglog(|c| c.mae_clipped);
    let gap_slope = loglog(|c| c.mean_gap);
    let m_max = *probe.sample_sizes.iter().max().expect("validated");
    let at_mmax: Vec<&RateCell> = cells.iter().filter(|c| c.m == m_max).collect();
    let eps_fit = |sel: fn(&RateCell) -> f64| {
        (at_mmax.len() >= 2).then(|| {
            let x: Vec<f64> = at_mmax.iter().map(|c| c.epsilon).collect();
            let y: Vec<f64> = at_mmax.iter().map(|c| sel(c)).collect();
            FitSummary::from_fit(fit_line(&x, &y), x.len())
        })
    };
    Ok(RateReport {
        probe: probe.clone(),
        exact,
        a: NisRateProbe::A,
        f_sup,
        c_constant: probe.c_constant(),
        eps_slope_unclipped: eps_fit(|c| c.mae_unclipped),
        eps_slope_clipped: eps_fit(|c| c.mae_clipped),
        total_bound_violations: cells.iter().map(|c| c.bound_violations).sum(),
        cells,
        m_slope_unclipped,
        m_slope_clipped,
        gap_slope,
    })
}

pub fn cells_csv(report: &RateReport) -> String {
    let mut out = String::from("m,clip,epsilon,mae_unclipped,mae_clipped,mean_gap,max_gap,bound,bound_violations\n");
    for c in &report.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.m, c.clip, c.epsilon, c.mae_unclipped, c.mae_clipped, c.mean_gap, c.max_gap, c.bound, c.bound_violations
        ));
    }
    out
}
