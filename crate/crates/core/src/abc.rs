//! Population Monte Carlo ABC with quantile summaries.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::params::{ParamBox, StableParams};
use crate::proposal::ProposalSpec;
use crate::report::{FitReport, IterationRecord, ParticleSet};
use crate::rng::SeedStream;
use crate::sampler::sample_into;
use crate::stats::{quantile_sorted, sorted_copy};
use crate::weights::{normalize_log_weights, ness, regularize_covariance, weighted_moments};

/// Quantile combinations `(nu_alpha, nu_beta, nu_gamma, nu_delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats(pub [f64; 4]);

/// McCulloch-style quantile summaries of `data` (at least 5 values).
pub fn summarize(data: &[f64]) -> Result<SummaryStats> {
    if data.len() < 5 {
        return Err(Error::DegenerateData(format!("need at least 5 values, got {}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite value".into()));
    }
    let s = sorted_copy(data);
    let q = |p| quantile_sorted(&s, p);
    let (q05, q25, q50, q75, q95) = (q(0.05), q(0.25), q(0.5), q(0.75), q(0.95));
    let iqr = q75 - q25;
    if !(iqr > 0.0) || !iqr.is_finite() {
        return Err(Error::DegenerateData("interquartile range is zero".into()));
    }
    let spread = q95 - q05;
    let nu_a = spread / iqr;
    let nu_b = (q95 + q05 - 2.0 * q50) / spread;
    let out = [nu_a, nu_b, iqr, q50];
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("summary is not finite".into()));
    }
    Ok(SummaryStats(out))
}

/// Per-coordinate scales for the standardized Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceScales(pub [f64; 4]);

pub fn distance(a: &SummaryStats, b: &SummaryStats, scales: &DistanceScales) -> f64 {
    (0..4).map(|k| ((a.0[k] - b.0[k]) / scales.0[k]).powi(2)).sum::<f64>().sqrt()
}

/// Summary of `count` pseudo-observations simulated at `theta`.
fn simulate_summary(theta: &[f64; 4], count: usize, stream: SeedStream) -> Option<SummaryStats> {
    let params = StableParams::from_array(*theta).ok()?;
    let mut rng = stream.rng();
    let mut y = vec![0.0; count];
    sample_into(&params, &mut rng, &mut y);
    summarize(&y).ok()
}

/// Median absolute deviation of each summary over `sims` prior-predictive
/// data sets; coordinates with zero spread get scale 1.
pub fn estimate_scales(prior: &ParamBox, count: usize, sims: usize, stream: SeedStream) -> DistanceScales {
    let summaries: Vec<SummaryStats> = (0..sims)
        .into_par_iter()
        .filter_map(|i| {
            let s = stream.child(i as u64);
            let mut rng = s.named("theta").rng();
            let theta = prior.sample(&mut rng);
            simulate_summary(&theta, count, s.named("data"))
        })
        .collect();
    let mut scales = [1.0; 4];
    for (k, scale) in scales.iter_mut().enumerate() {
        let col: Vec<f64> = summaries.iter().map(|s| s.0[k]).collect();
        if col.is_empty() {
            continue;
        }
        let med = quantile_sorted(&sorted_copy(&col), 0.5);
        let dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
        let mad = quantile_sorted(&sorted_copy(&dev), 0.5);
        if mad > 0.0 && mad.is_finite() {
            *scale = mad;
        }
    }
    DistanceScales(scales)
}

/// Distance between `target` and data simulated at `theta`; infinite when the
/// pseudo-data has degenerate summaries.
pub fn simulated_distance(theta: &[f64; 4], target: &SummaryStats, scales: &DistanceScales, count: usize, stream: SeedStream) -> f64 {
    simulate_summary(theta, count, stream).map_or(f64::INFINITY, |s| distance(&s, target, scales))
}

/// The 100, 99, ..., 1, 0.9, ..., 0.1 tolerance schedule (109 levels).
pub fn default_schedule() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
    v.extend((1..=9).rev().map(|k| k as f64 / 10.0));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbcConfig {
    pub tolerance_schedule: Vec<f64>,
    pub accepted_per_iteration: usize,
    pub prior: ParamBox,
    pub max_draws_per_iteration: u64,
    #[serde(skip)]
    pub wall_clock_budget: Duration,
    /// Prior-predictive simulations used to fix the distance scales.
    pub scale_simulations: usize,
    pub seed: u64,
}

impl AbcConfig {
    pub fn new(tolerance_schedule: Vec<f64>, accepted_per_iteration: usize, prior: ParamBox, seed: u64) -> Result<Self> {
        let cfg = AbcConfig {
            tolerance_schedule,
            accepted_per_iteration,
            prior,
            max_draws_per_iteration: 1_000_000,
            wall_clock_budget: Duration::from_secs(15 * 60),
            scale_simulations: 1000,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.tolerance_schedule;
        if s.is_empty() {
            return Err(Error::InvalidConfig("tolerance schedule is empty".into()));
        }
        if s.iter().any(|e| !(*e >= 0.0) || e.is_nan()) {
            return Err(Error::InvalidConfig("tolerances must be non-negative".into()));
        }
        if s.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig("tolerance schedule must be non-increasing".into()));
        }
        if self.accepted_per_iteration < 2 {
            return Err(Error::InvalidConfig("need at least 2 particles per iteration".into()));
        }
        if self.max_draws_per_iteration == 0 {
            return Err(Error::InvalidConfig("draw budget must be positive".into()));
        }
        Ok(())
    }
}

/// Parses a comma- or newline-separated tolerance list.
pub fn parse_schedule(text: &str) -> Result<Vec<f64>> {
    if text.trim() == "default" {
        return Ok(default_schedule());
    }
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("bad tolerance '{t}': {e}"))))
        .collect()
}

/// Accepted population of one tolerance level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbcPopulation {
    pub samples: Vec<[f64; 4]>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub summaries: Vec<SummaryStats>,
    pub distances: Vec<f64>,
    /// Index of the accepted draw within this iteration's draw sequence.
    pub draw_indices: Vec<u64>,
    pub draws: u64,
}

impl AbcPopulation {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.draws as f64
    }
}

const BATCH: u64 = 512;

/// Draws `(theta, pseudo-data)` pairs until `accepted_per_iteration` land
/// within `epsilon`, or fails with the budget. Acceptance is decided in draw
/// order so the result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn abc_iteration(
    config: &AbcConfig,
    proposal: &ProposalSpec,
    target: &SummaryStats,
    scales: &DistanceScales,
    count: usize,
    epsilon: f64,
    stream: SeedStream,
    deadline: Option<Instant>,
) -> Result<AbcPopulation> {
    let m = config.accepted_per_iteration;
    let mut pop = AbcPopulation {
        samples: Vec::with_capacity(m),
        log_weights: Vec::with_capacity(m),
        weights: Vec::new(),
        summaries: Vec::with_capacity(m),
        distances: Vec::with_capacity(m),
        draw_indices: Vec::with_capacity(m),
        draws: 0,
    };
    let mut next = 0u64;
    while pop.samples.len() < m {
        if next >= config.max_draws_per_iteration || deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::BudgetExhausted { draws: next, accepted: pop.samples.len(), needed: m });
        }
        let end = (next + BATCH).min(config.max_draws_per_iteration);
        let batch: Vec<_> = (next..end)
            .into_par_iter()
            .map(|j| {
                let s = stream.child(j);
                let mut rng = s.named("theta").rng();
                let ((theta, _), _) = proposal.draw_one(&mut rng);
                let summary = simulate_summary(&theta, count, s.named("data"));
                let d = summary.map_or(f64::INFINITY, |v| distance(&v, target, scales));
                (j, theta, summary, d)
            })
            .collect();
        for (j, theta, summary, d) in batch {
            pop.draws = j + 1;
            if d <= epsilon {
                pop.samples.push(theta);
                pop.summaries.push(summary.expect("finite distance implies a summary"));
                pop.distances.push(d);
                pop.draw_indices.push(j);
                if pop.samples.len() == m {
                    break;
                }
            }
        }
        next = end;
    }
    pop.log_weights = pop
        .samples
        .iter()
        .map(|t| config.prior.log_density(t) - proposal.log_density_unnormalized(t))
        .collect();
    pop.weights = normalize_log_weights(&pop.log_weights)?;
    Ok(pop)
}

/// Runs the full tolerance schedule.
pub fn abc_fit(obs: &ObservationSet, config: &AbcConfig, truth: Option<&StableParams>) -> Result<FitReport> {
    config.validate()?;
    let started = Instant::now();
    let deadline = started + config.wall_clock_budget;
    let mut report = FitReport::new("abc", truth.copied());
    let target = summarize(&obs.values)?;
    let root = SeedStream::new(config.seed).named("abc");
    let scales = estimate_scales(&config.prior, obs.len(), config.scale_simulations, root.named("scales"));
    let mut spec = ProposalSpec::prior(config.prior);
    let mut total = 0u64;
    for (l, &eps) in config.tolerance_schedule.iter().enumerate() {
        let iteration = l + 1;
        let t0 = Instant::now();
        let pop = match abc_iteration(config, &spec, &target, &scales, obs.len(), eps, root.child(iteration as u64), Some(deadline)) {
            Ok(p) => p,
            Err(e) => {
                if let Error::BudgetExhausted { draws, .. } = e {
                    total += draws;
                }
                report.failure = Some(format!("iteration {iteration}: {e}"));
                break;
            }
        };
        total += pop.draws;
        let (mean, cov) = weighted_moments(&pop.samples, &pop.weights);
        let best = pop
            .distances
            .iter()
            .enumerate()
            .fold(0, |b, (i, d)| if *d < pop.distances[b] { i } else { b });
        let mut record = IterationRecord::new(iteration, mean, cov, ness(&pop.weights), pop.samples[best], truth);
        record.epsilon = Some(eps);
        record.draws = Some(pop.draws);
        report.iterations.push(record);
        report.final_particles = Some(ParticleSet {
            iteration,
            samples: pop.samples,
            raw_log_weights: pop.log_weights,
            clipped_weights: pop.weights,
        });
        report.wall_clock.push(t0.elapsed().as_secs_f64());
        if iteration < config.tolerance_schedule.len() {
            match ProposalSpec::truncated_gaussian(mean, regularize_covariance(&cov, &config.prior), config.prior) {
                Ok(s) => spec = s,
                Err(e) => {
                    report.failure = Some(format!("iteration {iteration}: {e}"));
                    break;
                }
            }
        }
    }
    report.total_draws = Some(total);
    report.reached_iteration = Some(report.iterations.len());
    Ok(report)
}
