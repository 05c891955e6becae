//! Nonlinear population Monte Carlo with clipped importance weights.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::params::{ParamBox, StableParams};
use crate::pdf::{log_likelihood_lenient, PdfAccuracy};
use crate::proposal::{draw_defensive, ProposalSpec};
use crate::report::{FitReport, IterationRecord, ParticleSet};
use crate::rng::SeedStream;
use crate::weights::{clip_log_weights, ness, regularize_covariance, weighted_moments};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NpmcConfig {
    pub num_particles: usize,
    pub clip_count: usize,
    pub num_iterations: usize,
    pub prior: ParamBox,
    pub accuracy: PdfAccuracy,
    pub seed: u64,
    /// Fraction of each population drawn from the prior (0 disables mixing).
    pub defensive_fraction: f64,
}

impl NpmcConfig {
    /// `clip_count` defaults to `floor(sqrt(M))` when `None`.
    pub fn new(num_particles: usize, clip_count: Option<usize>, num_iterations: usize, prior: ParamBox, seed: u64) -> Result<Self> {
        let cfg = NpmcConfig {
            num_particles,
            clip_count: clip_count.unwrap_or_else(|| default_clip(num_particles)),
            num_iterations,
            prior,
            accuracy: PdfAccuracy::default(),
            seed,
            defensive_fraction: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_count > 1 && self.clip_count < self.num_particles) {
            return Err(Error::InvalidConfig(format!(
                "need 1 < M_T < M, got M_T = {} and M = {}",
                self.clip_count, self.num_particles
            )));
        }
        if self.num_iterations == 0 {
            return Err(Error::InvalidConfig("need at least one iteration".into()));
        }
        if !(0.0..1.0).contains(&self.defensive_fraction) {
            return Err(Error::InvalidConfig("defensive fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

pub fn default_clip(num_particles: usize) -> usize {
    (num_particles as f64).sqrt().floor() as usize
}

/// Raw log-weights with per-particle likelihood diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWeights {
    pub log_weights: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    /// True when every observation hit the density floor.
    pub fully_floored: Vec<bool>,
    pub inexact_points: usize,
}

/// `log w = log p(y|theta) + log p(theta) - log q(theta)` with the
/// unnormalized proposal density.
pub fn compute_raw_weights(
    samples: &[[f64; 4]],
    spec: &ProposalSpec,
    prior: &ParamBox,
    obs: &ObservationSet,
    acc: &PdfAccuracy,
) -> RawWeights {
    let log_q: Vec<f64> = samples.iter().map(|t| spec.log_density_unnormalized(t)).collect();
    raw_weights_with_log_q(samples, &log_q, prior, obs, acc)
}

fn raw_weights_with_log_q(
    samples: &[[f64; 4]],
    log_q: &[f64],
    prior: &ParamBox,
    obs: &ObservationSet,
    acc: &PdfAccuracy,
) -> RawWeights {
    // Each particle is independent and `collect` keeps index order, so the
    // result does not depend on the thread count.
    let per: Vec<(f64, f64, bool, usize)> = samples
        .par_iter()
        .zip(log_q.par_iter())
        .map(|(theta, &lq)| {
            let params = StableParams::from_array(*theta).expect("particles lie in the prior box");
            let ll = log_likelihood_lenient(&params, obs, acc);
            let lw = ll.value + (prior.log_density(theta) - lq);
            (lw, ll.value, ll.floored_points == obs.len(), ll.inexact_points)
        })
        .collect();
    RawWeights {
        log_weights: per.iter().map(|p| p.0).collect(),
        log_likelihoods: per.iter().map(|p| p.1).collect(),
        fully_floored: per.iter().map(|p| p.2).collect(),
        inexact_points: per.iter().map(|p| p.3).sum(),
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Runs the clipped-weight population Monte Carlo loop for `num_iterations`.
///
/// Failures (degenerate weights, stalled proposals) end the run early and are
/// reported in `failure`; completed iterations are kept.
pub fn npmc_fit(obs: &ObservationSet, config: &NpmcConfig, truth: Option<&StableParams>) -> Result<FitReport> {
    config.validate()?;
    let mut report = FitReport::new("npmc", truth.copied());
    let root = SeedStream::new(config.seed).named("npmc");
    let mut spec = ProposalSpec::prior(config.prior);
    for iteration in 1..=config.num_iterations {
        let started = Instant::now();
        let stream = root.child(iteration as u64);
        let drawn = if iteration == 1 || config.defensive_fraction == 0.0 {
            spec.draw(config.num_particles, stream).map(|d| {
                let lq = d.samples.iter().map(|t| spec.log_density_unnormalized(t)).collect::<Vec<_>>();
                (d.samples, lq)
            })
        } else {
            draw_defensive(&spec, &config.prior, config.defensive_fraction, config.num_particles, stream)
        };
        let (samples, log_q) = match drawn {
            Ok(v) => v,
            Err(e) => {
                report.failure = Some(e.to_string());
                break;
            }
        };
        let raw = raw_weights_with_log_q(&samples, &log_q, &config.prior, obs, &config.accuracy);
        let floored = raw.fully_floored.iter().filter(|f| **f).count();
        if floored == samples.len() {
            report.failure = Some(Error::DegenerateWeights("every particle is at the likelihood floor".into()).to_string());
            break;
        }
        let weights = match clip_log_weights(&raw.log_weights, config.clip_count) {
            Ok(w) => w,
            Err(e) => {
                report.failure = Some(e.to_string());
                break;
            }
        };
        let (mean, cov) = weighted_moments(&samples, &weights);
        let mode = samples[argmax(&raw.log_weights)];
        let mut record = IterationRecord::new(iteration, mean, cov, ness(&weights), mode, truth);
        record.floored_particles = floored;
        record.inexact_points = raw.inexact_points;
        report.iterations.push(record);
        report.final_particles = Some(ParticleSet {
            iteration,
            samples,
            raw_log_weights: raw.log_weights,
            clipped_weights: weights,
        });
        report.wall_clock.push(started.elapsed().as_secs_f64());
        if iteration < config.num_iterations {
            match ProposalSpec::truncated_gaussian(mean, regularize_covariance(&cov, &config.prior), config.prior) {
                Ok(s) => spec = s,
                Err(e) => {
                    report.failure = Some(e.to_string());
                    break;
                }
            }
        }
    }
    report.reached_iteration = Some(report.iterations.len());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::generate_observations;

    #[test]
    fn config_validation() {
        assert!(NpmcConfig::new(300, Some(20), 10, ParamBox::p1(), 1).is_ok());
        assert_eq!(NpmcConfig::new(1000, None, 10, ParamBox::p1(), 1).unwrap().clip_count, 31);
        assert!(NpmcConfig::new(10, Some(1), 10, ParamBox::p1(), 1).is_err());
        assert!(NpmcConfig::new(10, Some(10), 10, ParamBox::p1(), 1).is_err());
        assert!(NpmcConfig::new(10, Some(3), 0, ParamBox::p1(), 1).is_err());
    }

    #[test]
    fn first_iteration_weights_are_likelihoods() {
        let truth = StableParams::new(1.5, 0.0, 1.0, 0.0).unwrap();
        let obs = generate_observations(&truth, 20, 3).unwrap();
        let prior = ParamBox::p1();
        let spec = ProposalSpec::prior(prior);
        let samples = spec.draw(6, SeedStream::new(9)).unwrap().samples;
        let raw = compute_raw_weights(&samples, &spec, &prior, &obs, &PdfAccuracy::default());
        for i in 0..samples.len() {
            assert_eq!(raw.log_weights[i], raw.log_likelihoods[i]);
        }
        let twice = compute_raw_weights(&[samples[0], samples[0]], &spec, &prior, &obs, &PdfAccuracy::default());
        assert_eq!(twice.log_weights[0], twice.log_weights[1]);
    }

    #[test]
    fn small_fit_runs_and_is_deterministic() {
        let truth = StableParams::new(1.6, 0.2, 2.0, 1.0).unwrap();
        let obs = generate_observations(&truth, 30, 5).unwrap();
        let cfg = NpmcConfig::new(60, Some(7), 3, ParamBox::p1(), 42).unwrap();
        let a = npmc_fit(&obs, &cfg, Some(&truth)).unwrap();
        let b = npmc_fit(&obs, &cfg, Some(&truth)).unwrap();
        assert_eq!(a.iterations.len(), 3);
        assert!(a.failure.is_none());
        assert_eq!(a.to_json(), b.to_json());
        let p = a.final_particles.as_ref().unwrap();
        assert!(p.samples.iter().all(|t| cfg.prior.contains(t)));
        assert!((p.clipped_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for r in &a.iterations {
            let m = r.mse.unwrap();
            for k in 0..4 {
                let again = (r.mean[k] - truth.to_array()[k]).powi(2) + r.covariance[k][k];
                assert!((m[k] - again).abs() <= 1e-12 * again.max(1.0));
            }
        }
    }

    #[test]
    fn defensive_mixing_runs() {
        let truth = StableParams::new(1.2, 0.0, 1.0, 0.0).unwrap();
        let obs = generate_observations(&truth, 30, 6).unwrap();
        let mut cfg = NpmcConfig::new(50, Some(7), 3, ParamBox::p1(), 43).unwrap();
        cfg.defensive_fraction = 0.1;
        let r = npmc_fit(&obs, &cfg, None).unwrap();
        assert_eq!(r.iterations.len(), 3);
        assert!(r.iterations[0].mse.is_none());
    }
}
