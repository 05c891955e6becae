//! Fit reports shared by the three estimators.

use std::fmt::Write as _;

use serde::Serialize;

use crate::params::StableParams;
use crate::weights::mse_components;

/// Weighted particle population of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSet {
    pub iteration: usize,
    pub samples: Vec<[f64; 4]>,
    /// Raw (unclipped) log-weights; for ABC the log prior-over-proposal ratio.
    pub raw_log_weights: Vec<f64>,
    /// Normalized weights actually used for the moments.
    pub clipped_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean: [f64; 4],
    /// Weighted covariance before regularization.
    pub covariance: [[f64; 4]; 4],
    /// NESS for the population methods, autocorrelation ESS for MH.
    pub ness: f64,
    /// Highest-weight particle (for MH, the last kept state).
    pub mode: [f64; 4],
    pub mse: Option<[f64; 4]>,
    pub mse_global: Option<f64>,
    /// Particles whose likelihood hit the density floor at every observation.
    pub floored_particles: usize,
    /// Density evaluations that missed the accuracy budget.
    pub inexact_points: usize,
    /// ABC only: tolerance and simulation count of this iteration.
    pub epsilon: Option<f64>,
    pub draws: Option<u64>,
}

impl IterationRecord {
    pub fn new(iteration: usize, mean: [f64; 4], covariance: [[f64; 4]; 4], ness: f64, mode: [f64; 4], truth: Option<&StableParams>) -> Self {
        let (mse, mse_global) = match truth {
            Some(t) => {
                let (m, g) = mse_components(&mean, &covariance, &t.to_array());
                (Some(m), Some(g))
            }
            None => (None, None),
        };
        IterationRecord {
            iteration,
            mean,
            covariance,
            ness,
            mode,
            mse,
            mse_global,
            floored_particles: 0,
            inexact_points: 0,
            epsilon: None,
            draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub estimator: String,
    pub truth: Option<StableParams>,
    pub iterations: Vec<IterationRecord>,
    pub final_particles: Option<ParticleSet>,
    /// `Some(reason)` when the run failed; partial results are kept.
    pub failure: Option<String>,
    pub acceptance_rate: Option<f64>,
    pub ess: Option<f64>,
    pub kept_samples: Option<usize>,
    pub total_draws: Option<u64>,
    pub reached_iteration: Option<usize>,
    /// Seconds per iteration (per chain for MH); kept out of serialized output
    /// so reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock: Vec<f64>,
}

impl FitReport {
    pub fn new(estimator: &str, truth: Option<StableParams>) -> Self {
        FitReport {
            estimator: estimator.to_string(),
            truth,
            iterations: Vec::new(),
            final_particles: None,
            failure: None,
            acceptance_rate: None,
            ess: None,
            kept_samples: None,
            total_draws: None,
            reached_iteration: None,
            wall_clock: Vec::new(),
        }
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    pub fn final_mse_global(&self) -> Option<f64> {
        self.last().and_then(|r| r.mse_global)
    }

    pub fn total_wall_clock(&self) -> f64 {
        self.wall_clock.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `iter,ness,mu_a,mu_b,mu_g,mu_d,mse_a,mse_b,mse_g,mse_d,mse_global`;
    /// MSE columns are empty without a known truth.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,ness,mu_a,mu_b,mu_g,mu_d,mse_a,mse_b,mse_g,mse_d,mse_global\n");
        for r in &self.iterations {
            let _ = write!(out, "{},{},{},{},{},{}", r.iteration, r.ness, r.mean[0], r.mean[1], r.mean[2], r.mean[3]);
            match (r.mse, r.mse_global) {
                (Some(m), Some(g)) => {
                    let _ = writeln!(out, ",{},{},{},{},{}", m[0], m[1], m[2], m[3], g);
                }
                _ => out.push_str(",,,,,\n"),
            }
        }
        out
    }
}
