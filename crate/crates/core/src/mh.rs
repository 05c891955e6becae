//! Random-walk Metropolis–Hastings baseline with a box-truncated Gaussian step.
//!
//! The acceptance ratio is the plain target ratio. Near the box edges the
//! truncated step is not symmetric, so the chain is slightly biased there;
//! no correction is applied.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::params::{ParamBox, StableParams};
use crate::pdf::{log_likelihood_lenient, PdfAccuracy};
use crate::proposal::draw_truncated;
use crate::report::{FitReport, IterationRecord};
use crate::rng::{open_unit, SeedStream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MhConfig {
    pub chain_length: usize,
    /// Diagonal of the random-walk covariance (variances, not deviations).
    pub proposal_variances: [f64; 4],
    pub prior: ParamBox,
    pub burn_in_fraction: f64,
    pub thin: usize,
    pub accuracy: PdfAccuracy,
    pub seed: u64,
}

impl MhConfig {
    pub fn new(chain_length: usize, prior: ParamBox, seed: u64) -> Result<Self> {
        let cfg = MhConfig {
            chain_length,
            proposal_variances: [0.25, 0.25, 1.0, 1.0],
            prior,
            burn_in_fraction: 0.10,
            thin: 9,
            accuracy: PdfAccuracy::default(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain_length < 10 {
            return Err(Error::InvalidConfig("chain length must be at least 10".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig("burn-in fraction must lie in [0, 1)".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thinning factor must be at least 1".into()));
        }
        if self.proposal_variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("proposal variances must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Indices of the states kept after burn-in and thinning.
    pub fn kept_indices(&self) -> std::iter::StepBy<std::ops::Range<usize>> {
        kept_indices(self.chain_length, self.burn_in_fraction, self.thin)
    }
}

pub fn kept_indices(chain_length: usize, burn_in_fraction: f64, thin: usize) -> std::iter::StepBy<std::ops::Range<usize>> {
    let burn = (burn_in_fraction * chain_length as f64).floor() as usize;
    (burn..chain_length).step_by(thin)
}

/// Generated chain with its acceptance record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub states: Vec<[f64; 4]>,
    /// `accept_flags[i]` refers to the transition into `states[i]`; the first
    /// state is the prior draw and carries `false`.
    pub accept_flags: Vec<bool>,
    pub log_targets: Vec<f64>,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        let n = self.accept_flags.len().saturating_sub(1).max(1);
        self.accept_flags.iter().filter(|a| **a).count() as f64 / n as f64
    }
}

/// Accept/reject rule on the log target ratio. A fresh uniform is consumed on
/// every call so the random stream does not depend on the outcome.
pub fn accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u.ln() < log_ratio
}

/// Truncated random-walk proposal around `current`.
pub fn propose<R: Rng + ?Sized>(current: &[f64; 4], sd: &[f64; 4], support: &ParamBox, rng: &mut R) -> [f64; 4] {
    let ((theta, _), _) = draw_truncated(rng, support, |r| {
        std::array::from_fn(|k| {
            let z: f64 = r.sample(StandardNormal);
            current[k] + sd[k] * z
        })
    });
    theta
}

/// One transition: returns the next state, its log target and the flag.
pub fn mh_step<F: FnMut(&[f64; 4]) -> f64>(
    current: &[f64; 4],
    current_log_target: f64,
    sd: &[f64; 4],
    support: &ParamBox,
    log_target: &mut F,
    rng: &mut ChaCha8Rng,
) -> ([f64; 4], f64, bool) {
    let candidate = propose(current, sd, support, rng);
    let lt = log_target(&candidate);
    let u = open_unit(rng);
    let ratio = lt - current_log_target;
    // Both sides floored at the same value give a ratio of exactly zero.
    let ratio = if ratio.is_nan() { 0.0 } else { ratio };
    if accept(ratio, u) {
        (candidate, lt, true)
    } else {
        (*current, current_log_target, false)
    }
}

/// Runs a chain of `length` states from `start` for an arbitrary log target.
pub fn run_chain<F: FnMut(&[f64; 4]) -> f64>(
    start: [f64; 4],
    mut log_target: F,
    sd: &[f64; 4],
    support: &ParamBox,
    length: usize,
    rng: &mut ChaCha8Rng,
) -> Chain {
    let mut states = Vec::with_capacity(length);
    let mut flags = Vec::with_capacity(length);
    let mut targets = Vec::with_capacity(length);
    let mut cur = start;
    let mut cur_lt = log_target(&cur);
    states.push(cur);
    flags.push(false);
    targets.push(cur_lt);
    for _ in 1..length {
        let (next, lt, ok) = mh_step(&cur, cur_lt, sd, support, &mut log_target, rng);
        cur = next;
        cur_lt = lt;
        states.push(cur);
        flags.push(ok);
        targets.push(cur_lt);
    }
    Chain { states, accept_flags: flags, log_targets: targets }
}

/// Autocorrelation-based ESS fraction `1 / (1 + 2 sum rho(j))` with the
/// autocorrelation averaged over the non-constant coordinates and the sum cut
/// at the first non-positive lag. Clamped to `[1/n, 1]`.
pub fn mcmc_ess(states: &[[f64; 4]]) -> f64 {
    let n = states.len();
    let min = 1.0 / n as f64;
    if n < 2 {
        return 1.0;
    }
    let mut centered: Vec<Vec<f64>> = Vec::new();
    let mut variances = Vec::new();
    for k in 0..4 {
        let m = states.iter().map(|s| s[k]).sum::<f64>() / n as f64;
        let c: Vec<f64> = states.iter().map(|s| s[k] - m).collect();
        let v = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
        if v > 0.0 {
            centered.push(c);
            variances.push(v);
        }
    }
    if centered.is_empty() {
        return min;
    }
    let mut sum = 0.0;
    for lag in 1..n {
        let mut rho = 0.0;
        for (c, v) in centered.iter().zip(&variances) {
            let acov = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            rho += acov / v;
        }
        rho /= centered.len() as f64;
        if rho <= 0.0 {
            break;
        }
        sum += rho;
    }
    (1.0 / (1.0 + 2.0 * sum)).clamp(min, 1.0)
}

/// Mean and `1/n` covariance of a set of states.
pub fn sample_moments(states: &[[f64; 4]]) -> ([f64; 4], [[f64; 4]; 4]) {
    let w = vec![1.0 / states.len() as f64; states.len()];
    crate::weights::weighted_moments(states, &w)
}

/// Runs the chain on the stable posterior and summarizes the kept states.
pub fn mh_fit(obs: &ObservationSet, config: &MhConfig, truth: Option<&StableParams>) -> Result<FitReport> {
    config.validate()?;
    let started = Instant::now();
    let mut report = FitReport::new("mh", truth.copied());
    let mut rng = SeedStream::new(config.seed).named("mh").rng();
    let start = config.prior.sample(&mut rng);
    let sd = config.proposal_variances.map(f64::sqrt);
    let prior = config.prior;
    let log_target = |theta: &[f64; 4]| -> f64 {
        let params = StableParams::from_array(*theta).expect("chain stays in the prior box");
        log_likelihood_lenient(&params, obs, &config.accuracy).value + prior.log_density(theta)
    };
    let chain = run_chain(start, log_target, &sd, &prior, config.chain_length, &mut rng);
    let kept_idx: Vec<usize> = config.kept_indices().collect();
    let kept: Vec<[f64; 4]> = kept_idx.iter().map(|&i| chain.states[i]).collect();
    let burn = kept_idx.first().copied().unwrap_or(config.chain_length);
    let moved_after_burn = (burn.max(1)..config.chain_length).any(|i| chain.states[i] != chain.states[i - 1]);

    let (mean, cov) = sample_moments(&kept);
    let ess = mcmc_ess(&kept);
    let mode = kept.last().copied().unwrap_or(start);
    report.iterations.push(IterationRecord::new(1, mean, cov, ess, mode, truth));
    report.acceptance_rate = Some(chain.acceptance_rate());
    report.ess = Some(ess);
    report.kept_samples = Some(kept.len());
    report.reached_iteration = Some(1);
    if !moved_after_burn {
        report.failure = Some("chain never moved after burn-in".into());
    } else if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
        report.failure = Some("kept-sample moments are not finite".into());
    }
    report.wall_clock.push(started.elapsed().as_secs_f64());
    Ok(report)
}
