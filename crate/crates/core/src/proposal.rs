//! Proposal densities: the uniform prior box and box-truncated Gaussians.

use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ParamBox;
use crate::rng::SeedStream;

/// Rejection attempts per particle before falling back to clamping.
pub const MAX_ATTEMPTS: usize = 10_000;
/// Fraction of fallbacks above which a draw is declared stalled.
pub const STALL_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    PriorBox,
    TruncatedGaussian,
}

/// Either the uniform prior box or `N(mean, covariance)` restricted to `support`.
#[derive(Debug, Clone, Serialize)]
pub struct ProposalSpec {
    pub kind: ProposalKind,
    pub mean: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    pub support: ParamBox,
    #[serde(skip)]
    chol: Matrix4<f64>,
    #[serde(skip)]
    log_norm: f64,
}

impl ProposalSpec {
    pub fn prior(support: ParamBox) -> Self {
        let w = support.widths();
        let mut cov = [[0.0; 4]; 4];
        for k in 0..4 {
            cov[k][k] = w[k] * w[k] / 12.0;
        }
        ProposalSpec {
            kind: ProposalKind::PriorBox,
            mean: support.midpoint(),
            covariance: cov,
            support,
            chol: Matrix4::zeros(),
            log_norm: support.log_density_inside(),
        }
    }

    /// Fails unless `covariance` is symmetric positive definite.
    pub fn truncated_gaussian(mean: [f64; 4], covariance: [[f64; 4]; 4], support: ParamBox) -> Result<Self> {
        let m = Matrix4::from_fn(|i, j| covariance[i][j]);
        if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidConfig("proposal covariance is not symmetric".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("proposal mean is not finite".into()));
        }
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::InvalidConfig("proposal covariance is not positive definite".into()))?
            .unpack();
        let log_det: f64 = 2.0 * (0..4).map(|k| chol[(k, k)].ln()).sum::<f64>();
        let log_norm = -0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(ProposalSpec { kind: ProposalKind::TruncatedGaussian, mean, covariance, support, chol, log_norm })
    }

    /// Log of the proposal density without the box-truncation normalizer.
    ///
    /// For the prior box this is the exact uniform density; for the truncated
    /// Gaussian it is the Gaussian kernel restricted to the box. The missing
    /// constant is shared by every particle and cancels after normalization.
    pub fn log_density_unnormalized(&self, theta: &[f64; 4]) -> f64 {
        if !self.support.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            ProposalKind::PriorBox => self.log_norm,
            ProposalKind::TruncatedGaussian => {
                let d = Vector4::from_fn(|k, _| theta[k] - self.mean[k]);
                let z = self.chol.solve_lower_triangular(&d).expect("non-singular factor");
                self.log_norm - 0.5 * z.norm_squared()
            }
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        match self.kind {
            ProposalKind::PriorBox => self.support.sample(rng),
            ProposalKind::TruncatedGaussian => {
                let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let x = self.chol * z;
                std::array::from_fn(|k| self.mean[k] + x[k])
            }
        }
    }

    /// One draw inside the support together with the number of attempts and
    /// whether the rejection cap was hit.
    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (([f64; 4], usize), bool) {
        draw_truncated(rng, &self.support, |r| self.propose(r))
    }

    /// `count` draws, one derived stream per particle.
    pub fn draw(&self, count: usize, stream: SeedStream) -> Result<ProposalDraws> {
        let mut out = ProposalDraws { samples: Vec::with_capacity(count), attempts: 0, fallbacks: 0 };
        for i in 0..count {
            let mut rng = stream.child(i as u64).rng();
            let ((theta, attempts), fell_back) = self.draw_one(&mut rng);
            out.samples.push(theta);
            out.attempts += attempts;
            out.fallbacks += fell_back as usize;
        }
        out.check_stall()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalDraws {
    pub samples: Vec<[f64; 4]>,
    pub attempts: usize,
    pub fallbacks: usize,
}

impl ProposalDraws {
    fn check_stall(&self) -> Result<()> {
        if self.fallbacks as f64 > STALL_FRACTION * self.samples.len() as f64 {
            Err(Error::RejectionStall { fallbacks: self.fallbacks, count: self.samples.len() })
        } else {
            Ok(())
        }
    }

    /// Fraction of unconstrained proposals that landed in the box.
    pub fn acceptance_rate(&self) -> f64 {
        (self.samples.len() - self.fallbacks) as f64 / self.attempts as f64
    }
}

/// Rejection sampling against `support`, capped at [`MAX_ATTEMPTS`]; after the
/// cap one further proposal is clamped into the box.
pub(crate) fn draw_truncated<R, F>(rng: &mut R, support: &ParamBox, mut propose: F) -> (([f64; 4], usize), bool)
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> [f64; 4],
{
    for attempt in 1..=MAX_ATTEMPTS {
        let theta = propose(rng);
        if support.contains(&theta) {
            return ((theta, attempt), false);
        }
    }
    let theta = propose(rng);
    ((support.clamp(&theta), MAX_ATTEMPTS + 1), true)
}

/// Draws and log-densities for a proposal mixed with the prior: each particle
/// comes from the prior with probability `fraction`.
pub fn draw_defensive(
    spec: &ProposalSpec,
    prior: &ParamBox,
    fraction: f64,
    count: usize,
    stream: SeedStream,
) -> Result<(Vec<[f64; 4]>, Vec<f64>)> {
    let prior_spec = ProposalSpec::prior(*prior);
    let mut draws = ProposalDraws { samples: Vec::with_capacity(count), attempts: 0, fallbacks: 0 };
    let mut gaussian_attempts = 0usize;
    let mut gaussian_accepted = 0usize;
    for i in 0..count {
        let mut rng = stream.child(i as u64).rng();
        let use_prior = rng.random::<f64>() < fraction;
        let ((theta, attempts), fell_back) =
            if use_prior { prior_spec.draw_one(&mut rng) } else { spec.draw_one(&mut rng) };
        if !use_prior {
            gaussian_attempts += attempts.min(MAX_ATTEMPTS);
            gaussian_accepted += !fell_back as usize;
        }
        draws.samples.push(theta);
        draws.attempts += attempts;
        draws.fallbacks += fell_back as usize;
    }
    draws.check_stall()?;
    // Box mass of the Gaussian, estimated from the rejection acceptance rate.
    let log_mass = if gaussian_accepted > 0 {
        (gaussian_accepted as f64 / gaussian_attempts as f64).ln()
    } else {
        0.0
    };
    let log_q = draws
        .samples
        .iter()
        .map(|theta| {
            let a = fraction.ln() + prior.log_density(theta);
            let b = (1.0 - fraction).ln() + spec.log_density_unnormalized(theta) - log_mass;
            log_add_exp(a, b)
        })
        .collect();
    Ok((draws.samples, log_q))
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
