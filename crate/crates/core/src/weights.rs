//! Importance-weight arithmetic: clipping, normalization, NESS and moments.
//!
//! Weights travel in the log domain until the final normalization, which
//! subtracts the maximum before exponentiating.

use nalgebra::{Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::params::ParamBox;

/// Relative jitter applied to covariances with a near-singular spectrum.
pub const JITTER: f64 = 1e-8;

/// Normalizes log-weights to probabilities summing to one.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    if log_w.is_empty() {
        return Err(Error::DegenerateWeights("no weights".into()));
    }
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::DegenerateWeights("non-finite log-weight".into()));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / sum).collect())
}

/// Index order by decreasing weight, ties broken by index.
fn rank_descending(log_w: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..log_w.len()).collect();
    idx.sort_by(|&a, &b| log_w[b].total_cmp(&log_w[a]).then(a.cmp(&b)));
    idx
}

/// The `clip`-th largest log-weight.
pub fn clip_threshold(log_w: &[f64], clip: usize) -> f64 {
    log_w[rank_descending(log_w)[clip - 1]]
}

/// Clips raw log-weights at the `clip`-th largest value and normalizes.
pub fn clip_log_weights(log_w: &[f64], clip: usize) -> Result<Vec<f64>> {
    if !(clip > 1 && clip < log_w.len()) {
        return Err(Error::InvalidConfig(format!("clip count {clip} must satisfy 1 < M_T < M = {}", log_w.len())));
    }
    let t = clip_threshold(log_w, clip);
    let clipped: Vec<f64> = log_w.iter().map(|&v| v.min(t)).collect();
    normalize_log_weights(&clipped)
}

/// Normalized effective sample size `1 / (M sum w^2)`.
pub fn ness(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    1.0 / (weights.len() as f64 * s)
}

/// Weighted mean and (unregularized) weighted covariance.
pub fn weighted_moments(samples: &[[f64; 4]], weights: &[f64]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut mean = [0.0; 4];
    for (s, &w) in samples.iter().zip(weights) {
        for k in 0..4 {
            mean[k] += w * s[k];
        }
    }
    let mut cov = [[0.0; 4]; 4];
    for (s, &w) in samples.iter().zip(weights) {
        let d: [f64; 4] = std::array::from_fn(|k| s[k] - mean[k]);
        for i in 0..4 {
            for j in 0..4 {
                cov[i][j] += w * d[i] * d[j];
            }
        }
    }
    (mean, cov)
}

/// Symmetrizes `cov` and adds `JITTER * diag(widths^2)` when its smallest
/// eigenvalue falls below `JITTER * min(widths^2)`.
pub fn regularize_covariance(cov: &[[f64; 4]; 4], support: &ParamBox) -> [[f64; 4]; 4] {
    let m = Matrix4::from_fn(|i, j| 0.5 * (cov[i][j] + cov[j][i]));
    let w2: [f64; 4] = support.widths().map(|w| w * w);
    let floor = JITTER * w2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
    let min_eig = SymmetricEigen::new(m).eigenvalues.min();
    if !(min_eig >= floor) {
        let mut scale = JITTER;
        // A strongly negative eigenvalue from round-off needs more than one floor.
        if min_eig < 0.0 {
            scale += -min_eig / w2.iter().copied().fold(f64::INFINITY, f64::min);
        }
        for k in 0..4 {
            out[k][k] += scale * w2[k];
        }
    }
    out
}

/// `MSE_k = (mu_k - theta_k)^2 + sigma_k^2` and their average.
pub fn mse_components(mean: &[f64; 4], cov: &[[f64; 4]; 4], truth: &[f64; 4]) -> ([f64; 4], f64) {
    let mse: [f64; 4] = std::array::from_fn(|k| (mean[k] - truth[k]).powi(2) + cov[k][k]);
    (mse, mse.iter().sum::<f64>() / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ln(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn worked_clipping_example() {
        let w = clip_log_weights(&ln(&[5.0, 3.0, 2.0, 1.0]), 2).unwrap();
        let expect = [1.0 / 3.0, 1.0 / 3.0, 2.0 / 9.0, 1.0 / 9.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_weights_become_uniform() {
        let w = clip_log_weights(&[-7.0; 6], 3).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn clipping_raises_ness() {
        let raw = ln(&[10.0, 1.0, 1.0, 1.0]);
        let before = ness(&normalize_log_weights(&raw).unwrap());
        let after = ness(&clip_log_weights(&raw, 2).unwrap());
        assert!((before - 169.0 / 412.0).abs() < 1e-12);
        assert!((after - 1.0).abs() < 1e-12);
        assert!(after > before);
    }

    #[test]
    fn ness_examples() {
        assert!((ness(&[0.25; 4]) - 1.0).abs() < 1e-15);
        let mut one = vec![0.0; 300];
        one[7] = 1.0;
        assert!((ness(&one) - 1.0 / 300.0).abs() < 1e-15);
        assert!((ness(&[0.5, 0.25, 0.25]) - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_clip_counts() {
        assert!(clip_log_weights(&[0.0, 1.0, 2.0], 1).is_err());
        assert!(clip_log_weights(&[0.0, 1.0, 2.0], 3).is_err());
        assert!(normalize_log_weights(&[f64::NEG_INFINITY; 3]).is_err());
    }

    #[test]
    fn two_point_moments() {
        let (m, c) = weighted_moments(&[[1.0, 0.0, 1.0, 0.0], [-1.0, 0.0, 1.0, 0.0]], &[0.5, 0.5]);
        assert_eq!(m, [0.0, 0.0, 1.0, 0.0]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c[i][j], if i == 0 && j == 0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn single_effective_sample_gets_jitter_floor() {
        let s = [[1.0, 0.2, 3.0, -1.0], [0.5, 0.1, 2.0, 0.0]];
        let (m, c) = weighted_moments(&s, &[1.0, 0.0]);
        assert_eq!(m, s[0]);
        let b = ParamBox::p1();
        let r = regularize_covariance(&c, &b);
        let w = b.widths();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { JITTER * w[i] * w[i] } else { 0.0 };
                assert!((r[i][j] - expect).abs() < 1e-20);
            }
        }
    }

    #[test]
    fn well_conditioned_covariance_untouched() {
        let b = ParamBox::p1();
        let c = [[0.1, 0.02, 0.0, 0.0], [0.02, 0.2, 0.0, 0.0], [0.0, 0.0, 1.0, 0.1], [0.0, 0.0, 0.1, 2.0]];
        assert_eq!(regularize_covariance(&c, &b), c);
    }

    #[test]
    fn mse_decomposition() {
        let (mse, g) = mse_components(&[1.0, 0.0, 2.0, 0.5], &[[0.1, 0.0, 0.0, 0.0], [0.0, 0.2, 0.0, 0.0], [0.0, 0.0, 0.3, 0.0], [0.0, 0.0, 0.0, 0.4]], &[1.5, 0.0, 1.0, 0.5]);
        assert_eq!(mse, [0.35, 0.2, 1.3, 0.4]);
        assert!((g - 0.5625).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn clipping_properties(raw in prop::collection::vec(-50.0f64..50.0, 3..60), frac in 0.0f64..1.0) {
            let m = raw.len();
            let clip = 2 + ((m - 3) as f64 * frac) as usize;
            let once = clip_log_weights(&raw, clip).unwrap();
            let twice = clip_log_weights(&once.iter().map(|w| w.ln()).collect::<Vec<_>>(), clip).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            }
            let sum: f64 = once.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let t = clip_threshold(&raw, clip);
            let top = once.iter().copied().fold(0.0, f64::max);
            for i in 0..m {
                if raw[i] >= t {
                    prop_assert_eq!(once[i], top);
                }
                for j in 0..m {
                    if raw[i] < raw[j] {
                        prop_assert!(once[i] <= once[j]);
                    }
                }
            }
            let n = ness(&once);
            prop_assert!(n > 0.0 && n <= 1.0 + 1e-12);
        }

        #[test]
        fn constant_shift_is_invisible(raw in prop::collection::vec(-30.0f64..30.0, 4..40), shift in -200.0f64..200.0) {
            let shifted: Vec<f64> = raw.iter().map(|v| v + shift).collect();
            let a = clip_log_weights(&raw, 2).unwrap();
            let b = clip_log_weights(&shifted, 2).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn exact_shift_is_bit_identical(raw in prop::collection::vec(-(1i64 << 25)..(1i64 << 25), 4..40), shift in -200i64..200) {
            // Dyadic log-weights make the shift exact, so only the max-subtraction remains.
            let raw: Vec<f64> = raw.iter().map(|&v| v as f64 / (1u64 << 20) as f64).collect();
            let shifted: Vec<f64> = raw.iter().map(|v| v + shift as f64).collect();
            let samples: Vec<[f64; 4]> = (0..raw.len()).map(|i| [i as f64, (i * i) as f64, 1.0, -(i as f64)]).collect();
            let a = clip_log_weights(&raw, 3).unwrap();
            let b = clip_log_weights(&shifted, 3).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(weighted_moments(&samples, &a), weighted_moments(&samples, &b));
            prop_assert_eq!(ness(&a).to_bits(), ness(&b).to_bits());
        }
    }
}
