//! Summaries of benchmark rows over right-closed alpha intervals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::bench::BenchmarkRow;
use crate::stats::{quantile_sorted, sorted_copy};

/// Metrics summarized per bin.
pub const METRICS: &[&str] = &["mse_global", "ness", "mse_a", "mse_b", "mse_g", "mse_d"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinSummary {
    pub estimator: String,
    pub lo: f64,
    pub hi: f64,
    pub metric: String,
    /// Rows whose alpha lies in `(lo, hi]`, failed ones included.
    pub count: usize,
    /// Rows contributing a finite metric value.
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

fn metric(row: &BenchmarkRow, name: &str) -> Option<f64> {
    let v = match name {
        "mse_global" => row.mse_global,
        "ness" => row.ness,
        "mse_a" => row.mse.map(|m| m[0]),
        "mse_b" => row.mse.map(|m| m[1]),
        "mse_g" => row.mse.map(|m| m[2]),
        "mse_d" => row.mse.map(|m| m[3]),
        _ => None,
    };
    v.filter(|x| x.is_finite())
}

/// Index of the bin `(k w, (k + 1) w]` containing `alpha` among `n` bins.
pub fn bin_index(alpha: f64, width: f64, n: usize) -> usize {
    let mut k = ((alpha / width).ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
    // Correct for rounding in the division.
    while k > 0 && alpha <= k as f64 * width {
        k -= 1;
    }
    while k + 1 < n && alpha > (k + 1) as f64 * width {
        k += 1;
    }
    k
}

/// Per estimator, bin and metric: mean, median and 5%/95% quantiles of the
/// non-failed rows. Bins cover `(0, 2]`; empty bins are emitted with count 0.
/// `k * width` without the trailing representation noise in CSV output.
fn edge(k: usize, width: f64) -> f64 {
    (k as f64 * width * 1e12).round() / 1e12
}

pub fn bin_by_alpha(rows: &[BenchmarkRow], width: f64) -> Result<Vec<BinSummary>> {
    if !(width > 0.0) {
        return Err(Error::InvalidConfig("bin width must be positive".into()));
    }
    let n = (2.0 / width - 1e-9).ceil().max(1.0) as usize;
    let mut estimators: Vec<String> = rows.iter().map(|r| r.estimator.clone()).collect();
    estimators.sort();
    estimators.dedup();
    let mut out = Vec::new();
    for est in &estimators {
        let mut bins: Vec<Vec<&BenchmarkRow>> = vec![Vec::new(); n];
        for r in rows.iter().filter(|r| &r.estimator == est) {
            bins[bin_index(r.truth[0], width, n)].push(r);
        }
        for (k, members) in bins.iter().enumerate() {
            let lo = edge(k, width);
            let hi = edge(k + 1, width).min(2.0);
            for name in METRICS {
                let vals: Vec<f64> = members.iter().filter(|r| !r.failed).filter_map(|r| metric(r, name)).collect();
                let (mean, median, q05, q95) = if vals.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                } else {
                    let s = sorted_copy(&vals);
                    (
                        vals.iter().sum::<f64>() / vals.len() as f64,
                        quantile_sorted(&s, 0.5),
                        quantile_sorted(&s, 0.05),
                        quantile_sorted(&s, 0.95),
                    )
                };
                out.push(BinSummary {
                    estimator: est.clone(),
                    lo,
                    hi,
                    metric: name.to_string(),
                    count: members.len(),
                    n: vals.len(),
                    mean,
                    median,
                    q05,
                    q95,
                });
            }
        }
    }
    Ok(out)
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn binned_csv(bins: &[BinSummary]) -> String {
    let mut out = String::from("estimator,bin_lo,bin_hi,metric,count,n,mean,median,q05,q95\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            b.estimator,
            b.lo,
            b.hi,
            b.metric,
            b.count,
            b.n,
            cell(b.mean),
            cell(b.median),
            cell(b.q05),
            cell(b.q95)
        ));
    }
    out
}
