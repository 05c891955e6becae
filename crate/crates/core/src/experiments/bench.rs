//! Seeded synthetic benchmark: draw a truth, simulate data, run each estimator.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::abc::{abc_fit, AbcConfig};
use crate::error::{Error, Result};
use crate::experiments::scenario::{Estimator, ScenarioSpec};
use crate::mh::{mh_fit, MhConfig};
use crate::npmc::{npmc_fit, NpmcConfig};
use crate::observations::ObservationSet;
use crate::params::StableParams;
use crate::report::FitReport;
use crate::rng::SeedStream;
use crate::sampler::generate_from_stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub run: usize,
    pub truth: [f64; 4],
    pub estimator: String,
    /// Final per-parameter MSE; `None` when the estimator produced nothing.
    pub mse: Option<[f64; 4]>,
    pub mse_global: Option<f64>,
    /// Final NESS (importance samplers) or ESS (MH).
    pub ness: Option<f64>,
    pub failed: bool,
    pub reason: String,
    /// Seconds spent in the estimator call; excluded from `rows.csv`.
    #[serde(skip)]
    pub wall_clock: f64,
}

/// Per-iteration trace entry of one estimator on one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub run: usize,
    pub estimator: String,
    pub iteration: usize,
    pub ness: f64,
    pub mse: Option<[f64; 4]>,
    pub mse_global: Option<f64>,
}

/// Everything produced by one run, in canonical estimator order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub rows: Vec<BenchmarkRow>,
    pub traces: Vec<TraceRow>,
}

fn row_from_report(run: usize, truth: &StableParams, est: Estimator, report: &FitReport, secs: f64) -> BenchmarkRow {
    let last = report.last();
    BenchmarkRow {
        run,
        truth: truth.to_array(),
        estimator: est.name().into(),
        mse: last.and_then(|r| r.mse),
        mse_global: last.and_then(|r| r.mse_global),
        ness: last.map(|r| r.ness),
        failed: report.failed(),
        reason: report.failure.clone().unwrap_or_default(),
        wall_clock: secs,
    }
}

fn failed_row(run: usize, truth: &StableParams, est: Estimator, reason: String, secs: f64) -> BenchmarkRow {
    BenchmarkRow {
        run,
        truth: truth.to_array(),
        estimator: est.name().into(),
        mse: None,
        mse_global: None,
        ness: None,
        failed: true,
        reason,
        wall_clock: secs,
    }
}

fn fit(spec: &ScenarioSpec, est: Estimator, obs: &ObservationSet, truth: &StableParams, seed: u64) -> Result<FitReport> {
    match est {
        Estimator::Npmc => {
            let cfg = NpmcConfig::new(spec.npmc_particles, Some(spec.npmc_clip), spec.npmc_iters, spec.prior, seed)?;
            npmc_fit(obs, &cfg, Some(truth))
        }
        Estimator::Mh => {
            let cfg = MhConfig::new(spec.mh_chain_length, spec.prior, seed)?;
            mh_fit(obs, &cfg, Some(truth))
        }
        Estimator::Abc => {
            let mut cfg = AbcConfig::new(spec.abc_schedule.clone(), spec.abc_particles, spec.prior, seed)?;
            cfg.max_draws_per_iteration = spec.abc_budget_draws;
            cfg.wall_clock_budget = Duration::from_secs(spec.abc_budget_secs);
            abc_fit(obs, &cfg, Some(truth))
        }
    }
}

/// Runs a single benchmark run; never fails, errors become flagged rows.
pub fn run_one(spec: &ScenarioSpec, run: usize) -> RunOutcome {
    let stream = SeedStream::new(spec.seed).child(run as u64);
    let theta = spec.law.sample(&mut stream.named("truth").rng());
    let truth = StableParams::from_array(theta).expect("law box lies in the parameter space");
    let mut out = RunOutcome { run, rows: Vec::new(), traces: Vec::new() };
    let data = generate_from_stream(&truth, spec.observations, stream.named("data"), run as u64);
    let mut estimators = spec.estimators.clone();
    estimators.sort();
    estimators.dedup();
    for est in estimators {
        let obs = match &data {
            Ok(o) => o,
            Err(e) => {
                out.rows.push(failed_row(run, &truth, est, format!("data generation: {e}"), 0.0));
                continue;
            }
        };
        let seed = stream.named(est.name()).stream;
        let started = Instant::now();
        let result = fit(spec, est, obs, &truth, seed);
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(report) => {
                out.rows.push(row_from_report(run, &truth, est, &report, secs));
                out.traces.extend(report.iterations.iter().map(|r| TraceRow {
                    run,
                    estimator: est.name().into(),
                    iteration: r.iteration,
                    ness: r.ness,
                    mse: r.mse,
                    mse_global: r.mse_global,
                }));
            }
            Err(e) => out.rows.push(failed_row(run, &truth, est, e.to_string(), secs)),
        }
    }
    out
}

/// Runs every run of the scenario, calling `sink` once per run in run order.
///
/// Runs are evaluated in parallel batches; each run has its own seed stream,
/// so results do not depend on the thread count.
pub fn run_benchmark_with<F: FnMut(&RunOutcome) -> Result<()>>(spec: &ScenarioSpec, mut sink: F) -> Result<Vec<RunOutcome>> {
    spec.validate()?;
    let batch = rayon::current_num_threads().max(1);
    let mut all = Vec::with_capacity(spec.runs);
    let mut start = 0;
    while start < spec.runs {
        let end = (start + batch).min(spec.runs);
        let outcomes: Vec<RunOutcome> = (start..end).into_par_iter().map(|r| run_one(spec, r)).collect();
        for o in outcomes {
            sink(&o)?;
            all.push(o);
        }
        start = end;
    }
    Ok(all)
}

pub fn run_benchmark(spec: &ScenarioSpec) -> Result<Vec<BenchmarkRow>> {
    Ok(run_benchmark_with(spec, |_| Ok(()))?.into_iter().flat_map(|o| o.rows).collect())
}

/// Percentage of flagged rows per estimator.
pub fn failure_rate(rows: &[BenchmarkRow]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in rows {
        let c = counts.entry(r.estimator.clone()).or_default();
        c.0 += r.failed as usize;
        c.1 += 1;
    }
    counts.into_iter().map(|(k, (f, n))| (k, 100.0 * f as f64 / n as f64)).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const ROWS_HEADER: &str = "run,alpha,beta,gamma,delta,estimator,mse_a,mse_b,mse_g,mse_d,mse_global,ness,failed,reason\n";
pub const TRACES_HEADER: &str = "run,estimator,iter,ness,mse_a,mse_b,mse_g,mse_d,mse_global\n";
pub const TIMING_HEADER: &str = "run,estimator,seconds\n";

pub fn row_line(r: &BenchmarkRow) -> String {
    let m = r.mse.map(|m| m.map(|v| v.to_string())).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.run,
        r.truth[0],
        r.truth[1],
        r.truth[2],
        r.truth[3],
        r.estimator,
        m[0],
        m[1],
        m[2],
        m[3],
        opt(r.mse_global),
        opt(r.ness),
        r.failed as u8,
        csv_text(&r.reason)
    )
}

pub fn trace_line(t: &TraceRow) -> String {
    let m = t.mse.map(|m| m.map(|v| v.to_string())).unwrap_or_default();
    format!("{},{},{},{},{},{},{},{},{}\n", t.run, t.estimator, t.iteration, t.ness, m[0], m[1], m[2], m[3], opt(t.mse_global))
}

pub fn rows_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(ROWS_HEADER);
    rows.iter().for_each(|r| out.push_str(&row_line(r)));
    out
}

pub fn timing_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(TIMING_HEADER);
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6}", r.run, r.estimator, r.wall_clock);
    }
    out
}

/// Parses `rows.csv` back; used to replay failure rates from stored output.
pub fn parse_rows_csv(text: &str) -> Result<Vec<BenchmarkRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let f = |k: usize| -> Result<f64> {
            rec.get(k).unwrap_or("").parse().map_err(|_| Error::Parse { line, message: format!("column {k}") })
        };
        let of = |k: usize| -> Result<Option<f64>> {
            match rec.get(k).unwrap_or("") {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| Error::Parse { line, message: format!("column {k}") }),
            }
        };
        let mse = match (of(6)?, of(7)?, of(8)?, of(9)?) {
            (Some(a), Some(b), Some(c), Some(d)) => Some([a, b, c, d]),
            _ => None,
        };
        rows.push(BenchmarkRow {
            run: f(0)? as usize,
            truth: [f(1)?, f(2)?, f(3)?, f(4)?],
            estimator: rec.get(5).unwrap_or("").to_string(),
            mse,
            mse_global: of(10)?,
            ness: of(11)?,
            failed: rec.get(12) == Some("1"),
            reason: rec.get(13).unwrap_or("").to_string(),
            wall_clock: 0.0,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioSpec {
        ScenarioSpec::parse("runs = 3\nobservations = 30\nnpmc.particles = 40\nnpmc.clip = 6\nnpmc.iters = 2\nseed = 11\nlaw.alpha = 1.2, 2\n").unwrap()
    }

    #[test]
    fn one_row_per_run_and_estimator() {
        let mut spec = small();
        spec.runs = 1;
        let a = run_benchmark(&spec).unwrap();
        let b = run_benchmark(&spec).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(rows_csv(&a), rows_csv(&b));
    }

    #[test]
    fn canonical_order_and_incremental_sink() {
        let mut spec = small();
        spec.estimators = vec![Estimator::Mh, Estimator::Npmc];
        spec.mh_chain_length = 60;
        let mut seen = Vec::new();
        let outs = run_benchmark_with(&spec, |o| {
            seen.push(o.run);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
        let rows: Vec<_> = outs.into_iter().flat_map(|o| o.rows).collect();
        let keys: Vec<(usize, String)> = rows.iter().map(|r| (r.run, r.estimator.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort_by_key(|(r, e)| (*r, e.parse::<Estimator>().unwrap()));
        assert_eq!(keys, sorted);
        assert_eq!(rows.len(), 6);
    }

    #[test]
    fn tiny_alpha_data_overflow_is_a_failure_row() {
        let mut spec = small();
        spec.runs = 1;
        spec.law = crate::ParamBox::new([1e-4, 0.9, 1.0, 0.0], [2e-4, 1.0, 1.1, 0.1]).unwrap();
        let rows = run_benchmark(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].failed);
    }

    #[test]
    fn failure_rates_and_replay() {
        let mut rows = run_benchmark(&small()).unwrap();
        rows.push(BenchmarkRow { failed: true, reason: "x, \"y\"".into(), ..rows[0].clone() });
        let rates = failure_rate(&rows);
        assert_eq!(rates["npmc"], 25.0);
        let replay = parse_rows_csv(&rows_csv(&rows)).unwrap();
        assert_eq!(failure_rate(&replay), rates);
        assert_eq!(replay[3].reason, "x, \"y\"");
        assert_eq!(replay[0].mse, rows[0].mse);
        let none: Vec<BenchmarkRow> = (0..10).map(|_| BenchmarkRow { failed: false, ..rows[0].clone() }).collect();
        assert_eq!(failure_rate(&none)["npmc"], 0.0);
    }
}
