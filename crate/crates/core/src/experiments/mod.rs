//! Benchmark harness, field-data ingestion and the clipping rate probe.

pub mod bench;
pub mod binning;
pub mod ingest;
pub mod output;
pub mod rate_probe;
pub mod scenario;

pub use bench::{failure_rate, run_benchmark, run_benchmark_with, BenchmarkRow, RunOutcome, TraceRow};
pub use binning::{bin_by_alpha, BinSummary};
pub use ingest::{ingest_displacements, Ingested, Track};
pub use rate_probe::{rate_probe, NisRateProbe, RateReport};
pub use scenario::{Estimator, ScenarioSpec};
