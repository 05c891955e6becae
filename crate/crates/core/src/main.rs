use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use stable_npmc::abc::{abc_fit, parse_schedule, AbcConfig};
use stable_npmc::experiments::ingest::ingest_displacements;
use stable_npmc::experiments::output::{write_benchmark, write_ingest, write_rate_probe};
use stable_npmc::experiments::rate_probe::{rate_probe, NisRateProbe};
use stable_npmc::experiments::scenario::ScenarioSpec;
use stable_npmc::mh::{mh_fit, MhConfig};
use stable_npmc::npmc::{npmc_fit, NpmcConfig};
use stable_npmc::observations::ObservationSet;
use stable_npmc::pdf::{log_density_estimate, PdfAccuracy};
use stable_npmc::report::FitReport;
use stable_npmc::sampler::generate_observations;
use stable_npmc::{Error, ParamBox, Result, StableParams};

#[derive(Parser)]
#[command(name = "stable-npmc", version, about = "Alpha-stable simulation and Bayesian parameter fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw i.i.d. observations.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the density; writes `x,density`.
    Pdf {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
        /// `lo:hi:n`, n equally spaced points including both ends.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    FitNpmc {
        #[command(flatten)]
        common: FitArgs,
        #[arg(long, default_value_t = 300)]
        particles: usize,
        /// Defaults to floor(sqrt(particles)).
        #[arg(long)]
        clip: Option<usize>,
        #[arg(long, default_value_t = 10)]
        iters: usize,
    },
    FitMh {
        #[command(flatten)]
        common: FitArgs,
        #[arg(long, default_value_t = 3000)]
        chain_length: usize,
    },
    FitAbc {
        #[command(flatten)]
        common: FitArgs,
        /// `default` or a comma-separated decreasing list.
        #[arg(long, default_value = "default")]
        schedule: String,
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 1_000_000)]
        budget_draws: u64,
        #[arg(long, default_value_t = 900)]
        budget_secs: u64,
    },
    /// Synthetic benchmark from a scenario file.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write timing.csv (wall clock, not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Position tracks to displacement series.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence rates of clipped importance sampling on a toy target.
    RateProbe {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    delta: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<StableParams> {
        StableParams::new(self.alpha, self.beta, self.gamma, self.delta)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// p1, p2, p3, custom (with --box) or custom:<8 bounds>.
    #[arg(long, default_value = "p1")]
    prior: String,
    /// `a_lo,a_hi,b_lo,b_hi,g_lo,g_hi,d_lo,d_hi` for `--prior custom`.
    #[arg(long = "box", allow_hyphen_values = true)]
    bounds: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Known truth `a,b,g,d`; enables MSE columns.
    #[arg(long, allow_hyphen_values = true)]
    truth: Option<String>,
    /// Directory for report.json and trace.csv.
    #[arg(long)]
    out: PathBuf,
}

impl FitArgs {
    fn prior(&self) -> Result<ParamBox> {
        match (self.prior.as_str(), &self.bounds) {
            ("custom", Some(b)) => ParamBox::parse_custom(b),
            ("custom", None) => Err(Error::InvalidConfig("--prior custom needs --box".into())),
            (p, _) => match p.strip_prefix("custom:") {
                Some(b) => ParamBox::parse_custom(b),
                None => ParamBox::preset(p),
            },
        }
    }

    fn truth(&self) -> Result<Option<StableParams>> {
        let Some(t) = &self.truth else { return Ok(None) };
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("--truth: {e}")))?;
        if v.len() != 4 {
            return Err(Error::InvalidConfig("--truth needs a,b,g,d".into()));
        }
        StableParams::new(v[0], v[1], v[2], v[3]).map(Some)
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("grid '{s}' is not lo:hi:n"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n == 1 && lo != hi) {
        return Err(bad());
    }
    Ok((0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_fit(report: &FitReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json() + "\n")?;
    fs::write(dir.join("trace.csv"), report.trace_csv())?;
    if let Some(f) = &report.failure {
        eprintln!("warning: {} run flagged: {f}", report.estimator);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { params, count, seed, out } => {
            let obs = generate_observations(&params.params()?, count, seed)?;
            emit(&out, &obs.to_csv())
        }
        Command::Pdf { params, x, grid, out } => {
            let p = params.params()?;
            let mut xs = x;
            if let Some(g) = grid {
                xs.extend(parse_grid(&g)?);
            }
            if xs.is_empty() {
                return Err(Error::InvalidConfig("give --x values or --grid".into()));
            }
            let acc = PdfAccuracy::default();
            let mut text = String::from("x,density\n");
            for v in xs {
                let est = log_density_estimate(&p, v, &acc);
                if !est.accurate {
                    eprintln!("warning: accuracy target missed at x = {v} (error estimate {:e})", est.abs_error);
                }
                let _ = writeln!(text, "{v},{}", est.density());
            }
            emit(&out, &text)
        }
        Command::FitNpmc { common, particles, clip, iters } => {
            let obs = ObservationSet::read(&common.data)?;
            let cfg = NpmcConfig::new(particles, clip, iters, common.prior()?, common.seed)?;
            let report = npmc_fit(&obs, &cfg, common.truth()?.as_ref())?;
            write_fit(&report, &common.out)
        }
        Command::FitMh { common, chain_length } => {
            let obs = ObservationSet::read(&common.data)?;
            let cfg = MhConfig::new(chain_length, common.prior()?, common.seed)?;
            let report = mh_fit(&obs, &cfg, common.truth()?.as_ref())?;
            write_fit(&report, &common.out)
        }
        Command::FitAbc { common, schedule, particles, budget_draws, budget_secs } => {
            let obs = ObservationSet::read(&common.data)?;
            let mut cfg = AbcConfig::new(parse_schedule(&schedule)?, particles, common.prior()?, common.seed)?;
            cfg.max_draws_per_iteration = budget_draws;
            cfg.wall_clock_budget = Duration::from_secs(budget_secs);
            let report = abc_fit(&obs, &cfg, common.truth()?.as_ref())?;
            write_fit(&report, &common.out)
        }
        Command::Bench { scenario, out, timing } => {
            let spec = ScenarioSpec::parse(&fs::read_to_string(&scenario)?)?;
            let report = write_benchmark(&spec, &out, timing)?;
            for (est, rate) in &report.failure_rate {
                eprintln!("{est}: failure rate {rate:.2}%");
            }
            Ok(())
        }
        Command::Ingest { csv, out } => {
            let ingested = ingest_displacements(&fs::read_to_string(&csv)?)?;
            write_ingest(&ingested, &out)?;
            eprintln!("{} individuals accepted, {} rejected", ingested.tracks.len(), ingested.rejected.len());
            Ok(())
        }
        Command::RateProbe { out, replications, seed } => {
            let probe = NisRateProbe { replications, seed, ..Default::default() };
            write_rate_probe(&rate_probe(&probe)?, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
