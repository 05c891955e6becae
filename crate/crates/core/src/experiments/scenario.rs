//! Flat `key = value` scenario files.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::abc::{default_schedule, parse_schedule};
use crate::error::{Error, Result};
use crate::params::ParamBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Npmc,
    Mh,
    Abc,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Npmc => "npmc",
            Estimator::Mh => "mh",
            Estimator::Abc => "abc",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "npmc" => Ok(Estimator::Npmc),
            "mh" => Ok(Estimator::Mh),
            "abc" => Ok(Estimator::Abc),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// One synthetic benchmark campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub runs: usize,
    pub observations: usize,
    /// Preset name (`p1`, `p2`, `p3`) or `custom`.
    pub prior_name: String,
    pub prior: ParamBox,
    /// Box from which the true parameters are drawn; defaults to the prior.
    pub law: ParamBox,
    pub estimators: Vec<Estimator>,
    pub npmc_particles: usize,
    pub npmc_clip: usize,
    pub npmc_iters: usize,
    pub mh_chain_length: usize,
    pub abc_schedule: Vec<f64>,
    pub abc_particles: usize,
    pub abc_budget_draws: u64,
    pub abc_budget_secs: u64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            runs: 1,
            observations: 30,
            prior_name: "p1".into(),
            prior: ParamBox::p1(),
            law: ParamBox::p1(),
            estimators: vec![Estimator::Npmc],
            npmc_particles: 300,
            npmc_clip: 20,
            npmc_iters: 10,
            mh_chain_length: 3000,
            abc_schedule: default_schedule(),
            abc_particles: 1000,
            abc_budget_draws: 1_000_000,
            abc_budget_secs: 900,
            seed: 0,
        }
    }
}

/// Keys accepted in scenario files.
pub const KEYS: &[&str] = &[
    "runs",
    "observations",
    "prior",
    "law",
    "law.alpha",
    "estimators",
    "npmc.particles",
    "npmc.clip",
    "npmc.iters",
    "mh.chain_length",
    "abc.schedule",
    "abc.particles",
    "abc.budget_draws",
    "abc.budget_secs",
    "seed",
];

fn num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| Error::Parse { line, message: format!("{key}: {e}") })
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ScenarioSpec::default();
        let mut law: Option<ParamBox> = None;
        let mut law_alpha: Option<(f64, f64)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse { line, message: format!("expected key = value, got '{content}'") });
            };
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| Error::Parse { line, message: format!("{key}: {e}") };
            match key {
                "runs" => spec.runs = num(key, value, line)?,
                "observations" => spec.observations = num(key, value, line)?,
                "prior" => {
                    if let Some(custom) = value.strip_prefix("custom:") {
                        spec.prior = ParamBox::parse_custom(custom).map_err(wrap)?;
                        spec.prior_name = "custom".into();
                    } else {
                        spec.prior = ParamBox::preset(value).map_err(wrap)?;
                        spec.prior_name = value.to_string();
                    }
                }
                "law" => law = Some(ParamBox::parse_custom(value).map_err(wrap)?),
                "law.alpha" => {
                    let v: Vec<&str> = value.split(',').map(str::trim).collect();
                    if v.len() != 2 {
                        return Err(Error::Parse { line, message: "law.alpha needs lo,hi".into() });
                    }
                    law_alpha = Some((num(key, v[0], line)?, num(key, v[1], line)?));
                }
                "estimators" => {
                    spec.estimators = value.split(',').map(str::parse).collect::<Result<_>>().map_err(wrap)?;
                }
                "npmc.particles" => spec.npmc_particles = num(key, value, line)?,
                "npmc.clip" => spec.npmc_clip = num(key, value, line)?,
                "npmc.iters" => spec.npmc_iters = num(key, value, line)?,
                "mh.chain_length" => spec.mh_chain_length = num(key, value, line)?,
                "abc.schedule" => spec.abc_schedule = parse_schedule(value).map_err(wrap)?,
                "abc.particles" => spec.abc_particles = num(key, value, line)?,
                "abc.budget_draws" => spec.abc_budget_draws = num(key, value, line)?,
                "abc.budget_secs" => spec.abc_budget_secs = num(key, value, line)?,
                "seed" => spec.seed = num(key, value, line)?,
                other => return Err(Error::Parse { line, message: format!("unknown key '{other}'") }),
            }
        }
        let mut law = law.unwrap_or(spec.prior);
        if let Some((lo, hi)) = law_alpha {
            law = ParamBox::new([lo, law.lower[1], law.lower[2], law.lower[3]], [hi, law.upper[1], law.upper[2], law.upper[3]])?;
        }
        spec.law = law;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations < 2 {
            return Err(Error::InvalidConfig("observations must be at least 2".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimators selected".into()));
        }
        Ok(())
    }
}
