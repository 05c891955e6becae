//! Observation vectors and their CSV form.
//!
//! The file holds one value per line, optionally preceded by a header line
//! `# label=<text> seed=<int> params=<a,b,g,d>` in which every field is optional.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::StableParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub values: Vec<f64>,
    pub label: String,
    pub seed: Option<u64>,
    pub params: Option<StableParams>,
}

impl ObservationSet {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidObservations("observation set is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidObservations(format!("value {i} is not finite")));
        }
        Ok(ObservationSet { values, label: label.into(), seed: None, params: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = Vec::new();
        if !self.label.is_empty() {
            let label: String =
                self.label.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
            header.push(format!("label={label}"));
        }
        if let Some(seed) = self.seed {
            header.push(format!("seed={seed}"));
        }
        if let Some(p) = &self.params {
            header.push(format!("params={p}"));
        }
        if !header.is_empty() {
            let _ = writeln!(out, "# {}", header.join(" "));
        }
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut label = String::new();
        let mut seed = None;
        let mut params = None;
        let mut values = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for token in rest.split_whitespace() {
                    let Some((key, value)) = token.split_once('=') else { continue };
                    match key {
                        "label" => label = value.to_string(),
                        "seed" => {
                            seed = Some(value.parse::<u64>().map_err(|e| Error::Parse {
                                line: lineno,
                                message: format!("bad seed '{value}': {e}"),
                            })?)
                        }
                        "params" => {
                            params = Some(value.parse::<StableParams>().map_err(|e| Error::Parse {
                                line: lineno,
                                message: e.to_string(),
                            })?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            // Tolerate a trailing comma-separated column from spreadsheet exports.
            let field = line.split(',').next().unwrap_or(line).trim();
            let v = field.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad value '{field}': {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: lineno, message: "value is not finite".into() });
            }
            values.push(v);
        }
        let mut obs = ObservationSet::new(values, label)?;
        obs.seed = seed;
        obs.params = params;
        Ok(obs)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut obs = Self::from_csv(&text)?;
        if obs.label.is_empty() {
            obs.label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(obs)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
