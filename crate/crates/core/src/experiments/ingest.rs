//! Position tracks to per-individual displacement series.
//!
//! Input columns: `individual_id,day_index,position_m`. Rows may come in any
//! order; they are sorted by (id, day) before differencing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observations::ObservationSet;

/// Individuals with fewer displacements than this are rejected.
pub const MIN_DISPLACEMENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub id: String,
    pub observations: ObservationSet,
    /// `(from_day, to_day)` of each displacement.
    pub spans: Vec<(i64, i64)>,
    /// Indices of displacements spanning more than one day.
    pub gaps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    pub id: String,
    pub displacements: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingested {
    pub tracks: Vec<Track>,
    pub rejected: Vec<Rejected>,
}

impl Ingested {
    /// `T_n -> number of individuals`.
    pub fn length_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for t in &self.tracks {
            *h.entry(t.observations.len()).or_insert(0) += 1;
        }
        h
    }

    pub fn displacements_csv(&self) -> String {
        let mut out = String::from("individual_id,index,from_day,to_day,displacement_m,gap\n");
        for t in &self.tracks {
            for (i, (v, (a, b))) in t.observations.values.iter().zip(&t.spans).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{},{}", t.id, i, a, b, v, (b - a > 1) as u8);
            }
        }
        out
    }
}

/// Parses and differences a position CSV.
pub fn ingest_displacements(text: &str) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let (ci, cd, cp) = (col("individual_id")?, col("day_index")?, col("position_m")?);
    let mut by_id: BTreeMap<String, BTreeMap<i64, f64>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| rec.get(k).unwrap_or("");
        let id = field(ci).to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, message: "empty individual_id".into() });
        }
        let day: i64 = field(cd).parse().map_err(|_| Error::Parse { line, message: format!("bad day_index '{}'", field(cd)) })?;
        let pos: f64 = field(cp).parse().map_err(|_| Error::Parse { line, message: format!("bad position_m '{}'", field(cp)) })?;
        if !pos.is_finite() {
            return Err(Error::Parse { line, message: "position_m is not finite".into() });
        }
        if by_id.entry(id.clone()).or_default().insert(day, pos).is_some() {
            return Err(Error::DuplicateMeasurement { id, day });
        }
    }
    let mut out = Ingested { tracks: Vec::new(), rejected: Vec::new() };
    for (id, days) in by_id {
        let pts: Vec<(i64, f64)> = days.into_iter().collect();
        let n = pts.len().saturating_sub(1);
        if n < MIN_DISPLACEMENTS {
            out.rejected.push(Rejected {
                id,
                displacements: n,
                reason: format!("{n} displacements, need at least {MIN_DISPLACEMENTS}"),
            });
            continue;
        }
        let values: Vec<f64> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let spans: Vec<(i64, i64)> = pts.windows(2).map(|w| (w[0].0, w[1].0)).collect();
        let gaps = spans.iter().enumerate().filter(|(_, (a, b))| b - a > 1).map(|(i, _)| i).collect();
        let observations = ObservationSet::new(values, id.clone())?;
        out.tracks.push(Track { id, observations, spans, gaps });
    }
    Ok(out)
}

/// Differencing without the minimum-length rule; exposed for small fixtures.
pub fn displacements(positions: &[(i64, f64)]) -> Vec<f64> {
    let mut pts = positions.to_vec();
    pts.sort_by_key(|p| p.0);
    pts.windows(2).map(|w| w[1].1 - w[0].1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_fixture() {
        assert_eq!(displacements(&[(1, 100.0), (2, 130.0), (3, 110.0)]), vec![30.0, -20.0]);
        let r = ingest_displacements("individual_id,day_index,position_m\nf1,1,100\nf1,2,130\nf1,3,110\n").unwrap();
        assert!(r.tracks.is_empty());
        assert_eq!(r.rejected[0].displacements, 2);
    }

    #[test]
    fn gaps_order_and_rejection() {
        let text = "individual_id,day_index,position_m\n\
                    a,3,5\na,1,0\na,2,2\na,6,1\na,7,1.5\na,8,-4\nb,1,10\n";
        let r = ingest_displacements(text).unwrap();
        assert_eq!(r.tracks.len(), 1);
        let a = &r.tracks[0];
        assert_eq!(a.observations.values, vec![2.0, 3.0, -4.0, 0.5, -5.5]);
        assert_eq!(a.gaps, vec![2]);
        assert_eq!(a.spans[2], (3, 6));
        assert_eq!(r.rejected, vec![Rejected { id: "b".into(), displacements: 0, reason: "0 displacements, need at least 5".into() }]);
        assert!(r.displacements_csv().contains("a,2,3,6,-4,1\n"));
    }

    #[test]
    fn errors() {
        let dup = "individual_id,day_index,position_m\nx,1,0\nx,1,3\n";
        assert_eq!(ingest_displacements(dup), Err(Error::DuplicateMeasurement { id: "x".into(), day: 1 }));
        let bad = "individual_id,day_index,position_m\nx,1,0\nx,two,3\n";
        assert!(matches!(ingest_displacements(bad), Err(Error::Parse { line: 3, .. })));
        let short = "individual_id,day_index,position_m\nx,1,0\nx,2\n";
        assert!(matches!(ingest_displacements(short), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(ingest_displacements("id,day\n"), Err(Error::Parse { line: 1, .. })));
    }
}
