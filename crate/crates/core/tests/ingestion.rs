use std::collections::BTreeMap;
use std::fmt::Write as _;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stable_npmc::experiments::ingest::ingest_displacements;
use stable_npmc::experiments::output::write_ingest;
use stable_npmc::observations::ObservationSet;

#[test]
fn twenty_one_individuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut text = String::from("individual_id,day_index,position_m\n");
    let mut rows_per_id = BTreeMap::new();
    let mut lines: Vec<String> = Vec::new();
    for k in 0..21 {
        let id = format!("fish{k:02}");
        let rows = rng.random_range(25..=35usize);
        rows_per_id.insert(id.clone(), rows);
        let mut day = 0i64;
        for _ in 0..rows {
            day += rng.random_range(1..=2);
            lines.push(format!("{id},{day},{}", rng.random_range(-500..=500)));
        }
    }
    // Input order must not matter.
    for i in (1..lines.len()).rev() {
        lines.swap(i, rng.random_range(0..=i));
    }
    for l in &lines {
        let _ = writeln!(text, "{l}");
    }

    let ing = ingest_displacements(&text).unwrap();
    assert_eq!(ing.tracks.len(), 21);
    assert!(ing.rejected.is_empty());
    let mut oracle: BTreeMap<usize, usize> = BTreeMap::new();
    for rows in rows_per_id.values() {
        *oracle.entry(rows - 1).or_default() += 1;
    }
    assert_eq!(ing.length_histogram(), oracle);

    let dir = tempfile::tempdir().unwrap();
    write_ingest(&ing, dir.path()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let from_file: BTreeMap<usize, usize> = report["length_histogram"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.parse().unwrap(), v.as_u64().unwrap() as usize))
        .collect();
    assert_eq!(from_file, oracle);
    for t in &ing.tracks {
        let back = ObservationSet::read(&dir.path().join("obs").join(format!("{}.csv", t.id))).unwrap();
        assert_eq!(back.values, t.observations.values);
        assert_eq!(back.len(), rows_per_id[&t.id] - 1);
    }
}

fn track_csv(tracks: &[Vec<(i64, i64)>]) -> String {
    let mut text = String::from("individual_id,day_index,position_m\n");
    for (k, t) in tracks.iter().enumerate() {
        for (day, pos) in t {
            let _ = writeln!(text, "t{k},{day},{pos}");
        }
    }
    text
}

fn track_strategy() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((1i64..4, -100_000i64..100_000), 6..40).prop_map(|steps| {
        let mut day = 0;
        steps
            .into_iter()
            .map(|(d, p)| {
                day += d;
                (day, p)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn displacements_sum_to_net_movement(track in track_strategy()) {
        let ing = ingest_displacements(&track_csv(std::slice::from_ref(&track))).unwrap();
        prop_assert_eq!(ing.tracks.len(), 1);
        let t = &ing.tracks[0];
        let sum: f64 = t.observations.values.iter().sum();
        // Integer positions keep every partial sum exact.
        prop_assert_eq!(sum, (track.last().unwrap().1 - track[0].1) as f64);
        let mut pos = track[0].1 as f64;
        for (d, (_, p)) in t.observations.values.iter().zip(&track[1..]) {
            pos += d;
            prop_assert_eq!(pos, *p as f64);
        }
        let gaps = track.windows(2).filter(|w| w[1].0 - w[0].0 > 1).count();
        prop_assert_eq!(t.gaps.len(), gaps);
    }
}
