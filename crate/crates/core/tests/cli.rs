use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stable-npmc")).args(args).output().unwrap()
}

#[test]
fn pdf_writes_header_and_rows() {
    let out = cli(&["pdf", "--alpha", "2", "--x", "0", "-1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,density");
    assert_eq!(lines.len(), 3);
    let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
}

#[test]
fn simulate_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.csv");
    assert!(cli(&["simulate", "--alpha", "1.2", "--count", "25", "--seed", "3", "--out", path.to_str().unwrap()]).status.success());
    let obs = stable_npmc::observations::ObservationSet::read(&path).unwrap();
    assert_eq!(obs.len(), 25);
}

#[test]
fn invalid_input_fails_with_message() {
    let bad = cli(&["simulate", "--alpha", "2.5"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "1.0\n2.0\n-0.5\n").unwrap();
    let out = dir.path().join("o");
    let no_box = cli(&["fit-mh", "--data", data.to_str().unwrap(), "--prior", "custom", "--out", out.to_str().unwrap()]);
    assert!(!no_box.status.success());
    assert!(String::from_utf8_lossy(&no_box.stderr).contains("--box"));

    let scenario = dir.path().join("s.txt");
    std::fs::write(&scenario, "runs = 2\nnonsense = 1\n").unwrap();
    let bench = cli(&["bench", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!bench.status.success());
    assert!(String::from_utf8_lossy(&bench.stderr).contains("line 2"));
}

#[test]
fn fit_report_has_trace_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(cli(&["simulate", "--alpha", "1.7", "--count", "30", "--seed", "1", "--out", data.to_str().unwrap()]).status.success());
    let out = dir.path().join("fit");
    let st = cli(&[
        "fit-npmc", "--data", data.to_str().unwrap(), "--particles", "50", "--clip", "7", "--iters", "3", "--truth", "1.7,0,1,0", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["estimator"], "npmc");
    assert_eq!(report["iterations"].as_array().unwrap().len(), 3);
}
