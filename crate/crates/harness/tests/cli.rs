use std::process::{Command, Output};

fn fcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcnet")).args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> Vec<u8> {
    let out = fcnet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [&["frobnicate"][..], &["sample", "--q", "0.1"], &["mc", "--trials", "many"]] {
        assert_eq!(fcnet(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn data_errors_exit_with_1_and_json_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.edges");
    let out = fcnet(&["sample", "--graph", missing.to_str().unwrap(), "--q", "0.1", "--budget", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"B\": 2, \"respondents\": []}").unwrap();
    assert_eq!(fcnet(&["estimate", "--survey", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn survey_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    let survey = dir.path().join("s.json");
    let (graph, survey) = (graph.to_str().unwrap(), survey.to_str().unwrap());
    stdout_of(&["generate", "--seed", "4", "--nodes", "800", "--weak-range", "40,60", "--out", graph]);
    stdout_of(&["sample", "--seed", "5", "--graph", graph, "--q", "0.2", "--budget", "5", "--out", survey]);

    let report: serde_json::Value = serde_json::from_slice(&stdout_of(&["estimate", "--survey", survey])).unwrap();
    let n_hat = report["N_hat"].as_f64().unwrap();
    assert!((n_hat / 800.0 - 1.0).abs() < 0.2, "N_hat = {n_hat}");
    let jk = &report["jackknife"];
    for p in ["N", "q", "Ks", "Kw"] {
        assert!(jk[p]["sd"].as_f64().unwrap() > 0.0, "{p}: {jk}");
    }

    let plain: serde_json::Value =
        serde_json::from_slice(&stdout_of(&["estimate", "--survey", survey, "--no-jackknife"])).unwrap();
    assert!(plain.get("jackknife").is_none_or(|v| v.is_null()));
    assert_eq!(plain["N_hat"], report["N_hat"]);

    let csv = String::from_utf8(stdout_of(&["estimate", "--survey", survey, "--format", "csv", "--no-jackknife"])).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("N_hat,q_hat,"));
}

#[test]
fn mc_output_feeds_report() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("mc.csv");
    let trials = trials.to_str().unwrap();
    stdout_of(&["mc", "--seed", "2", "--nodes", "400", "--q", "0.3", "--budgets", "3", "--trials", "3", "--out", trials]);
    let summary: serde_json::Value =
        serde_json::from_slice(&stdout_of(&["report", trials, "--format", "json"])).unwrap();
    let group = &summary[0];
    assert_eq!(group["rows"], 3);
    assert!(group["ratios"]["N"]["median"].as_f64().unwrap() > 0.5);
}
