//! Behavioral tests for the binary: exit-code contract, artifact structure
//! on both formats, default output locations, and the no-partial-file rule.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arithlab"))
}

fn run_in(dir: &Path, args: &[&str]) -> std::process::Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env("ARITHLAB_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["norm", "--weight", "no-such-rule", "--n-list", "100"],
        &["profile", "--set", "omega:5:3", "--n-list", "100"],
        &["simulate", "--experiment", "restricted", "--system", "rotation:4:1", "--n-list", "100"],
        &["density", "--forms", "1,1;2,2", "--set", "all", "--n", "50"],
        &["lemma-check", "--lemma", "partial-summation", "--alpha", "1.0"],
        &["no-such-command"],
        &["norm", "--n-list", "100"],
    ];
    for args in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "expected exit 2 for {args:?}, stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn budget_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["sieve", "--n-max", "2^40"],
        &["norm", "--weight", "ones", "--s", "9", "--n-list", "128"],
        &["density", "--forms", "1,0,0;0,1,0;0,0,1", "--set", "all", "--n", "100000"],
        &[
            "simulate",
            "--experiment",
            "average",
            "--system",
            "rotation:100000,100000,10:1,1,1",
            "--n-list",
            "100",
        ],
    ];
    for args in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(1),
            "expected exit 1 for {args:?}, stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn failed_runs_leave_no_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["norm", "--weight", "ones", "--s", "9", "--n-list", "128", "--out", "partial.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(
        !dir.path().join("partial.csv").exists(),
        "failed run must not leave a partial artifact"
    );
}

#[test]
fn csv_artifact_echoes_parameters_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["profile", "--set", "squarefree", "--s", "2", "--n-list", "128,256"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("arithlab_profile.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# command=profile"));
    let mut params = Vec::new();
    let mut header = None;
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("# ") {
            params.push(rest.to_string());
        } else {
            header = Some(line.to_string());
            break;
        }
    }
    // Parameter echo is sorted by key so artifacts diff cleanly.
    let mut sorted = params.clone();
    sorted.sort();
    assert_eq!(params, sorted);
    assert!(params.iter().any(|p| p.starts_with("set=")));
    assert!(params.iter().any(|p| p == "s=2"));
    assert_eq!(header.as_deref(), Some("n,norm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("128,"));
    assert!(rows[1].starts_with("256,"));
    // Decimal separator is a point; no locale commas inside a float field.
    for row in rows {
        assert_eq!(row.matches(',').count(), 1);
    }
}

#[test]
fn json_artifact_has_command_parameters_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "distance", "--f", "liouville", "--g", "one", "--cutoffs", "100,1000", "--format",
            "json",
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("arithlab_distance.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["command"], "distance");
    assert_eq!(value["parameters"]["f"], "liouville");
    let results = value["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["p_cutoff"], 100);
    assert!(results[0]["distance_sq"].as_f64().unwrap() > 0.0);
    assert!(
        results[1]["distance_sq"].as_f64().unwrap() > results[0]["distance_sq"].as_f64().unwrap()
    );
}

#[test]
fn default_out_dir_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["sieve", "--n-max", "1000"]);
    assert!(out.status.success());
    assert!(dir.path().join("arithlab_sieve.csv").exists());
    // The chosen path is reported on stdout for scripting.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("arithlab_sieve.csv"));
}

#[test]
fn explicit_out_beats_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("custom").join("report.json");
    let out = bin()
        .args(["ipk", "--set", "omega:0:2", "--k", "2", "--bound", "50", "--format", "json"])
        .arg("--out")
        .arg(&target)
        .env("ARITHLAB_OUT_DIR", dir.path())
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert!(target.exists(), "missing parent directories are created");
    assert!(!dir.path().join("arithlab_ipk.json").exists());
}

#[test]
fn recurrence_artifact_lists_good_times() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "recurrence", "--system", "rotation:6:1", "--polys", "n", "--a", "0", "--set", "all",
            "--n", "100", "--format", "json",
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("arithlab_recurrence.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = value["results"].as_array().unwrap();
    let lookup = |metric: &str| {
        rows.iter()
            .find(|r| r["metric"] == metric)
            .unwrap_or_else(|| panic!("row {metric}"))["value"]
            .clone()
    };
    assert_eq!(lookup("good_count"), 16);
    assert_eq!(lookup("good_0"), 6);
    assert_eq!(lookup("good_1"), 12);
}
