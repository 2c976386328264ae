use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn effquery(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effquery"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small experiment grid so sweeps finish quickly.
const SMALL: &str = r#"{
  "experiment": {
    "replications": 3,
    "n_slots": 200,
    "rates": [0.3, 0.8],
    "sweep_c0": [0.5],
    "cdf_replications": 5,
    "snapshot_slots": 20
  }
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn solve_default_config() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(tmp.path(), &["solve", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/solve.json")).unwrap())
            .unwrap();
    assert!(report["mu_star"].as_f64().unwrap() > 0.0);
    let table = report["action_table"].as_array().unwrap();
    assert_eq!(table.len(), 10);
    assert!(table.iter().all(|row| row.as_array().unwrap().len() == 10));
}

#[test]
fn loose_budget_gives_zero_multiplier() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(
        tmp.path(),
        &["solve", "--c-max", "0.5", "--output-dir", "out"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/solve.json")).unwrap())
            .unwrap();
    assert_eq!(report["mu_star"].as_f64(), Some(0.0));
    assert_eq!(report["early_exit"].as_bool(), Some(true));
}

#[test]
fn malformed_config_exits_2_with_location() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        "{\n  \"model\": {\n    \"delta_max\": \"ten\"\n  }\n}",
    );
    let out = effquery(tmp.path(), &["solve", &cfg]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(
        err.contains("model.delta_max") && err.contains("line 3"),
        "{err}"
    );

    let cfg = write_config(tmp.path(), "range.json", r#"{"model": {"p_eps": 1.5}}"#);
    let out = effquery(tmp.path(), &["solve", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("model.p_eps"));
}

#[test]
fn missing_config_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&effquery(tmp.path(), &["solve", "absent.json"])), 2);
}

#[test]
fn validate_only_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    for cmd in ["solve", "simulate", "thresholds"] {
        let out = effquery(tmp.path(), &[cmd, "--validate-only", "--output-dir", "out"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let out = effquery(
        tmp.path(),
        &[
            "experiment",
            "--which",
            "fig4",
            "--validate-only",
            "--output-dir",
            "out",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cap.json",
        r#"{"solver": {"max_inner_iters": 2}}"#,
    );
    let out = effquery(tmp.path(), &["solve", &cfg, "--output-dir", "out"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn simulate_policy_file_with_trace() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        code(&effquery(tmp.path(), &["solve", "--output-dir", "out"])),
        0
    );
    let out = effquery(
        tmp.path(),
        &[
            "simulate",
            "--policy",
            "out/solve.json",
            "--trace",
            "--output-dir",
            "sim",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("sim/simulate_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().contains(",1000,"));
    let trace = fs::read_to_string(tmp.path().join("sim/simulate_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1001);
    assert!(trace.starts_with("n,alpha,success,delta"));
}

#[test]
fn simulate_baseline_replications() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.json",
        r#"{"controller": {"kind": "binomial", "rate": 0.5}, "simulation": {"replications": 4, "n_slots": 100}}"#,
    );
    let out = effquery(tmp.path(), &["simulate", &cfg, "--output-dir", "sim"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("sim/simulate_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.starts_with("binomial,")));
}

#[test]
fn missing_policy_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(tmp.path(), &["simulate", "--policy", "nowhere.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("controller.path"));
}

#[test]
fn table1_writes_two_tables() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(
        tmp.path(),
        &["experiment", "--which", "table1", "--output-dir", "out"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for c0 in ["0.5", "1"] {
        let csv = fs::read_to_string(tmp.path().join(format!("out/table1_thresholds_c{c0}.csv")))
            .unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("delta,0,0.11"));
    }
}

#[test]
fn fig5_has_one_column_per_c0() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(
        tmp.path(),
        &[
            "experiment",
            "--which",
            "fig5",
            "--plots",
            "--output-dir",
            "out",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("out/fig5_convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("iteration,c0=0.1,c0=0.5,c0=1"));
    assert!(tmp.path().join("out/fig5_convergence.svg").exists());
}

#[test]
fn unknown_experiment_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(tmp.path(), &["experiment", "--which", "fig9"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&effquery(tmp.path(), &["experiment"])), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.json", SMALL);
    let runs = [("a", "4"), ("b", "1"), ("c", "2")];
    for (dir, jobs) in runs {
        let out = effquery(
            tmp.path(),
            &[
                "experiment",
                &cfg,
                "--which",
                "all",
                "--jobs",
                jobs,
                "--seed",
                "7",
                "--output-dir",
                dir,
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for name in &names {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        for dir in ["b", "c"] {
            assert_eq!(
                a,
                fs::read(tmp.path().join(dir).join(name)).unwrap(),
                "{name:?} differs in {dir}"
            );
        }
    }
}

#[test]
fn thresholds_reports_both_endpoints() {
    let tmp = TempDir::new().unwrap();
    let out = effquery(tmp.path(), &["thresholds", "--output-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("pi-: threshold policy") && text.contains("pi+: threshold policy"),
        "{text}"
    );
    assert!(tmp.path().join("out/thresholds_c0.5.csv").exists());
}
