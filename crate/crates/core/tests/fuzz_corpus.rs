//! The checked-in fuzz seeds stay meaningful: valid seeds parse and the
//! deliberately broken ones are rejected without panicking.

use std::fs;
use std::path::PathBuf;

use effquery::config::RunConfig;
use effquery::policies::ThresholdTable;
use effquery::report::SolveReport;
use effquery::ChainSpec;

fn seed(target: &str, name: &str) -> String {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "fuzz",
        "corpus",
        target,
        name,
    ]
    .iter()
    .collect();
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_config_seeds() {
    for name in [
        "empty.json",
        "full.json",
        "markovian.json",
        "explicit_chain.json",
    ] {
        RunConfig::parse(&seed("run_config", name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(RunConfig::parse(&seed("run_config", "bad_type.json")).is_err());
}

#[test]
fn chain_seeds() {
    assert_eq!(
        ChainSpec::parse_json(&seed("chain_spec", "uniform.json"))
            .unwrap()
            .len(),
        10
    );
    assert_eq!(
        ChainSpec::parse_json(&seed("chain_spec", "explicit.json"))
            .unwrap()
            .len(),
        3
    );
    assert!(ChainSpec::parse_json(&seed("chain_spec", "invalid.json")).is_err());
}

#[test]
fn solve_report_seeds() {
    let tight = SolveReport::parse(&seed("solve_report", "default.json")).unwrap();
    assert!(tight.mu_star > 0.0);
    let loose = SolveReport::parse(&seed("solve_report", "early_exit.json")).unwrap();
    assert!(loose.early_exit);
}

#[test]
fn threshold_seeds() {
    for name in ["table1_c0.5.csv", "table1_c1.csv"] {
        let table = ThresholdTable::from_csv(&seed("threshold_csv", name)).unwrap();
        assert_eq!(table.delta_max(), 10);
    }
    assert!(ThresholdTable::from_csv(&seed("threshold_csv", "non_monotone.csv")).is_err());
}
