mod common;

use effquery::config::RunConfig;
use effquery::metrics::{CostModel, GoeConfig};
use effquery::model::{CmdpModel, ConstrainedMdp, RewardMode};
use effquery::policies::{make_baseline, BaselineKind, QueryController, ThresholdTable};
use effquery::report::SolveReport;
use effquery::simulator::{run, SimConfig};
use effquery::solver::{
    average_reward_cost, greedy_policy, relative_value_iteration, solve, SolverConfig,
};
use effquery::{Action, ChainSpec, ImportanceChain, ImportanceLevels};
use proptest::prelude::*;

use common::{all_deterministic, Reference};

fn stochastic_rows(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), k).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

fn random_model() -> impl Strategy<Value = CmdpModel> {
    (2u32..8, 2usize..5, 0.0f64..0.95, 0.05f64..2.0).prop_flat_map(|(delta_max, k, p_eps, c0)| {
        stochastic_rows(k).prop_map(move |rows| {
            let levels = ImportanceLevels::uniform(k).unwrap();
            let chain = ImportanceChain::new_unchecked(levels, rows);
            CmdpModel::build(
                chain,
                delta_max,
                p_eps,
                GoeConfig::default(),
                CostModel { c0 },
                RewardMode::PerSlotState,
            )
            .unwrap()
        })
    })
}

/// Grid whose pull set is an up-set in age with thresholds non-decreasing
/// in level.
fn monotone_grid(delta_max: u32, k: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    prop::collection::vec(1u32..=delta_max + 1, k).prop_map(move |mut th| {
        th.sort_unstable();
        (1..=delta_max)
            .map(|d| th.iter().map(|&t| d >= t).collect())
            .collect()
    })
}

proptest! {
    #[test]
    fn kernel_rows_are_distributions(model in random_model()) {
        for s in 0..model.num_states() {
            for a in Action::ALL {
                let total: f64 = model.successors(s, a).iter().map(|&(_, p)| p).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(model.successors(s, a).iter().all(|&(_, p)| p >= 0.0));
            }
        }
    }

    #[test]
    fn monotone_grids_are_thresholds(grid in (2u32..10, 2usize..8).prop_flat_map(|(d, k)| monotone_grid(d, k))) {
        let delta_max = grid.len() as u32;
        let k = grid[0].len();
        let levels = ImportanceLevels::uniform(k).unwrap();
        let table = ThresholdTable::from_grid(delta_max, levels, &grid).unwrap().unwrap();
        for (d, row) in grid.iter().enumerate() {
            for (l, &pull) in row.iter().enumerate() {
                let expected = if pull { Action::Pull } else { Action::Silent };
                prop_assert_eq!(table.decide_by_age(d as u32 + 1, l), expected);
                prop_assert_eq!(table.decide_by_level(d as u32 + 1, l), expected);
            }
        }
        let back = ThresholdTable::from_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(back.delta_thresholds(), table.delta_thresholds());
        prop_assert_eq!(back.level_thresholds(), table.level_thresholds());
        let policy = table.to_policy();
        prop_assert!(policy.is_deterministic());
    }

    #[test]
    fn accepted_grids_are_reproduced(grid in (2u32..5, 2usize..4).prop_flat_map(|(d, k)| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), k), d as usize)
    })) {
        let delta_max = grid.len() as u32;
        let levels = ImportanceLevels::uniform(grid[0].len()).unwrap();
        if let Ok(table) = ThresholdTable::from_grid(delta_max, levels, &grid).unwrap() {
            for (d, row) in grid.iter().enumerate() {
                for (l, &pull) in row.iter().enumerate() {
                    prop_assert_eq!(table.decide_by_age(d as u32 + 1, l).is_pull(), pull);
                }
            }
        }
    }

    #[test]
    fn controllers_are_reproducible(seed in any::<u64>(), q in 0.05f64..1.0) {
        for kind in BaselineKind::ALL {
            let (Ok(mut a), Ok(mut b)) = (make_baseline(kind, q, seed), make_baseline(kind, q, seed)) else {
                continue;
            };
            for n in 1..200 {
                prop_assert_eq!(a.decide(n, 1, 0), b.decide(n, 1, 0));
            }
        }
    }

    #[test]
    fn age_and_cost_accounting(seed in any::<u64>(), q in 0.0f64..=1.0, c0 in 0.0f64..2.0) {
        let chain = ImportanceChain::uniform(ImportanceLevels::uniform(4).unwrap());
        let model = CmdpModel::build(chain, 6, 0.3, GoeConfig::default(), CostModel { c0 }, RewardMode::PerSlotState)
            .unwrap();
        let sim = SimConfig::from_model(&model, 300, seed);
        let mut controller = make_baseline(BaselineKind::Binomial, q, seed).unwrap();
        let (summary, trace) = run(&sim, &mut controller, true).unwrap();
        let trace = trace.unwrap();
        for w in trace.windows(2) {
            let expected = if w[0].success { 1 } else { (w[0].delta + 1).min(6) };
            prop_assert_eq!(w[1].delta, expected);
        }
        let mut pulls = 0;
        for r in &trace {
            prop_assert!(!r.success || r.alpha.is_pull());
            prop_assert_eq!(r.delivered.is_some(), r.success);
            prop_assert_eq!(r.cost, if r.alpha.is_pull() { c0 } else { 0.0 });
            prop_assert!(r.ngoe > 0.0);
            pulls += r.alpha.is_pull() as u32;
        }
        prop_assert!((summary.query_rate - pulls as f64 / 300.0).abs() < 1e-12);
        prop_assert!((summary.avg_cost - c0 * summary.query_rate).abs() < 1e-12);
    }

    #[test]
    fn policy_file_round_trip(budget in 0.0f64..0.6) {
        let model = tiny_model();
        let out = solve(&model, budget, &SolverConfig::default()).unwrap();
        let report = SolveReport::from_outcome(&model, &out);
        let back = SolveReport::parse(&report.to_json()).unwrap();
        prop_assert_eq!(back.stationary_policy().unwrap(), out.policy);
        prop_assert!(QueryController::new(back.controller_kind().unwrap(), 0).is_ok());
    }

    #[test]
    fn constrained_solve_matches_mixture_oracle(budget in 0.02f64..0.5) {
        let reference = Reference::uniform(3, 2, 0.2, 0.5);
        let pairs: Vec<(f64, f64)> = all_deterministic(reference.n()).map(|p| reference.averages(&p)).collect();
        // Best cost-feasible mixture of at most two deterministic policies.
        let mut best = f64::NEG_INFINITY;
        for &(r1, c1) in &pairs {
            if c1 <= budget {
                best = best.max(r1);
            }
            for &(r2, c2) in &pairs {
                if c1 > budget && c2 < budget {
                    let eta = (c1 - budget) / (c1 - c2);
                    best = best.max((1.0 - eta) * r1 + eta * r2);
                }
            }
        }
        let model = tiny_model();
        let cfg = SolverConfig { eps_mu: 1e-6, eps_v: 1e-9, ..SolverConfig::default() };
        let out = solve(&model, budget, &cfg).unwrap();
        let (reward, cost) = average_reward_cost(&model, &out.policy).unwrap();
        prop_assert!(cost <= budget + 1e-6);
        prop_assert!((reward - best).abs() < 1e-4, "reward {} vs oracle {}", reward, best);
    }

    #[test]
    fn run_config_parser_total(text in ".{0,200}") {
        let _ = RunConfig::parse(&text);
    }

    #[test]
    fn run_config_parser_total_on_json_shapes(
        key in prop::sample::select(vec!["model", "solver", "controller", "simulation", "experiment", "output_dir"]),
        value in prop::sample::select(vec!["1", "-1", "null", "\"x\"", "[]", "{}", "{\"kind\":\"periodic\"}", "1e400"]),
    ) {
        let _ = RunConfig::parse(&format!("{{\"{key}\": {value}}}"));
    }

    #[test]
    fn chain_parser_total(rows in prop::collection::vec(prop::collection::vec(-1.0f64..2.0, 0..4), 0..4)) {
        let text = serde_json::json!({ "explicit": { "levels": [0.0, 0.5, 1.0], "matrix": rows } }).to_string();
        let _ = ChainSpec::parse_json(&text);
        let _ = ChainSpec::parse_json(&text[..text.len() / 2]);
    }

    #[test]
    fn policy_file_parser_total(text in ".{0,300}") {
        let _ = SolveReport::parse(&text);
    }

    #[test]
    fn threshold_csv_parser_total(lines in prop::collection::vec("[0-9a-z.,-]{0,30}", 0..12)) {
        let _ = ThresholdTable::from_csv(&lines.join("\n"));
    }
}

fn tiny_model() -> CmdpModel {
    let chain = ImportanceChain::uniform(ImportanceLevels::uniform(2).unwrap());
    CmdpModel::build(
        chain,
        3,
        0.2,
        GoeConfig::default(),
        CostModel { c0: 0.5 },
        RewardMode::PerSlotState,
    )
    .unwrap()
}

#[test]
fn dual_functions_are_monotone_in_mu() {
    let model = RunConfig::default().model.build().unwrap();
    let cfg = SolverConfig::default();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for mu in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let inner = relative_value_iteration(&model, mu, &cfg).unwrap();
        let (reward, cost) = average_reward_cost(&model, &inner.policy).unwrap();
        assert!(
            reward <= last.0 + 1e-9 && cost <= last.1 + 1e-9,
            "mu={mu}: {reward}, {cost} after {last:?}"
        );
        last = (reward, cost);
    }
}

#[test]
fn greedy_policy_is_a_fixed_point() {
    let model = RunConfig::default().model.build().unwrap();
    let inner = relative_value_iteration(&model, 0.3, &SolverConfig::default()).unwrap();
    assert_eq!(
        greedy_policy(&model, 0.3, &inner.value.values),
        inner.policy
    );
}
