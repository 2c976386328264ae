//! Scripted evaluations: a short per-slot snapshot, replication CDFs, rate
//! sweeps, solver convergence traces and threshold tables.
//!
//! Every experiment is a pure function of a [`RunConfig`] and returns named
//! CSV documents; grid points run in parallel but results are assembled in
//! grid order, so output bytes depend only on the config.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::action::Action;
use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{net_goe, GoeConfig};
use crate::model::CmdpModel;
use crate::policies::{
    baseline_kind, extract_threshold_table, make_baseline, policy_grid, render_action_grid,
    special_case_policy, BaselineKind, ControllerKind, Extraction, QueryController, SpecialCase,
};
use crate::simulator::{replicate, run, SimSummary};
use crate::solver::{limiting_distribution, solve, SolveOutcome, StationaryPolicy, INITIAL_STATE};

/// A named output document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

/// Compact `f64` rendering used in file names (`0.5`, `1`).
pub fn c0_tag(c0: f64) -> String {
    format!("{c0}")
}

/// First 16 hex digits of the SHA-256 of the config's canonical JSON. The
/// output directory is left out so relocated runs hash the same.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.output_dir = RunConfig::default().output_dir;
    let json = serde_json::to_vec(&cfg).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

/// Which optimizer-derived policy to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    EffectAware,
    Special(SpecialCase),
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::EffectAware,
        Variant::Special(SpecialCase::QaoiAware),
        Variant::Special(SpecialCase::VoiAware),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::EffectAware => "effect_aware",
            Variant::Special(c) => c.label(),
        }
    }
}

/// Solves the chosen variant of `model` under budget `c_max`.
pub fn solve_variant(
    model: &CmdpModel,
    variant: Variant,
    c_max: f64,
    cfg: &RunConfig,
) -> Result<SolveOutcome> {
    match variant {
        Variant::EffectAware => solve(model, c_max, &cfg.solver),
        Variant::Special(case) => special_case_policy(case, model, c_max, &cfg.solver),
    }
}

pub fn state_policy_kind(model: &CmdpModel, policy: &StationaryPolicy) -> ControllerKind {
    ControllerKind::StatePolicy {
        policy: policy.clone(),
        space: model.space().clone(),
    }
}

/// Long-run expected net GoE of `policy` from the initial state, scored
/// with `eval`.
pub fn analytical_ngoe(
    model: &CmdpModel,
    policy: &StationaryPolicy,
    eval: &GoeConfig,
) -> Result<f64> {
    let rho = limiting_distribution(model, policy, INITIAL_STATE)?;
    let space = model.space();
    let cost = model.cost_model();
    Ok(space
        .states()
        .enumerate()
        .map(|(s, st)| {
            let v = space.levels().value(st.level);
            let p = policy.pull_prob(s);
            rho[s]
                * (p * net_goe(st.delta, v, Action::Pull, eval, cost)
                    + (1.0 - p) * net_goe(st.delta, v, Action::Silent, eval, cost))
        })
        .sum())
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Aligned per-slot series of several controllers under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub labels: Vec<String>,
    /// `series[c][n - 1] = (alpha, ngoe)` of controller `c` in slot `n`.
    pub series: Vec<Vec<(Action, f64)>>,
}

impl Snapshot {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for l in &self.labels {
            out.push_str(&format!(",{l}_alpha,{l}_ngoe"));
        }
        out.push('\n');
        let len = self.series.first().map_or(0, Vec::len);
        for n in 0..len {
            out.push_str(&(n + 1).to_string());
            for s in &self.series {
                let (a, g) = s[n];
                out.push_str(&format!(",{},{}", a.is_pull() as u8, g));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every controller for `n_slots` under the shared `seed`.
pub fn snapshot(
    cfg: &RunConfig,
    c0: f64,
    n_slots: u64,
    seed: u64,
    controllers: Vec<(String, ControllerKind)>,
) -> Result<Snapshot> {
    let sim = cfg.sim_config(c0, n_slots, seed)?;
    let mut labels = Vec::new();
    let mut series = Vec::new();
    for (label, kind) in controllers {
        let mut controller = QueryController::new(kind, seed)?;
        let (_, trace) = run(&sim, &mut controller, true)?;
        labels.push(label);
        series.push(
            trace
                .unwrap_or_default()
                .iter()
                .map(|r| (r.alpha, r.ngoe))
                .collect(),
        );
    }
    Ok(Snapshot { labels, series })
}

/// Effect-aware policy against the fixed-period baseline.
pub fn fig2(cfg: &RunConfig) -> Result<Snapshot> {
    let model = cfg.model.build()?;
    let outcome = solve(&model, cfg.model.c_max, &cfg.solver)?;
    let e = &cfg.experiment;
    snapshot(
        cfg,
        cfg.model.c0,
        e.snapshot_slots,
        e.seed,
        vec![
            (
                "effect_aware".into(),
                state_policy_kind(&model, &outcome.policy),
            ),
            (
                "periodic".into(),
                ControllerKind::Periodic {
                    period: e.snapshot_period,
                },
            ),
        ],
    )
}

/// Replication statistics of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRuns {
    pub label: String,
    pub summaries: Vec<SimSummary>,
}

impl PolicyRuns {
    pub fn sorted_ngoe(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.summaries.iter().map(|s| s.avg_ngoe).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn mean_ngoe(&self) -> f64 {
        mean_se(
            &self
                .summaries
                .iter()
                .map(|s| s.avg_ngoe)
                .collect::<Vec<_>>(),
        )
        .0
    }

    pub fn mean_rate(&self) -> f64 {
        mean_se(
            &self
                .summaries
                .iter()
                .map(|s| s.query_rate)
                .collect::<Vec<_>>(),
        )
        .0
    }
}

/// Replication CDFs of the effect-aware policy and the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfComparison {
    /// Effect-aware first, then the baselines.
    pub runs: Vec<PolicyRuns>,
}

#[derive(Debug, Serialize)]
struct CdfSummaryRow {
    policy: String,
    mean_ngoe: f64,
    mean_query_rate: f64,
    effect_aware_gain_pct: Option<f64>,
    effect_aware_rate_overhead_pct: Option<f64>,
}

impl CdfComparison {
    pub fn effect_aware(&self) -> &PolicyRuns {
        &self.runs[0]
    }

    /// Relative gain in mean NGoE of the effect-aware policy over `label`.
    pub fn gain_pct(&self, label: &str) -> Option<f64> {
        let other = self.runs.iter().find(|r| r.label == label)?;
        Some((self.effect_aware().mean_ngoe() / other.mean_ngoe() - 1.0) * 100.0)
    }

    /// Extra query rate of the effect-aware policy over the mean baseline rate.
    pub fn rate_overhead_pct(&self) -> f64 {
        let base: Vec<f64> = self.runs[1..].iter().map(PolicyRuns::mean_rate).collect();
        let (mean, _) = mean_se(&base);
        (self.effect_aware().mean_rate() / mean - 1.0) * 100.0
    }

    /// Sorted replication averages: `rank,quantile,<policy>...`.
    pub fn cdf_csv(&self) -> String {
        let sorted: Vec<Vec<f64>> = self.runs.iter().map(PolicyRuns::sorted_ngoe).collect();
        let r = sorted[0].len();
        let mut out = String::from("rank,quantile");
        for p in &self.runs {
            out.push(',');
            out.push_str(&p.label);
        }
        out.push('\n');
        for i in 0..r {
            out.push_str(&format!("{},{}", i + 1, (i + 1) as f64 / r as f64));
            for s in &sorted {
                out.push_str(&format!(",{}", s[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> Result<String> {
        let overhead = self.rate_overhead_pct();
        let rows: Vec<CdfSummaryRow> = self
            .runs
            .iter()
            .enumerate()
            .map(|(i, p)| CdfSummaryRow {
                policy: p.label.clone(),
                mean_ngoe: p.mean_ngoe(),
                mean_query_rate: p.mean_rate(),
                effect_aware_gain_pct: (i > 0).then(|| self.gain_pct(&p.label)).flatten(),
                effect_aware_rate_overhead_pct: (i == 0).then_some(overhead),
            })
            .collect();
        write_csv(&rows)
    }
}

/// Replications of every policy with paired seeds.
pub fn fig3(cfg: &RunConfig) -> Result<CdfComparison> {
    let e = &cfg.experiment;
    let model = cfg.model.build()?;
    let outcome = solve(&model, cfg.model.c_max, &cfg.solver)?;
    let sim = cfg.sim_config(cfg.model.c0, e.n_slots, e.seed)?;
    let mut runs = vec![PolicyRuns {
        label: "effect_aware".into(),
        summaries: replicate(
            &sim,
            |seed| QueryController::new(state_policy_kind(&model, &outcome.policy), seed),
            e.cdf_replications,
        )?,
    }];
    for kind in BaselineKind::ALL {
        runs.push(PolicyRuns {
            label: kind.label().into(),
            summaries: replicate(
                &sim,
                |seed| make_baseline(kind, e.cdf_rate, seed),
                e.cdf_replications,
            )?,
        });
    }
    Ok(CdfComparison { runs })
}

/// One point of the rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub policy: String,
    pub rate: f64,
    pub c0: f64,
    /// Cost budget of optimizer-derived policies.
    pub budget: Option<f64>,
    pub mean_ngoe: Option<f64>,
    pub se_ngoe: Option<f64>,
    pub query_rate: Option<f64>,
    pub avg_cost: Option<f64>,
    /// Stationary-analysis counterpart of `mean_ngoe`.
    pub analytical_ngoe: Option<f64>,
    /// Exact long-run cost of the solved policy.
    pub exact_cost: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub n_slots: u64,
    pub config_hash: String,
    pub warning: Option<String>,
}

/// Sweep settings derived from the experiment block.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
    pub c0_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub n_slots: u64,
}

impl SweepSpec {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let e = &cfg.experiment;
        Self {
            rates: e.rates.clone(),
            c0_grid: e.sweep_c0.clone(),
            replications: e.replications,
            seed: e.seed,
            n_slots: e.n_slots,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Cmdp(Variant),
    Baseline(BaselineKind),
}

impl Job {
    fn all() -> Vec<Job> {
        Variant::ALL
            .into_iter()
            .map(Job::Cmdp)
            .chain(BaselineKind::ALL.into_iter().map(Job::Baseline))
            .collect()
    }

    fn label(self) -> &'static str {
        match self {
            Job::Cmdp(v) => v.label(),
            Job::Baseline(b) => b.label(),
        }
    }
}

fn sweep_point(
    cfg: &RunConfig,
    spec: &SweepSpec,
    hash: &str,
    c0: f64,
    q: f64,
    job: Job,
) -> Result<ResultRow> {
    let mut row = ResultRow {
        policy: job.label().to_string(),
        rate: q,
        c0,
        budget: None,
        mean_ngoe: None,
        se_ngoe: None,
        query_rate: None,
        avg_cost: None,
        analytical_ngoe: None,
        exact_cost: None,
        replications: spec.replications,
        seed: spec.seed,
        n_slots: spec.n_slots,
        config_hash: hash.to_string(),
        warning: None,
    };
    let sim = cfg.sim_config(c0, spec.n_slots, spec.seed)?;
    let summaries = match job {
        Job::Cmdp(variant) => {
            let model = cfg.model.build_with_c0(c0)?;
            let budget = q * c0;
            let outcome = solve_variant(&model, variant, budget, cfg)?;
            row.budget = Some(budget);
            row.exact_cost = Some(crate::solver::average_cost(&model, &outcome.policy)?);
            row.analytical_ngoe = Some(analytical_ngoe(&model, &outcome.policy, &sim.goe)?);
            row.warning = outcome.warning.clone();
            let kind = state_policy_kind(&model, &outcome.policy);
            replicate(
                &sim,
                |seed| QueryController::new(kind.clone(), seed),
                spec.replications,
            )?
        }
        Job::Baseline(kind) => match baseline_kind(kind, q) {
            Ok(k) => replicate(
                &sim,
                |seed| QueryController::new(k.clone(), seed),
                spec.replications,
            )?,
            Err(e) => {
                log::warn!("skipping {} at rate {q}: {e}", kind.label());
                row.warning = Some(e.to_string());
                return Ok(row);
            }
        },
    };
    let ngoe: Vec<f64> = summaries.iter().map(|s| s.avg_ngoe).collect();
    let (mean, se) = mean_se(&ngoe);
    row.mean_ngoe = Some(mean);
    row.se_ngoe = Some(se);
    row.query_rate = Some(mean_se(&summaries.iter().map(|s| s.query_rate).collect::<Vec<_>>()).0);
    row.avg_cost = Some(mean_se(&summaries.iter().map(|s| s.avg_cost).collect::<Vec<_>>()).0);
    Ok(row)
}

/// Rows for every `(c0, rate, policy)` in grid order.
pub fn rate_sweep(cfg: &RunConfig, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    let hash = config_hash(cfg);
    let jobs: Vec<(f64, f64, Job)> = spec
        .c0_grid
        .iter()
        .flat_map(|&c0| {
            spec.rates
                .iter()
                .flat_map(move |&q| Job::all().into_iter().map(move |j| (c0, q, j)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(c0, q, job)| sweep_point(cfg, spec, &hash, c0, q, job))
        .collect()
}

pub fn rows_csv(rows: &[ResultRow]) -> Result<String> {
    write_csv(rows)
}

/// Inner-loop traces of the solver for several cost coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub c0: Vec<f64>,
    /// Gain estimate per sweep of the inner solve at the final multiplier.
    pub gains: Vec<Vec<f64>>,
    /// Span of successive value differences for the same sweeps.
    pub spans: Vec<Vec<f64>>,
    /// Sweeps over all multipliers evaluated.
    pub total_sweeps: Vec<usize>,
    pub mu_final: Vec<f64>,
}

impl ConvergenceTrace {
    /// `iteration,c0=<c>...` with blank cells once a series has ended.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration");
        for c in &self.c0 {
            out.push_str(&format!(",c0={}", c0_tag(*c)));
        }
        out.push('\n');
        let len = self.gains.iter().map(Vec::len).max().unwrap_or(0);
        for t in 0..len {
            out.push_str(&(t + 1).to_string());
            for g in &self.gains {
                out.push(',');
                if let Some(x) = g.get(t) {
                    out.push_str(&x.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("c0,mu_final,final_sweeps,total_sweeps\n");
        for i in 0..self.c0.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.c0[i],
                self.mu_final[i],
                self.gains[i].len(),
                self.total_sweeps[i]
            ));
        }
        out
    }
}

pub fn convergence_trace(cfg: &RunConfig, c0_grid: &[f64]) -> Result<ConvergenceTrace> {
    let outcomes: Vec<SolveOutcome> = c0_grid
        .par_iter()
        .map(|&c0| solve(&cfg.model.build_with_c0(c0)?, cfg.model.c_max, &cfg.solver))
        .collect::<Result<_>>()?;
    let mut trace = ConvergenceTrace {
        c0: c0_grid.to_vec(),
        gains: Vec::new(),
        spans: Vec::new(),
        total_sweeps: Vec::new(),
        mu_final: Vec::new(),
    };
    for o in outcomes {
        let last = o
            .gain_traces
            .last()
            .expect("every solve evaluates at least one multiplier");
        trace.gains.push(last.gains.clone());
        trace.spans.push(last.spans.clone());
        trace
            .total_sweeps
            .push(o.inner_iteration_counts.iter().sum());
        trace.mu_final.push(last.mu);
    }
    Ok(trace)
}

/// Threshold structure of one solved cost coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub c0: f64,
    pub outcome: SolveOutcome,
    pub minus: Extraction,
    pub plus: Option<Extraction>,
    /// Age-by-level table of the bracket policy with the larger mixing
    /// weight.
    pub csv: String,
}

impl ThresholdReport {
    /// Extraction for the rendered (dominant) bracket policy.
    pub fn dominant(&self) -> &Extraction {
        match (&self.plus, self.outcome.eta_used) {
            (Some(plus), Some(eta)) if eta < 0.5 => plus,
            _ => &self.minus,
        }
    }
}

pub fn threshold_report(cfg: &RunConfig, c0: f64, c_max: f64) -> Result<ThresholdReport> {
    let model = cfg.model.build_with_c0(c0)?;
    let outcome = solve(&model, c_max, &cfg.solver)?;
    let space = model.space();
    let minus = extract_threshold_table(&outcome.policy_minus, space)?;
    let plus = outcome
        .policy_plus
        .as_ref()
        .map(|p| extract_threshold_table(p, space))
        .transpose()?;
    let grid = policy_grid(outcome.dominant_policy(), space);
    let csv = render_action_grid(space.delta_max(), space.levels(), |d, l| {
        Action::from_pull(grid[d as usize - 1][l])
    });
    Ok(ThresholdReport {
        c0,
        outcome,
        minus,
        plus,
        csv,
    })
}

/// Runs one named experiment and returns its output documents.
pub fn run_experiment(kind: ExperimentKind, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let art = |file_name: String, contents: String| Artifact {
        file_name,
        contents,
    };
    Ok(match kind {
        ExperimentKind::Fig2 => vec![art("fig2_snapshot.csv".into(), fig2(cfg)?.to_csv())],
        ExperimentKind::Fig3 => {
            let cmp = fig3(cfg)?;
            vec![
                art("fig3_cdf.csv".into(), cmp.cdf_csv()),
                art("fig3_summary.csv".into(), cmp.summary_csv()?),
            ]
        }
        ExperimentKind::Fig4 => {
            let spec = SweepSpec::from_config(cfg);
            let rows = rate_sweep(cfg, &spec)?;
            spec.c0_grid
                .iter()
                .map(|&c0| {
                    let subset: Vec<ResultRow> =
                        rows.iter().filter(|r| r.c0 == c0).cloned().collect();
                    Ok(art(
                        format!("fig4_sweep_c{}.csv", c0_tag(c0)),
                        rows_csv(&subset)?,
                    ))
                })
                .collect::<Result<_>>()?
        }
        ExperimentKind::Fig5 => {
            let t = convergence_trace(cfg, &cfg.experiment.convergence_c0)?;
            vec![
                art("fig5_convergence.csv".into(), t.to_csv()),
                art("fig5_iterations.csv".into(), t.summary_csv()),
            ]
        }
        ExperimentKind::Table1 => cfg
            .experiment
            .table_c0
            .par_iter()
            .map(|&c0| {
                let r = threshold_report(cfg, c0, cfg.model.c_max)?;
                Ok(art(format!("table1_thresholds_c{}.csv", c0_tag(c0)), r.csv))
            })
            .collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::relative_value_iteration;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.experiment.replications = 3;
        cfg.experiment.cdf_replications = 4;
        cfg.experiment.n_slots = 200;
        cfg.experiment.rates = vec![0.3, 0.8];
        cfg.experiment.sweep_c0 = vec![0.5];
        cfg
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = small();
        let mut b = small();
        b.output_dir = "elsewhere".into();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.experiment.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn snapshot_shapes() {
        let cfg = small();
        let s = fig2(&cfg).unwrap();
        assert_eq!(s.labels, vec!["effect_aware", "periodic"]);
        assert!(s.series.iter().all(|x| x.len() == 50));
        assert_eq!(s.to_csv().lines().count(), 51);

        let p = ControllerKind::Periodic { period: 7 };
        let same = snapshot(
            &cfg,
            0.5,
            50,
            9,
            vec![("a".into(), p.clone()), ("b".into(), p)],
        )
        .unwrap();
        assert_eq!(same.series[0], same.series[1]);

        let silent = ControllerKind::Binomial { rate: 0.0 };
        let lit = RunConfig {
            model: crate::config::ModelBlock {
                eval_goe: Some(GoeConfig::literal_ngoe()),
                ..Default::default()
            },
            ..small()
        };
        let s = snapshot(&lit, 0.5, 50, 1, vec![("never".into(), silent)]).unwrap();
        assert!(s.series[0]
            .iter()
            .all(|&(a, g)| a == Action::Silent && g == 1.0));
    }

    #[test]
    fn cdf_comparison_outputs() {
        let cmp = fig3(&small()).unwrap();
        assert_eq!(cmp.runs.len(), 4);
        assert_eq!(cmp.cdf_csv().lines().count(), 5);
        let summary = cmp.summary_csv().unwrap();
        assert!(summary.starts_with("policy,mean_ngoe"));
        assert!(cmp.gain_pct("binomial").is_some());
        assert!(cmp.gain_pct("nope").is_none());
    }

    #[test]
    fn sweep_rows_and_budgets() {
        let cfg = small();
        let spec = SweepSpec::from_config(&cfg);
        let rows = rate_sweep(&cfg, &spec).unwrap();
        assert_eq!(rows.len(), 2 * 6);
        for r in rows.iter().filter(|r| r.policy == "effect_aware") {
            assert!(r.exact_cost.unwrap() <= r.rate * r.c0 + 1e-6);
            assert!(r.se_ngoe.unwrap() >= 0.0);
        }
        assert_eq!(rows[0].policy, "effect_aware");
        assert_eq!(rows[0].rate, 0.3);
        assert!(rows.iter().all(|r| r.config_hash == config_hash(&cfg)));
    }

    #[test]
    fn infeasible_markovian_is_a_warning_row() {
        let mut cfg = small();
        cfg.experiment.rates = vec![0.01];
        let rows = rate_sweep(&cfg, &SweepSpec::from_config(&cfg)).unwrap();
        let m = rows.iter().find(|r| r.policy == "markovian").unwrap();
        assert!(m.mean_ngoe.is_none());
        assert!(m.warning.as_deref().unwrap().contains("feasible range"));
    }

    #[test]
    fn convergence_outputs() {
        let cfg = small();
        let t = convergence_trace(&cfg, &[0.1, 0.5, 1.0]).unwrap();
        assert!(t.gains.iter().all(|g| !g.is_empty()));
        assert!(t.to_csv().starts_with("iteration,c0=0.1,c0=0.5,c0=1\n"));
        assert_eq!(t.summary_csv().lines().count(), 4);
    }

    #[test]
    fn gain_series_shrink_with_cost_at_equal_multiplier() {
        let cfg = small();
        let mu = 0.7;
        let traces: Vec<Vec<f64>> = [0.1, 0.5, 1.0]
            .iter()
            .map(|&c0| {
                let m = cfg.model.build_with_c0(c0).unwrap();
                relative_value_iteration(&m, mu, &cfg.solver)
                    .unwrap()
                    .gain_trace
            })
            .collect();
        for w in traces.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(b <= &(a + 1e-12), "{b} > {a}");
            }
        }
    }

    #[test]
    fn threshold_report_on_loose_budget() {
        let cfg = small();
        let r = threshold_report(&cfg, 0.5, 0.5).unwrap();
        assert!(r.outcome.early_exit);
        assert!(r.plus.is_none());
        assert_eq!(r.csv.lines().count(), 11);
        assert!(matches!(r.dominant(), Extraction::Threshold(_)));
    }

    #[test]
    fn experiments_are_reproducible() {
        let cfg = small();
        for kind in ExperimentKind::ALL {
            let a = run_experiment(kind, &cfg).unwrap();
            let b = run_experiment(kind, &cfg).unwrap();
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn mean_se_examples() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
