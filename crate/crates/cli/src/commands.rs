//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use effquery::config::{ControllerSpec, ExperimentKind, RunConfig};
use effquery::experiments::{
    c0_tag, run_experiment, state_policy_kind, threshold_report, Artifact,
};
use effquery::policies::{
    baseline_kind, periodic_period, special_case_policy, BaselineKind, ControllerKind, Extraction,
    QueryController, SpecialCase, ThresholdTable,
};
use effquery::report::SolveReport;
use effquery::simulator::{replicate, run, summary_csv, trace_csv};
use effquery::{CmdpModel, Error, Result, SolveOutcome};

use crate::{plot, GlobalArgs};

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Reads a user-supplied input file. A missing or unreadable input is a
/// configuration problem, not an output failure.
fn read_input(path: &Path, field: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| config_error(field, format!("cannot read {}: {e}", path.display())))
}

/// Loads the config, applies flag overrides and validates every block.
fn load(path: Option<&Path>, args: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_json(&read_input(p, "config")?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
        cfg.experiment.seed = seed;
    }
    if let Some(c0) = args.c0 {
        cfg.model.c0 = c0;
    }
    if let Some(c_max) = args.c_max {
        cfg.model.c_max = c_max;
    }
    if let Some(n) = args.n_slots {
        cfg.simulation.n_slots = n;
        cfg.experiment.n_slots = n;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    let problems = cfg.diagnostics();
    for p in problems.iter().skip(1) {
        eprintln!("error: {p}");
    }
    match problems.into_iter().next() {
        Some(first) => Err(first),
        None => Ok(cfg),
    }
}

/// `println!` that ignores a closed stdout pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// `print!` that ignores a closed stdout pipe.
macro_rules! put {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn warn_outcome(out: &SolveOutcome) {
    if let Some(w) = &out.warning {
        log::warn!("{w}");
    }
}

pub fn solve(config: Option<&Path>, args: &GlobalArgs) -> Result<()> {
    let cfg = load(config, args)?;
    if args.validate_only {
        say!("config ok");
        return Ok(());
    }
    let model = cfg.model.build()?;
    let out = effquery::solver::solve(&model, cfg.model.c_max, &cfg.solver)?;
    warn_outcome(&out);
    let report = SolveReport::from_outcome(&model, &out);
    let path = write_output(&cfg.output_dir, "solve.json", &report.to_json())?;
    say!(
        "mu* = {}  cost = {:.6}  reward = {:.6}  eta = {}",
        report.mu_star,
        report.achieved_cost,
        report.achieved_reward,
        report.eta.map_or("-".to_string(), |e| format!("{e:.6}"))
    );
    put!("{}", report.render_table());
    say!("wrote {}", path.display());
    Ok(())
}

/// Input-only view of the controller block, loaded without solving.
enum Prepared {
    Solve(Option<SpecialCase>),
    Ready(ControllerKind),
}

fn prepare(spec: &ControllerSpec, model: &CmdpModel) -> Result<Prepared> {
    Ok(match spec {
        ControllerSpec::EffectAware => Prepared::Solve(None),
        ControllerSpec::QaoiAware => Prepared::Solve(Some(SpecialCase::QaoiAware)),
        ControllerSpec::VoiAware => Prepared::Solve(Some(SpecialCase::VoiAware)),
        ControllerSpec::Periodic { rate, period } => Prepared::Ready(ControllerKind::Periodic {
            period: period.unwrap_or_else(|| periodic_period(rate.unwrap_or(1.0))),
        }),
        ControllerSpec::Binomial { rate } => {
            Prepared::Ready(baseline_kind(BaselineKind::Binomial, *rate)?)
        }
        ControllerSpec::Markovian { rate } => {
            Prepared::Ready(baseline_kind(BaselineKind::Markovian, *rate)?)
        }
        ControllerSpec::PolicyFile { path } => {
            let report = SolveReport::parse(&read_input(path, "controller.path")?)?;
            let space = report.state_space()?;
            let same_levels = space.num_levels() == model.space().num_levels()
                && space
                    .levels()
                    .as_slice()
                    .iter()
                    .zip(model.space().levels().as_slice())
                    .all(|(a, b)| (a - b).abs() < 1e-9);
            if space.delta_max() != model.space().delta_max() || !same_levels {
                return Err(config_error(
                    "controller.path",
                    format!(
                        "policy file state space does not match the model in {}",
                        path.display()
                    ),
                ));
            }
            Prepared::Ready(report.controller_kind()?)
        }
        ControllerSpec::ThresholdCsv { path } => {
            let table = ThresholdTable::from_csv(&read_input(path, "controller.path")?)?;
            if table.delta_max() != model.space().delta_max()
                || table.levels().len() != model.space().num_levels()
            {
                return Err(config_error(
                    "controller.path",
                    format!(
                        "threshold table shape does not match the model in {}",
                        path.display()
                    ),
                ));
            }
            Prepared::Ready(ControllerKind::Threshold(table))
        }
    })
}

fn controller_label(spec: &ControllerSpec) -> &'static str {
    match spec {
        ControllerSpec::EffectAware => "effect_aware",
        ControllerSpec::QaoiAware => "qaoi_aware",
        ControllerSpec::VoiAware => "voi_aware",
        ControllerSpec::Periodic { .. } => "periodic",
        ControllerSpec::Binomial { .. } => "binomial",
        ControllerSpec::Markovian { .. } => "markovian",
        ControllerSpec::PolicyFile { .. } => "policy_file",
        ControllerSpec::ThresholdCsv { .. } => "threshold_csv",
    }
}

pub fn simulate(
    config: Option<&Path>,
    policy: Option<&Path>,
    trace: bool,
    args: &GlobalArgs,
) -> Result<()> {
    let mut cfg = load(config, args)?;
    if let Some(p) = policy {
        cfg.controller = ControllerSpec::PolicyFile {
            path: p.to_path_buf(),
        };
    }
    let model = cfg.model.build()?;
    let prepared = prepare(&cfg.controller, &model)?;
    if args.validate_only {
        say!("config ok");
        return Ok(());
    }
    let kind = match prepared {
        Prepared::Ready(kind) => kind,
        Prepared::Solve(case) => {
            let out = match case {
                None => effquery::solver::solve(&model, cfg.model.c_max, &cfg.solver)?,
                Some(case) => special_case_policy(case, &model, cfg.model.c_max, &cfg.solver)?,
            };
            warn_outcome(&out);
            state_policy_kind(&model, &out.policy)
        }
    };
    let sim = cfg.sim_config(cfg.model.c0, cfg.simulation.n_slots, cfg.simulation.seed)?;
    let label = controller_label(&cfg.controller);
    let summaries = replicate(
        &sim,
        |seed| QueryController::new(kind.clone(), seed),
        cfg.simulation.replications,
    )?;
    let mut csv = String::new();
    for (i, s) in summaries.iter().enumerate() {
        let doc = summary_csv(label, s);
        let skip = if i == 0 { 0 } else { 1 };
        for line in doc.lines().skip(skip) {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    let path = write_output(&cfg.output_dir, "simulate_summary.csv", &csv)?;
    put!("{csv}");
    say!("wrote {}", path.display());
    if trace {
        let mut controller = QueryController::new(kind, sim.seed)?;
        let (_, records) = run(&sim, &mut controller, true)?;
        let path = write_output(
            &cfg.output_dir,
            "simulate_trace.csv",
            &trace_csv(&records.unwrap_or_default()),
        )?;
        say!("wrote {}", path.display());
    }
    Ok(())
}

fn experiment_kinds(which: Option<&str>, cfg: &RunConfig) -> Result<Vec<ExperimentKind>> {
    match (which, cfg.experiment.which) {
        (Some("all"), _) => Ok(ExperimentKind::ALL.to_vec()),
        (Some(name), _) => Ok(vec![ExperimentKind::parse(name)?]),
        (None, Some(kind)) => Ok(vec![kind]),
        (None, None) => Err(config_error(
            "experiment.which",
            "no experiment named; pass --which or set the field",
        )),
    }
}

pub fn experiment(config: Option<&Path>, which: Option<&str>, args: &GlobalArgs) -> Result<()> {
    let cfg = load(config, args)?;
    let kinds = experiment_kinds(which, &cfg)?;
    if args.validate_only {
        say!("config ok");
        return Ok(());
    }
    for kind in kinds {
        let artifacts = run_experiment(kind, &cfg)?;
        for Artifact {
            file_name,
            contents,
        } in &artifacts
        {
            let path = write_output(&cfg.output_dir, file_name, contents)?;
            say!("wrote {}", path.display());
            if args.plots {
                if let Some(svg) = plot::render(file_name, contents) {
                    let name = Path::new(file_name).with_extension("svg");
                    let path = write_output(&cfg.output_dir, &name.to_string_lossy(), &svg)?;
                    say!("wrote {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn describe(label: &str, e: &Extraction) {
    match e {
        Extraction::Threshold(t) => {
            let th: Vec<String> = t
                .delta_thresholds()
                .iter()
                .map(|d| d.map_or("never".to_string(), |x| x.to_string()))
                .collect();
            say!(
                "{label}: threshold policy; age threshold per level [{}]",
                th.join(", ")
            );
        }
        Extraction::NotThreshold(report) => say!("{label}: not a threshold policy\n{report}"),
    }
}

pub fn thresholds(config: Option<&Path>, args: &GlobalArgs) -> Result<()> {
    let cfg = load(config, args)?;
    if args.validate_only {
        say!("config ok");
        return Ok(());
    }
    let report = threshold_report(&cfg, cfg.model.c0, cfg.model.c_max)?;
    warn_outcome(&report.outcome);
    describe("pi-", &report.minus);
    if let Some(plus) = &report.plus {
        describe("pi+", plus);
    }
    put!("{}", report.csv);
    let name = format!("thresholds_c{}.csv", c0_tag(cfg.model.c0));
    let path = write_output(&cfg.output_dir, &name, &report.csv)?;
    say!("wrote {}", path.display());
    Ok(())
}
