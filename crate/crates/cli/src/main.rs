//! `effquery` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 numerical
//! failure (non-convergence, infeasible budget, multichain policy), 4 I/O.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use effquery::Error;

#[derive(Debug, Parser)]
#[command(
    name = "effquery",
    version,
    about = "Effect-aware query control for pull-based status updates"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Validate the configuration and referenced input files, then exit.
    #[arg(long, global = true)]
    pub validate_only: bool,
    /// Worker threads; 1 runs everything serially. Defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides `simulation.seed` and `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `model.c0`.
    #[arg(long, global = true)]
    pub c0: Option<f64>,
    /// Overrides `model.c_max`.
    #[arg(long, global = true)]
    pub c_max: Option<f64>,
    /// Overrides `simulation.n_slots` and `experiment.n_slots`.
    #[arg(long, global = true)]
    pub n_slots: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Also write an SVG plot next to every experiment CSV.
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the constrained problem and write `solve.json`.
    Solve {
        /// JSON config; omitted fields take their defaults.
        config: Option<PathBuf>,
    },
    /// Simulate the configured controller and write `simulate_summary.csv`.
    Simulate {
        config: Option<PathBuf>,
        /// Follow a policy file written by `solve` instead of the configured controller.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also write the per-slot trace of the first replication.
        #[arg(long)]
        trace: bool,
    },
    /// Run an experiment: fig2, fig3, fig4, fig5, table1 or all.
    Experiment {
        config: Option<PathBuf>,
        /// Defaults to `experiment.which` from the config.
        #[arg(long, short)]
        which: Option<String>,
    },
    /// Solve and print the threshold structure of the bracket policies.
    Thresholds { config: Option<PathBuf> },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Solve { config } => commands::solve(config.as_deref(), &cli.global),
        Command::Simulate {
            config,
            policy,
            trace,
        } => commands::simulate(config.as_deref(), policy.as_deref(), *trace, &cli.global),
        Command::Experiment { config, which } => {
            commands::experiment(config.as_deref(), which.as_deref(), &cli.global)
        }
        Command::Thresholds { config } => commands::thresholds(config.as_deref(), &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
