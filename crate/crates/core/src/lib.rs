//! Effect-aware query control for pull-based status updating.
//!
//! An actuation agent decides in every slot whether to pull an update from a
//! sensing agent. Updates carry an importance level that evolves as a Markov
//! chain and arrive over a lossy channel. The crate builds the constrained
//! MDP over (age, importance) states, solves it with a Lagrangian
//! relative-value-iteration scheme, turns the result into threshold tables,
//! and compares it against time-driven baselines in a slotted simulator.

pub mod action;
pub mod config;
pub mod error;
pub mod experiments;
pub mod importance;
mod linalg;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod solver;

pub use action::Action;
pub use error::{Error, Result};
pub use importance::{ChainSpec, ImportanceChain, ImportanceLevels};
pub use metrics::{CostModel, GoeConfig};
pub use model::{CmdpModel, ConstrainedMdp, RewardMode, State, StateSpace};
pub use solver::{SolveOutcome, SolverConfig, StationaryPolicy};
