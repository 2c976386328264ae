//! Serialized solve results. The same document serves as the policy file a
//! later `simulate` run loads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::{format_level, ImportanceLevels};
use crate::model::{CmdpModel, State, StateSpace};
use crate::policies::ControllerKind;
use crate::solver::{BisectionStep, SolveOutcome, StationaryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub c0: f64,
    pub budget: f64,
    pub delta_max: u32,
    pub levels: Vec<f64>,
    pub mu_star: f64,
    pub mu_minus: f64,
    pub mu_plus: Option<f64>,
    pub eta: Option<f64>,
    pub early_exit: bool,
    pub achieved_cost: f64,
    pub achieved_reward: f64,
    /// Pull probability per state, age-major.
    pub policy: Vec<f64>,
    pub policy_minus: Vec<f64>,
    pub policy_plus: Option<Vec<f64>>,
    /// Rows are ages `1..=delta_max`; cells are `pull`, `silent`, or the
    /// pull probability of a randomized state.
    pub action_table: Vec<Vec<String>>,
    #[serde(default)]
    pub steps: Vec<BisectionStep>,
    #[serde(default)]
    pub inner_iterations: Vec<usize>,
    /// Gain estimate of every inner sweep, in execution order.
    #[serde(default)]
    pub gain_trace: Vec<f64>,
    #[serde(default)]
    pub warning: Option<String>,
}

fn cell(p: f64) -> String {
    if p >= 1.0 {
        "pull".to_string()
    } else if p <= 0.0 {
        "silent".to_string()
    } else {
        format!("{p:.6}")
    }
}

impl SolveReport {
    pub fn from_outcome(model: &CmdpModel, out: &SolveOutcome) -> Self {
        let space = model.space();
        let action_table = (1..=space.delta_max())
            .map(|delta| {
                (0..space.num_levels())
                    .map(|level| cell(out.policy.pull_prob(space.index(State { delta, level }))))
                    .collect()
            })
            .collect();
        Self {
            c0: model.cost_model().c0,
            budget: out.budget,
            delta_max: space.delta_max(),
            levels: space.levels().as_slice().to_vec(),
            mu_star: out.mu_star,
            mu_minus: out.mu_minus,
            mu_plus: out.mu_plus,
            eta: out.eta_used,
            early_exit: out.early_exit,
            achieved_cost: out.achieved_cost,
            achieved_reward: out.achieved_reward,
            policy: out.policy.as_slice().to_vec(),
            policy_minus: out.policy_minus.as_slice().to_vec(),
            policy_plus: out.policy_plus.as_ref().map(|p| p.as_slice().to_vec()),
            action_table,
            steps: out.steps.clone(),
            inner_iterations: out.inner_iteration_counts.clone(),
            gain_trace: out.value_trace(),
            warning: out.warning.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields serialize")
    }

    /// Parses a report and checks that its policy is consistent with its
    /// state space.
    pub fn parse(text: &str) -> Result<Self> {
        let report: SolveReport =
            serde_json::from_str(text).map_err(|e| Error::config("policy_file", e.to_string()))?;
        report.state_space()?;
        let n = report.delta_max as usize * report.levels.len();
        let policies = [
            Some(&report.policy),
            Some(&report.policy_minus),
            report.policy_plus.as_ref(),
        ];
        for p in policies.into_iter().flatten() {
            if p.len() != n {
                return Err(Error::config(
                    "policy_file.policy",
                    format!("expected {n} entries, found {}", p.len()),
                ));
            }
            StationaryPolicy::new(p.clone())
                .map_err(|e| Error::config("policy_file.policy", e.to_string()))?;
        }
        Ok(report)
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        let levels = ImportanceLevels::new(self.levels.clone())
            .map_err(|e| Error::config("policy_file.levels", e.to_string()))?;
        StateSpace::new(self.delta_max, levels)
            .map_err(|e| Error::config("policy_file.delta_max", e.to_string()))
    }

    pub fn stationary_policy(&self) -> Result<StationaryPolicy> {
        StationaryPolicy::new(self.policy.clone())
    }

    /// Controller following the stored (possibly mixed) policy.
    pub fn controller_kind(&self) -> Result<ControllerKind> {
        Ok(ControllerKind::StatePolicy {
            policy: self.stationary_policy()?,
            space: self.state_space()?,
        })
    }

    /// Plain-text action table with level headers.
    pub fn render_table(&self) -> String {
        let mut out = String::from("delta");
        for &v in &self.levels {
            out.push('\t');
            out.push_str(&format_level(v));
        }
        out.push('\n');
        for (i, row) in self.action_table.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for c in row {
                out.push('\t');
                out.push_str(c);
            }
            out.push('\n');
        }
        out
    }
}
