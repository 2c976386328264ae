//! Lagrangian solver for the constrained MDP.
//!
//! The inner loop runs relative value iteration at a fixed multiplier `mu`.
//! The outer loop bisects on `mu` until the two bracket policies (one over
//! budget, one under) are within `eps_mu`, then mixes them so the long-run
//! cost meets the budget.

mod analysis;
mod rvi;

pub use analysis::{
    average_cost, average_reward, average_reward_cost, induced_kernel, limiting_distribution,
    per_state_reward_cost, policy_stationary_distribution, recurrent_classes, INITIAL_STATE,
};
pub use rvi::{
    greedy_policy, relative_value_iteration, sweep_work, InnerSolve, ValueFunction,
    REFERENCE_STATE, TIE_TOL,
};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConstrainedMdp;

/// Largest factor by which an automatic `mu_hi` is grown.
const MU_HI_GROWTH_CAP: f64 = (1u64 << 20) as f64;

/// How the mixing weight between the two bracket policies is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Use this weight on the over-budget policy.
    Fixed(f64),
    /// Solve for the weight at which the average cost equals the budget.
    CostMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eps_v: f64,
    pub eps_mu: f64,
    pub mu_lo: f64,
    /// Initial upper multiplier; derived from the model when `None`.
    pub mu_hi: Option<f64>,
    pub eta_mode: EtaMode,
    pub max_inner_iters: usize,
    pub max_outer_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_v: 1e-3,
            eps_mu: 1e-3,
            mu_lo: 0.0,
            mu_hi: None,
            eta_mode: EtaMode::CostMatched,
            max_inner_iters: 100_000,
            max_outer_steps: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_v > 0.0 && self.eps_mu > 0.0) {
            return Err(Error::invalid("eps_v and eps_mu must be > 0"));
        }
        if self.mu_lo.is_nan() || self.mu_lo < 0.0 {
            return Err(Error::invalid("mu_lo must be >= 0"));
        }
        if let Some(hi) = self.mu_hi {
            if hi.is_nan() || hi <= self.mu_lo {
                return Err(Error::invalid(format!(
                    "mu_hi ({hi}) must exceed mu_lo ({})",
                    self.mu_lo
                )));
            }
        }
        if let EtaMode::Fixed(eta) = self.eta_mode {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
            }
        }
        if self.max_inner_iters == 0 || self.max_outer_steps == 0 {
            return Err(Error::invalid("iteration caps must be positive"));
        }
        Ok(())
    }
}

/// Pull probability per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryPolicy {
    pull: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(pull: Vec<f64>) -> Result<Self> {
        if let Some((s, p)) = pull
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::invalid(format!(
                "pull probability {p} in state {s} outside [0, 1]"
            )));
        }
        Ok(Self { pull })
    }

    pub fn always(n: usize) -> Self {
        Self { pull: vec![1.0; n] }
    }

    pub fn never(n: usize) -> Self {
        Self { pull: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.pull.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pull.is_empty()
    }

    pub fn pull_prob(&self, state: usize) -> f64 {
        self.pull[state]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pull
    }

    pub fn is_deterministic(&self) -> bool {
        self.pull.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Per-state `eta * minus + (1 - eta) * plus`.
    pub fn convex(minus: &Self, plus: &Self, eta: f64) -> Self {
        let pull = minus
            .pull
            .iter()
            .zip(&plus.pull)
            .map(|(&a, &b)| {
                if eta == 1.0 {
                    a
                } else if eta == 0.0 {
                    b
                } else {
                    (eta * a + (1.0 - eta) * b).clamp(0.0, 1.0)
                }
            })
            .collect();
        Self { pull }
    }
}

/// Inner-loop gain trace for one multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTrace {
    pub mu: f64,
    pub gains: Vec<f64>,
    pub spans: Vec<f64>,
}

/// One bisection step, recorded after the bracket update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub mu: f64,
    pub cost: f64,
    pub inner_iterations: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub cost_lo: f64,
    pub cost_hi: f64,
}

/// Result of the mixing step.
#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub policy: StationaryPolicy,
    pub eta: f64,
    pub cost: f64,
    /// Set when the cost-matched root was not bracketed.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub budget: f64,
    /// Last multiplier evaluated by the outer loop (0 on early exit).
    pub mu_star: f64,
    pub mu_minus: f64,
    pub mu_plus: Option<f64>,
    pub policy: StationaryPolicy,
    pub policy_minus: StationaryPolicy,
    pub policy_plus: Option<StationaryPolicy>,
    pub eta_used: Option<f64>,
    pub early_exit: bool,
    /// Number of times `mu_hi` was doubled before the bracket held.
    pub bracket_expansions: usize,
    /// `mu_hi - mu_lo` when the bracket was first established.
    pub initial_bracket_width: Option<f64>,
    pub steps: Vec<BisectionStep>,
    pub inner_iteration_counts: Vec<usize>,
    pub gain_traces: Vec<GainTrace>,
    pub achieved_cost: f64,
    pub achieved_reward: f64,
    pub warning: Option<String>,
}

impl SolveOutcome {
    /// Gain estimates of every inner sweep, in execution order.
    pub fn value_trace(&self) -> Vec<f64> {
        self.gain_traces
            .iter()
            .flat_map(|t| t.gains.iter().copied())
            .collect()
    }

    /// The deterministic bracket policy carrying the larger mixing weight.
    pub fn dominant_policy(&self) -> &StationaryPolicy {
        match (&self.policy_plus, self.eta_used) {
            (Some(plus), Some(eta)) if eta < 0.5 => plus,
            _ => &self.policy_minus,
        }
    }
}

struct Evaluated {
    mu: f64,
    policy: StationaryPolicy,
    cost: f64,
    iterations: usize,
}

struct Run<'a, M> {
    model: &'a M,
    cfg: &'a SolverConfig,
    traces: Vec<GainTrace>,
    counts: Vec<usize>,
}

impl<M: ConstrainedMdp> Run<'_, M> {
    fn evaluate(&mut self, mu: f64) -> Result<Evaluated> {
        let inner = relative_value_iteration(self.model, mu, self.cfg)?;
        let cost = average_cost(self.model, &inner.policy)?;
        self.counts.push(inner.iterations);
        self.traces.push(GainTrace {
            mu,
            gains: inner.gain_trace,
            spans: inner.span_trace,
        });
        Ok(Evaluated {
            mu,
            policy: inner.policy,
            cost,
            iterations: inner.iterations,
        })
    }
}

/// Whether a policy with average cost `cost` sits on the feasible side.
fn under_budget(cost: f64, budget: f64) -> bool {
    cost < budget || cost <= 0.0
}

/// Mixes two bracket policies: `eta` weights the over-budget one.
pub fn mix<M: ConstrainedMdp>(
    pi_minus: &StationaryPolicy,
    pi_plus: &StationaryPolicy,
    model: &M,
    budget: f64,
    eta_mode: EtaMode,
) -> Result<MixOutcome> {
    let cost_at = |eta: f64| average_cost(model, &StationaryPolicy::convex(pi_minus, pi_plus, eta));
    match eta_mode {
        EtaMode::Fixed(eta) => {
            let policy = StationaryPolicy::convex(pi_minus, pi_plus, eta);
            let cost = average_cost(model, &policy)?;
            let warning = (cost > budget + 1e-9)
                .then(|| format!("fixed eta {eta} gives cost {cost} above budget {budget}"));
            Ok(MixOutcome {
                policy,
                eta,
                cost,
                warning,
            })
        }
        EtaMode::CostMatched => {
            let (c0, c1) = (cost_at(0.0)?, cost_at(1.0)?);
            if !(c0 <= budget && budget <= c1) {
                // Endpoint closest to the budget from below, else the cheapest.
                let below: Vec<(f64, f64)> = [(0.0, c0), (1.0, c1)]
                    .into_iter()
                    .filter(|&(_, c)| c <= budget)
                    .collect();
                let (eta, cost) = below
                    .into_iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap_or(if c0 <= c1 { (0.0, c0) } else { (1.0, c1) });
                let msg = format!("cost-matched mixing not bracketed: endpoint costs {c0} (plus), {c1} (minus), budget {budget}");
                warn!("{msg}");
                return Ok(MixOutcome {
                    policy: StationaryPolicy::convex(pi_minus, pi_plus, eta),
                    eta,
                    cost,
                    warning: Some(msg),
                });
            }
            let (mut lo, mut hi, mut cost_lo) = (0.0f64, 1.0f64, c0);
            for _ in 0..100 {
                if hi - lo <= 1e-15 || (budget - cost_lo).abs() <= 1e-12 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let c = cost_at(mid)?;
                if c <= budget {
                    lo = mid;
                    cost_lo = c;
                } else {
                    hi = mid;
                }
            }
            Ok(MixOutcome {
                policy: StationaryPolicy::convex(pi_minus, pi_plus, lo),
                eta: lo,
                cost: cost_lo,
                warning: None,
            })
        }
    }
}

/// Bisection on the multiplier followed by mixing of the bracket policies.
pub fn bisect_multiplier<M: ConstrainedMdp>(
    model: &M,
    budget: f64,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::invalid(format!(
            "budget must be finite and >= 0, got {budget}"
        )));
    }
    let mut run = Run {
        model,
        cfg,
        traces: Vec::new(),
        counts: Vec::new(),
    };

    let first = run.evaluate(cfg.mu_lo)?;
    if first.cost <= budget {
        let achieved_reward = average_reward(model, &first.policy)?;
        return Ok(SolveOutcome {
            budget,
            mu_star: first.mu,
            mu_minus: first.mu,
            mu_plus: None,
            policy: first.policy.clone(),
            policy_minus: first.policy,
            policy_plus: None,
            eta_used: None,
            early_exit: true,
            bracket_expansions: 0,
            initial_bracket_width: None,
            steps: Vec::new(),
            inner_iteration_counts: run.counts,
            gain_traces: run.traces,
            achieved_cost: first.cost,
            achieved_reward,
            warning: None,
        });
    }

    let mut lo = first;
    let auto = cfg.mu_hi.is_none();
    let start_hi = cfg.mu_hi.unwrap_or_else(|| {
        let c = model.max_action_cost();
        let r = model.max_abs_reward().max(1e-12);
        if c > 0.0 {
            cfg.mu_lo + 8.0 * r / c
        } else {
            cfg.mu_lo + 8.0 * r
        }
    });
    let mut hi = run.evaluate(start_hi)?;
    let mut expansions = 0;
    while !under_budget(hi.cost, budget) {
        if !auto {
            return Err(Error::Bracket {
                mu_hi: hi.mu,
                cost: hi.cost,
                budget,
            });
        }
        if hi.mu >= start_hi * MU_HI_GROWTH_CAP {
            return Err(Error::Infeasible {
                budget,
                floor: hi.cost,
                mu: hi.mu,
            });
        }
        expansions += 1;
        let next = run.evaluate(hi.mu * 2.0)?;
        lo = std::mem::replace(&mut hi, next);
    }
    let initial_width = hi.mu - lo.mu;

    let mut steps = Vec::new();
    let mut mu_star = hi.mu;
    while hi.mu - lo.mu > cfg.eps_mu {
        if steps.len() >= cfg.max_outer_steps {
            return Err(Error::NonConvergence {
                iterations: steps.len(),
                span: hi.mu - lo.mu,
            });
        }
        let mid = run.evaluate(0.5 * (lo.mu + hi.mu))?;
        mu_star = mid.mu;
        let (mu, cost, iterations) = (mid.mu, mid.cost, mid.iterations);
        if under_budget(mid.cost, budget) {
            hi = mid;
        } else {
            lo = mid;
        }
        steps.push(BisectionStep {
            mu,
            cost,
            inner_iterations: iterations,
            mu_lo: lo.mu,
            mu_hi: hi.mu,
            cost_lo: lo.cost,
            cost_hi: hi.cost,
        });
    }

    let mixed = mix(&lo.policy, &hi.policy, model, budget, cfg.eta_mode)?;
    let (achieved_reward, achieved_cost) = average_reward_cost(model, &mixed.policy)?;
    Ok(SolveOutcome {
        budget,
        mu_star,
        mu_minus: lo.mu,
        mu_plus: Some(hi.mu),
        policy: mixed.policy,
        policy_minus: lo.policy,
        policy_plus: Some(hi.policy),
        eta_used: Some(mixed.eta),
        early_exit: false,
        bracket_expansions: expansions,
        initial_bracket_width: Some(initial_width),
        steps,
        inner_iteration_counts: run.counts,
        gain_traces: run.traces,
        achieved_cost,
        achieved_reward,
        warning: mixed.warning,
    })
}

/// Solves the constrained problem for budget `c_max`.
pub fn solve<M: ConstrainedMdp>(model: &M, c_max: f64, cfg: &SolverConfig) -> Result<SolveOutcome> {
    bisect_multiplier(model, c_max, cfg)
}
