//! Relative value iteration for the average-reward criterion.

use crate::action::Action;
use crate::error::{Error, Result};
use crate::model::ConstrainedMdp;

use super::{SolverConfig, StationaryPolicy};

/// Pull is chosen only if it beats silence by more than this.
pub const TIE_TOL: f64 = 1e-12;

/// Flat index of the state whose relative value is pinned to zero.
pub const REFERENCE_STATE: usize = 0;

/// Relative values and the gain estimate at convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub gain: f64,
}

/// Result of one inner solve at a fixed multiplier.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub mu: f64,
    pub value: ValueFunction,
    pub policy: StationaryPolicy,
    pub iterations: usize,
    /// Gain estimate after each sweep.
    pub gain_trace: Vec<f64>,
    /// `span(V_t - V_{t-1})` after each sweep.
    pub span_trace: Vec<f64>,
}

/// One Bellman sweep: returns the new (un-centered) values and the greedy policy.
pub(crate) fn bellman_sweep<M: ConstrainedMdp>(
    model: &M,
    mu: f64,
    values: &[f64],
    next: &mut [f64],
    policy: &mut [f64],
) {
    for s in 0..model.num_states() {
        let q = Action::ALL.map(|a| {
            model
                .successors(s, a)
                .iter()
                .map(|&(n, p)| p * (model.net_reward(s, a, n, mu) + values[n]))
                .sum::<f64>()
        });
        let pull = q[1] > q[0] + TIE_TOL;
        next[s] = if pull { q[1] } else { q[0] };
        policy[s] = if pull { 1.0 } else { 0.0 };
    }
}

/// Multiply-adds of one sweep (every successor of both actions, every state).
pub fn sweep_work<M: ConstrainedMdp>(model: &M) -> usize {
    (0..model.num_states())
        .map(|s| {
            Action::ALL
                .iter()
                .map(|&a| model.successors(s, a).len())
                .sum::<usize>()
        })
        .sum()
}

fn span(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Undiscounted value iteration, re-centered at [`REFERENCE_STATE`] each
/// sweep, stopping once `span(V_t - V_{t-1}) <= eps_v`.
pub fn relative_value_iteration<M: ConstrainedMdp>(
    model: &M,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<InnerSolve> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!(
            "multiplier must be finite and >= 0, got {mu}"
        )));
    }
    let n = model.num_states();
    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0.0; n];
    let mut gain_trace = Vec::new();
    let mut span_trace = Vec::new();

    let mut last_span = f64::INFINITY;
    for t in 1..=cfg.max_inner_iters {
        bellman_sweep(model, mu, &values, &mut next, &mut policy);
        let diff: Vec<f64> = next.iter().zip(&values).map(|(a, b)| a - b).collect();
        let (lo, hi) = span(&diff);
        let gain = 0.5 * (lo + hi);
        last_span = hi - lo;
        gain_trace.push(gain);
        span_trace.push(last_span);

        let reference = next[REFERENCE_STATE];
        for (v, x) in values.iter_mut().zip(&next) {
            *v = x - reference;
        }
        if last_span <= cfg.eps_v {
            return Ok(InnerSolve {
                mu,
                value: ValueFunction { values, gain },
                policy: StationaryPolicy::new(policy)?,
                iterations: t,
                gain_trace,
                span_trace,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_inner_iters,
        span: last_span,
    })
}

/// Greedy policy with respect to `values` (one extra sweep).
pub fn greedy_policy<M: ConstrainedMdp>(model: &M, mu: f64, values: &[f64]) -> StationaryPolicy {
    let n = model.num_states();
    let mut next = vec![0.0; n];
    let mut policy = vec![0.0; n];
    bellman_sweep(model, mu, values, &mut next, &mut policy);
    StationaryPolicy { pull: policy }
}
