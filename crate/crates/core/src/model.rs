//! The constrained MDP over (age, importance) states.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::importance::{ImportanceChain, ImportanceLevels};
use crate::metrics::{comm_cost, CostModel, GoeConfig};

/// A finite MDP with a per-action cost, as consumed by the solver.
pub trait ConstrainedMdp {
    fn num_states(&self) -> usize;

    /// Nonzero-probability successors of `state` under `action`.
    fn successors(&self, state: usize, action: Action) -> &[(usize, f64)];

    /// Reward `R(s, a, s')`, before the Lagrangian cost term.
    fn reward(&self, state: usize, action: Action, next: usize) -> f64;

    /// Cost `g_c(a c)` charged for taking `action` in `state`.
    fn action_cost(&self, state: usize, action: Action) -> f64;

    /// `R(s, a, s') - mu * cost(s, a)`.
    fn net_reward(&self, state: usize, action: Action, next: usize, mu: f64) -> f64 {
        self.reward(state, action, next) - mu * self.action_cost(state, action)
    }

    /// Largest `|R|` over all reachable transitions.
    fn max_abs_reward(&self) -> f64 {
        let mut m = 0.0f64;
        for s in 0..self.num_states() {
            for a in Action::ALL {
                for &(n, _) in self.successors(s, a) {
                    m = m.max(self.reward(s, a, n).abs());
                }
            }
        }
        m
    }

    /// Largest single-action cost.
    fn max_action_cost(&self) -> f64 {
        (0..self.num_states())
            .flat_map(|s| Action::ALL.map(|a| self.action_cost(s, a)))
            .fold(0.0, f64::max)
    }
}

/// A state `(delta, level index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub delta: u32,
    pub level: usize,
}

/// Indexed state space `{1..delta_max} x levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    delta_max: u32,
    levels: ImportanceLevels,
}

impl StateSpace {
    pub fn new(delta_max: u32, levels: ImportanceLevels) -> Result<Self> {
        if delta_max < 2 {
            return Err(Error::invalid(format!(
                "delta_max must be >= 2, got {delta_max}"
            )));
        }
        Ok(Self { delta_max, levels })
    }

    pub fn delta_max(&self) -> u32 {
        self.delta_max
    }

    pub fn levels(&self) -> &ImportanceLevels {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.delta_max as usize * self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index; rows are ages, columns are levels.
    pub fn index(&self, state: State) -> usize {
        debug_assert!(state.delta >= 1 && state.delta <= self.delta_max);
        (state.delta as usize - 1) * self.levels.len() + state.level
    }

    pub fn state(&self, index: usize) -> State {
        let k = self.levels.len();
        State {
            delta: (index / k) as u32 + 1,
            level: index % k,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    pub(crate) fn aged(&self, delta: u32) -> u32 {
        (delta + 1).min(self.delta_max)
    }
}

/// How the per-transition reward is formed from the successor's GoE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// GoE of the successor state, earned every slot.
    #[default]
    PerSlotState,
    /// GoE of the successor state, earned only in slots with a query.
    PullGated,
}

/// The CMDP: states, kernel, rewards and cost.
#[derive(Debug, Clone)]
pub struct CmdpModel {
    space: StateSpace,
    chain: ImportanceChain,
    p_eps: f64,
    goe: GoeConfig,
    cost: CostModel,
    reward_mode: RewardMode,
    state_goe: Vec<f64>,
    // Indexed by `2 * state + action`.
    successors: Vec<Vec<(usize, f64)>>,
}

impl CmdpModel {
    pub fn build(
        chain: ImportanceChain,
        delta_max: u32,
        p_eps: f64,
        goe: GoeConfig,
        cost: CostModel,
        reward_mode: RewardMode,
    ) -> Result<Self> {
        if let Err(v) = chain.validate() {
            return Err(Error::invalid(format!("importance chain invalid: {v:?}")));
        }
        if !(0.0..=1.0).contains(&p_eps) {
            return Err(Error::invalid(format!(
                "p_eps must lie in [0, 1], got {p_eps}"
            )));
        }
        goe.validate()?;
        let cost = CostModel::new(cost.c0)?;
        let space = StateSpace::new(delta_max, chain.levels().clone())?;

        let state_goe = space
            .states()
            .map(|s| goe.value(s.delta, space.levels().value(s.level)))
            .collect::<Vec<_>>();
        if let Some(bad) = state_goe.iter().find(|g| !g.is_finite()) {
            return Err(Error::invalid(format!("non-finite reward {bad}")));
        }

        let k = space.num_levels();
        let mut successors = Vec::with_capacity(2 * space.len());
        for s in space.states() {
            let stale = space.index(State {
                delta: space.aged(s.delta),
                level: s.level,
            });
            successors.push(vec![(stale, 1.0)]);

            let mut pull = Vec::with_capacity(k + 1);
            for j in 0..k {
                let p = chain.prob(s.level, j) * (1.0 - p_eps);
                if p > 0.0 {
                    pull.push((space.index(State { delta: 1, level: j }), p));
                }
            }
            if p_eps > 0.0 {
                pull.push((stale, p_eps));
            }
            successors.push(pull);
        }

        Ok(Self {
            space,
            chain,
            p_eps,
            goe,
            cost,
            reward_mode,
            state_goe,
            successors,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn chain(&self) -> &ImportanceChain {
        &self.chain
    }

    pub fn p_eps(&self) -> f64 {
        self.p_eps
    }

    pub fn goe_config(&self) -> &GoeConfig {
        &self.goe
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode
    }

    /// GoE of a state, indexed by flat state index.
    pub fn state_goe(&self, index: usize) -> f64 {
        self.state_goe[index]
    }

    /// Same model with a different GoE family (used for the special cases).
    pub fn with_goe(&self, goe: GoeConfig) -> Result<Self> {
        Self::build(
            self.chain.clone(),
            self.space.delta_max(),
            self.p_eps,
            goe,
            self.cost,
            self.reward_mode,
        )
    }

    /// Kernel entry evaluated from the closed-form transition rules.
    pub fn transition_prob(&self, from: State, action: Action, to: State) -> f64 {
        let alpha = action.indicator();
        let mut p = 0.0;
        if to.delta == 1 {
            p += self.chain.prob(from.level, to.level) * alpha * (1.0 - self.p_eps);
        }
        if to.delta == self.space.aged(from.delta) && to.level == from.level {
            p += alpha * self.p_eps + (1.0 - alpha);
        }
        p
    }
}

impl ConstrainedMdp for CmdpModel {
    fn num_states(&self) -> usize {
        self.space.len()
    }

    fn successors(&self, state: usize, action: Action) -> &[(usize, f64)] {
        &self.successors[2 * state + action.index()]
    }

    fn reward(&self, _state: usize, action: Action, next: usize) -> f64 {
        let g = self.state_goe[next];
        match self.reward_mode {
            RewardMode::PerSlotState => g,
            RewardMode::PullGated => g * action.indicator(),
        }
    }

    fn action_cost(&self, _state: usize, action: Action) -> f64 {
        comm_cost(action, &self.cost, &self.goe)
    }
}

/// A small explicit MDP, mainly for tests and toy problems.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    successors: Vec<[Vec<(usize, f64)>; 2]>,
    rewards: Vec<[f64; 2]>,
    costs: Vec<[f64; 2]>,
}

impl TabularMdp {
    /// `successors[s][a]`, expected rewards `rewards[s][a]`, costs `costs[s][a]`.
    pub fn new(
        successors: Vec<[Vec<(usize, f64)>; 2]>,
        rewards: Vec<[f64; 2]>,
        costs: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let n = successors.len();
        if n == 0 || rewards.len() != n || costs.len() != n {
            return Err(Error::invalid(
                "tabular MDP tables must be nonempty and equally sized",
            ));
        }
        for row in &successors {
            for dist in row {
                let total: f64 = dist.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 || dist.iter().any(|&(t, p)| t >= n || p < 0.0) {
                    return Err(Error::invalid(
                        "tabular MDP has an invalid successor distribution",
                    ));
                }
            }
        }
        Ok(Self {
            successors,
            rewards,
            costs,
        })
    }
}

impl ConstrainedMdp for TabularMdp {
    fn num_states(&self) -> usize {
        self.successors.len()
    }

    fn successors(&self, state: usize, action: Action) -> &[(usize, f64)] {
        &self.successors[state][action.index()]
    }

    fn reward(&self, state: usize, action: Action, _next: usize) -> f64 {
        self.rewards[state][action.index()]
    }

    fn action_cost(&self, state: usize, action: Action) -> f64 {
        self.costs[state][action.index()]
    }
}
