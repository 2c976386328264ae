//! Grade-of-effectiveness (GoE) metrics.
//!
//! A GoE value combines a freshness penalty of the age `delta` with a
//! utility of the importance `v`. The families below are the only ones
//! supported; each is selected by name in the run config.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};

/// Freshness penalty `g_delta`, non-increasing in the age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyFamily {
    /// `1 / delta`
    Reciprocal,
    /// `exp(-lambda * delta)`
    ExpDecay { lambda: f64 },
    /// `-delta`
    NegLinear,
    /// `1`
    Constant,
}

impl PenaltyFamily {
    pub fn eval(self, delta: f64) -> f64 {
        match self {
            PenaltyFamily::Reciprocal => 1.0 / delta,
            PenaltyFamily::ExpDecay { lambda } => (-lambda * delta).exp(),
            PenaltyFamily::NegLinear => -delta,
            PenaltyFamily::Constant => 1.0,
        }
    }
}

/// Usefulness utility `g_v`, non-decreasing in the importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFamily {
    Linear,
    Constant,
}

impl UtilityFamily {
    pub fn eval(self, v: f64) -> f64 {
        match self {
            UtilityFamily::Linear => v,
            UtilityFamily::Constant => 1.0,
        }
    }
}

/// Composition `f(penalty, utility)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeFamily {
    Product,
    /// Freshness only (query-AoI special case).
    PenaltyOnly,
    /// Usefulness only (value-of-information special case).
    UtilityOnly,
}

impl ComposeFamily {
    pub fn eval(self, penalty: f64, utility: f64) -> f64 {
        match self {
            ComposeFamily::Product => penalty * utility,
            ComposeFamily::PenaltyOnly => penalty,
            ComposeFamily::UtilityOnly => utility,
        }
    }
}

/// Communication-cost function `g_c`; only the linear form is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    #[default]
    Linear,
}

impl CostFamily {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            CostFamily::Linear => x,
        }
    }
}

/// Selected function families for the GoE and the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoeConfig {
    pub penalty: PenaltyFamily,
    pub utility: UtilityFamily,
    pub compose: ComposeFamily,
    #[serde(default)]
    pub cost: CostFamily,
}

impl Default for GoeConfig {
    /// Reciprocal freshness times linear usefulness.
    fn default() -> Self {
        Self {
            penalty: PenaltyFamily::Reciprocal,
            utility: UtilityFamily::Linear,
            compose: ComposeFamily::Product,
            cost: CostFamily::Linear,
        }
    }
}

impl GoeConfig {
    /// `-v * delta`: the exponent of the literal net-GoE expression.
    pub fn literal_ngoe() -> Self {
        Self {
            penalty: PenaltyFamily::NegLinear,
            utility: UtilityFamily::Linear,
            compose: ComposeFamily::Product,
            cost: CostFamily::Linear,
        }
    }

    pub fn with_compose(self, compose: ComposeFamily) -> Self {
        Self { compose, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if let PenaltyFamily::ExpDecay { lambda } = self.penalty {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::invalid(format!(
                    "exp_decay lambda must be >= 0, got {lambda}"
                )));
            }
        }
        Ok(())
    }

    /// GoE for `delta >= 1` without range checks.
    pub(crate) fn value(&self, delta: u32, v: f64) -> f64 {
        self.compose
            .eval(self.penalty.eval(f64::from(delta)), self.utility.eval(v))
    }
}

/// Uniform per-pull communication cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c0: f64,
}

impl CostModel {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::invalid(format!("cost c0 must be >= 0, got {c0}")));
        }
        Ok(Self { c0 })
    }
}

/// GoE of an update with age `delta` and importance `v`.
pub fn goe(delta: u32, v: f64, config: &GoeConfig) -> Result<f64> {
    if delta < 1 {
        return Err(Error::invalid("age must be >= 1"));
    }
    Ok(config.value(delta, v))
}

/// GoE counted only in slots that carry a query.
pub fn pull_gated(goe_value: f64, alpha: Action) -> f64 {
    match alpha {
        Action::Pull => goe_value,
        Action::Silent => 0.0,
    }
}

/// `g_c(alpha * c0)`.
pub fn comm_cost(alpha: Action, cost: &CostModel, config: &GoeConfig) -> f64 {
    config.cost.eval(alpha.indicator() * cost.c0)
}

/// Literal net GoE `exp(-v * delta - c0 * alpha)`, always in `(0, 1]`.
pub fn ngoe(delta: u32, v: f64, alpha: Action, cost: &CostModel) -> f64 {
    (-v * f64::from(delta) - cost.c0 * alpha.indicator()).exp()
}

/// Net GoE `exp(GoE - g_c(alpha * c0))` under an arbitrary family.
///
/// With [`GoeConfig::literal_ngoe`] this equals [`ngoe`].
pub fn net_goe(delta: u32, v: f64, alpha: Action, config: &GoeConfig, cost: &CostModel) -> f64 {
    (config.value(delta, v) - comm_cost(alpha, cost, config)).exp()
}

/// Checks `g_delta(delta_max - 1) <= (1 + epsilon) g_delta(delta_max)`.
pub fn validate_truncation(config: &GoeConfig, delta_max: u32, epsilon: f64) -> bool {
    if delta_max < 2 {
        return false;
    }
    let before = config.penalty.eval(f64::from(delta_max - 1));
    let at = config.penalty.eval(f64::from(delta_max));
    before <= (1.0 + epsilon) * at + 1e-12 * at.abs().max(1.0)
}
