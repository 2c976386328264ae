//! Query controllers: CMDP-derived policies, threshold tables, and the
//! time-driven baselines they are compared against.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::importance::{format_level, ImportanceLevels};
use crate::metrics::ComposeFamily;
use crate::model::{CmdpModel, State, StateSpace};
use crate::rng::{substream, StreamRng, Substream};
use crate::solver::{solve, SolveOutcome, SolverConfig, StationaryPolicy};

/// Silent-to-pull transition probability of the Markovian baseline.
pub const MARKOV_P_SP: f64 = 0.05;
/// Silent self-transition probability of the Markovian baseline.
pub const MARKOV_P_SS: f64 = 1.0 - MARKOV_P_SP;

/// Smallest rate the Markovian baseline can realize with its fixed silent
/// self-transition.
pub fn markovian_min_rate() -> f64 {
    MARKOV_P_SP / (MARKOV_P_SP + 1.0)
}

/// Decision rule of a controller.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    /// Stationary (possibly randomized) policy over the CMDP states.
    StatePolicy {
        policy: StationaryPolicy,
        space: StateSpace,
    },
    /// Pull in slots `1, 1 + period, 1 + 2 period, ...`.
    Periodic {
        period: u64,
    },
    /// Independent Bernoulli pulls.
    Binomial {
        rate: f64,
    },
    /// Two-state silent/pull chain; the pull state emits a query.
    Markovian {
        p_ss: f64,
        p_pp: f64,
    },
    Threshold(ThresholdTable),
}

/// A query controller with its own decision substream.
#[derive(Debug, Clone)]
pub struct QueryController {
    kind: ControllerKind,
    rng: StreamRng,
    /// Current chain state of the Markovian baseline.
    pulling: bool,
}

impl QueryController {
    pub fn new(kind: ControllerKind, seed: u64) -> Result<Self> {
        if let ControllerKind::StatePolicy { policy, space } = &kind {
            if policy.len() != space.len() {
                return Err(Error::invalid(format!(
                    "policy covers {} states, state space has {}",
                    policy.len(),
                    space.len()
                )));
            }
        }
        Ok(Self {
            kind,
            rng: substream(seed, Substream::Controller),
            pulling: false,
        })
    }

    pub fn kind(&self) -> &ControllerKind {
        &self.kind
    }

    /// Decision for slot `n` (1-based) given the age and importance level
    /// observed at the start of the slot.
    pub fn decide(&mut self, n: u64, delta: u32, level: usize) -> Action {
        match &self.kind {
            ControllerKind::StatePolicy { policy, space } => {
                let p = policy.pull_prob(space.index(State { delta, level }));
                let pull = if p >= 1.0 {
                    true
                } else if p <= 0.0 {
                    false
                } else {
                    self.rng.gen::<f64>() < p
                };
                Action::from_pull(pull)
            }
            ControllerKind::Periodic { period } => Action::from_pull((n - 1) % period == 0),
            ControllerKind::Binomial { rate } => Action::from_pull(self.rng.gen::<f64>() < *rate),
            ControllerKind::Markovian { p_ss, p_pp } => {
                let current = self.pulling;
                let stay = if current { *p_pp } else { *p_ss };
                let u: f64 = self.rng.gen();
                self.pulling = if u < stay { current } else { !current };
                Action::from_pull(current)
            }
            ControllerKind::Threshold(table) => threshold_decide(table, delta, level),
        }
    }
}

/// Effect-agnostic baseline families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Periodic,
    Binomial,
    Markovian,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Periodic,
        BaselineKind::Binomial,
        BaselineKind::Markovian,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Periodic => "periodic",
            BaselineKind::Binomial => "binomial",
            BaselineKind::Markovian => "markovian",
        }
    }
}

/// Period used by the periodic baseline for target rate `q`.
pub fn periodic_period(q: f64) -> u64 {
    ((1.0 / q).round() as u64).max(1)
}

/// Pull self-transition probability giving the Markovian baseline a
/// stationary pull rate `q`.
pub fn markovian_p_pp(q: f64) -> Result<f64> {
    let min = markovian_min_rate();
    if !(q >= min && q <= 1.0) {
        return Err(Error::invalid(format!(
            "markovian rate {q} infeasible with silent self-transition {MARKOV_P_SS}; feasible range is [{min:.6}, 1]"
        )));
    }
    Ok(1.0 - MARKOV_P_SP * (1.0 - q) / q)
}

/// Decision rule of a baseline with target rate `q`.
pub fn baseline_kind(kind: BaselineKind, q: f64) -> Result<ControllerKind> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!(
            "query rate must lie in (0, 1], got {q}"
        )));
    }
    Ok(match kind {
        BaselineKind::Periodic => ControllerKind::Periodic {
            period: periodic_period(q),
        },
        BaselineKind::Binomial => ControllerKind::Binomial { rate: q },
        BaselineKind::Markovian => ControllerKind::Markovian {
            p_ss: MARKOV_P_SS,
            p_pp: markovian_p_pp(q)?,
        },
    })
}

pub fn make_baseline(kind: BaselineKind, q: f64, seed: u64) -> Result<QueryController> {
    QueryController::new(baseline_kind(kind, q)?, seed)
}

/// Effect-agnostic variants of the CMDP objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// Freshness only.
    QaoiAware,
    /// Usefulness only.
    VoiAware,
}

impl SpecialCase {
    pub fn compose(self) -> ComposeFamily {
        match self {
            SpecialCase::QaoiAware => ComposeFamily::PenaltyOnly,
            SpecialCase::VoiAware => ComposeFamily::UtilityOnly,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpecialCase::QaoiAware => "qaoi_aware",
            SpecialCase::VoiAware => "voi_aware",
        }
    }
}

/// Solves the CMDP with the GoE reduced to one of its two attributes.
pub fn special_case_policy(
    case: SpecialCase,
    model: &CmdpModel,
    c_max: f64,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let reduced = model.with_goe(model.goe_config().with_compose(case.compose()))?;
    solve(&reduced, c_max, cfg)
}

/// Which threshold view a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThresholdView {
    /// Per level, pull iff the age reaches a threshold.
    AgeThreshold,
    /// Per age, pull iff the level is at most a threshold.
    LevelThreshold,
}

/// A pair of neighbouring states whose actions break monotonicity: `first`
/// pulls while the larger-age (or smaller-level) neighbour `second` stays
/// silent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub view: ThresholdView,
    pub first: State,
    pub second: State,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NotThresholdReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for NotThresholdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "policy is not threshold-representable ({} violations",
            self.violations.len()
        )?;
        if let Some(v) = self.violations.first() {
            write!(
                f,
                "; e.g. {:?}: pull at (delta={}, level={}) but silent at (delta={}, level={})",
                v.view, v.first.delta, v.first.level, v.second.delta, v.second.level
            )?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Threshold(ThresholdTable),
    NotThreshold(NotThresholdReport),
}

impl Extraction {
    pub fn table(&self) -> Option<&ThresholdTable> {
        match self {
            Extraction::Threshold(t) => Some(t),
            Extraction::NotThreshold(_) => None,
        }
    }
}

/// Deterministic threshold policy in both equivalent views.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    delta_max: u32,
    levels: ImportanceLevels,
    /// Per level: smallest pulling age, `None` when never pulling.
    delta_th: Vec<Option<u32>>,
    /// Per age (index `delta - 1`): largest pulling level index, `None`
    /// when no level pulls.
    level_th: Vec<Option<usize>>,
}

impl ThresholdTable {
    /// Builds a table from a full action grid `pull[delta - 1][level]`,
    /// reporting every monotonicity violation.
    pub fn from_grid(
        delta_max: u32,
        levels: ImportanceLevels,
        pull: &[Vec<bool>],
    ) -> Result<std::result::Result<Self, NotThresholdReport>> {
        let k = levels.len();
        if pull.len() != delta_max as usize || pull.iter().any(|row| row.len() != k) {
            return Err(Error::invalid(format!(
                "action grid must be {delta_max} x {k}"
            )));
        }
        let at = |delta: u32, level: usize| pull[delta as usize - 1][level];
        let mut violations = Vec::new();
        for level in 0..k {
            for delta in 1..delta_max {
                if at(delta, level) && !at(delta + 1, level) {
                    violations.push(Violation {
                        view: ThresholdView::AgeThreshold,
                        first: State { delta, level },
                        second: State {
                            delta: delta + 1,
                            level,
                        },
                    });
                }
            }
        }
        for delta in 1..=delta_max {
            for level in 1..k {
                if at(delta, level) && !at(delta, level - 1) {
                    violations.push(Violation {
                        view: ThresholdView::LevelThreshold,
                        first: State { delta, level },
                        second: State {
                            delta,
                            level: level - 1,
                        },
                    });
                }
            }
        }
        if !violations.is_empty() {
            return Ok(Err(NotThresholdReport { violations }));
        }
        let delta_th = (0..k)
            .map(|level| (1..=delta_max).find(|&d| at(d, level)))
            .collect();
        let level_th = (1..=delta_max)
            .map(|delta| (0..k).rev().find(|&l| at(delta, l)))
            .collect();
        Ok(Ok(Self {
            delta_max,
            levels,
            delta_th,
            level_th,
        }))
    }

    pub fn delta_max(&self) -> u32 {
        self.delta_max
    }

    pub fn levels(&self) -> &ImportanceLevels {
        &self.levels
    }

    /// Age threshold per level (`None` = infinite).
    pub fn delta_thresholds(&self) -> &[Option<u32>] {
        &self.delta_th
    }

    /// Level-index threshold per age, starting at `delta = 1`.
    pub fn level_thresholds(&self) -> &[Option<usize>] {
        &self.level_th
    }

    /// Decision under the per-level age threshold.
    pub fn decide_by_age(&self, delta: u32, level: usize) -> Action {
        Action::from_pull(self.delta_th[level].is_some_and(|th| delta >= th))
    }

    /// Decision under the per-age level threshold.
    pub fn decide_by_level(&self, delta: u32, level: usize) -> Action {
        Action::from_pull(self.level_th[delta as usize - 1].is_some_and(|th| level <= th))
    }

    pub fn to_policy(&self) -> StationaryPolicy {
        let pull = (1..=self.delta_max)
            .flat_map(|d| (0..self.levels.len()).map(move |l| (d, l)))
            .map(|(d, l)| self.decide_by_age(d, l).indicator())
            .collect();
        StationaryPolicy::new(pull).expect("indicator values are probabilities")
    }

    /// Table in the age-by-level layout: header `delta,<levels...>`, one row
    /// per age, cells `pull` or `silent`.
    pub fn to_csv(&self) -> String {
        render_action_grid(self.delta_max, &self.levels, |d, l| {
            self.decide_by_age(d, l)
        })
    }

    /// Parses a table written by [`ThresholdTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let (delta_max, levels, grid) = parse_action_grid(text)?;
        Self::from_grid(delta_max, levels, &grid)?
            .map_err(|report| Error::invalid(report.to_string()))
    }
}

/// Option I decision, cross-checked against Option II in debug builds.
pub fn threshold_decide(table: &ThresholdTable, delta: u32, level: usize) -> Action {
    let a = table.decide_by_age(delta, level);
    debug_assert_eq!(a, table.decide_by_level(delta, level));
    a
}

/// Threshold table of a deterministic policy, or the evidence against one.
pub fn extract_threshold_table(
    policy: &StationaryPolicy,
    space: &StateSpace,
) -> Result<Extraction> {
    if policy.len() != space.len() {
        return Err(Error::invalid(format!(
            "policy covers {} states, state space has {}",
            policy.len(),
            space.len()
        )));
    }
    if !policy.is_deterministic() {
        return Err(Error::invalid(
            "randomized policy; extract from the unmixed bracket policies instead",
        ));
    }
    let grid = policy_grid(policy, space);
    Ok(
        match ThresholdTable::from_grid(space.delta_max(), space.levels().clone(), &grid)? {
            Ok(t) => Extraction::Threshold(t),
            Err(r) => Extraction::NotThreshold(r),
        },
    )
}

/// `pull[delta - 1][level]` for a deterministic (or rounded) policy.
pub fn policy_grid(policy: &StationaryPolicy, space: &StateSpace) -> Vec<Vec<bool>> {
    (1..=space.delta_max())
        .map(|delta| {
            (0..space.num_levels())
                .map(|level| policy.pull_prob(space.index(State { delta, level })) >= 0.5)
                .collect()
        })
        .collect()
}

/// Renders any action rule in the age-by-level CSV layout.
pub fn render_action_grid(
    delta_max: u32,
    levels: &ImportanceLevels,
    action: impl Fn(u32, usize) -> Action,
) -> String {
    let mut out = String::from("delta");
    for &v in levels.as_slice() {
        out.push(',');
        out.push_str(&format_level(v));
    }
    out.push('\n');
    for delta in 1..=delta_max {
        out.push_str(&delta.to_string());
        for level in 0..levels.len() {
            out.push(',');
            out.push_str(match action(delta, level) {
                Action::Pull => "pull",
                Action::Silent => "silent",
            });
        }
        out.push('\n');
    }
    out
}

fn parse_action_grid(text: &str) -> Result<(u32, ImportanceLevels, Vec<Vec<bool>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::invalid(format!("threshold csv header: {e}")))?
        .clone();
    if header.get(0).map(str::trim) != Some("delta") {
        return Err(Error::invalid(
            "threshold csv must start with a `delta` column",
        ));
    }
    let levels = header
        .iter()
        .skip(1)
        .map(|h| {
            h.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("level header `{h}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    let levels = ImportanceLevels::new(levels)?;
    let mut grid = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::invalid(format!("threshold csv row {}: {e}", i + 1)))?;
        let expected = i + 1;
        let delta = record.get(0).unwrap_or("").trim();
        if delta.parse::<usize>().ok() != Some(expected) {
            return Err(Error::invalid(format!(
                "row {expected}: expected delta {expected}, got `{delta}`"
            )));
        }
        if record.len() != levels.len() + 1 {
            return Err(Error::invalid(format!(
                "row {expected}: expected {} cells",
                levels.len()
            )));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell.trim().to_ascii_lowercase().as_str() {
                "pull" => Ok(true),
                "silent" => Ok(false),
                other => Err(Error::invalid(format!(
                    "row {expected}: cell `{other}` is neither pull nor silent"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        grid.push(row);
    }
    if grid.len() < 2 || grid.len() > u32::MAX as usize {
        return Err(Error::invalid("threshold csv needs at least two age rows"));
    }
    Ok((grid.len() as u32, levels, grid))
}
