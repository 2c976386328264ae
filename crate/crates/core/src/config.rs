//! Run configuration: one JSON document with model, solver, controller,
//! simulation and experiment blocks.
//!
//! Parsing reports the JSON path, line and column of the first syntax or
//! type error; [`RunConfig::diagnostics`] then checks every block's values
//! before any computation starts.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::{ChainSpec, ImportanceChain};
use crate::metrics::{validate_truncation, CostModel, GoeConfig};
use crate::model::{CmdpModel, RewardMode};
use crate::policies::{markovian_min_rate, BaselineKind};
use crate::simulator::{SimConfig, SourceMode};
use crate::solver::SolverConfig;

/// Tolerance for the age-truncation check on the GoE family.
pub const TRUNCATION_EPS: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub chain: ChainSpec,
    pub delta_max: u32,
    pub p_eps: f64,
    /// GoE family the solver optimizes.
    pub goe: GoeConfig,
    /// GoE family used to score simulated slots; defaults to `goe`.
    pub eval_goe: Option<GoeConfig>,
    pub c0: f64,
    pub c_max: f64,
    pub reward_mode: RewardMode,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            chain: ChainSpec::Uniform { count: 10 },
            delta_max: 10,
            p_eps: 0.2,
            goe: GoeConfig::default(),
            eval_goe: None,
            c0: 0.5,
            c_max: 0.4,
            reward_mode: RewardMode::PerSlotState,
        }
    }
}

impl ModelBlock {
    pub fn build_chain(&self) -> Result<ImportanceChain> {
        self.chain.build()
    }

    /// The CMDP with this block's parameters.
    pub fn build(&self) -> Result<CmdpModel> {
        self.build_with_c0(self.c0)
    }

    /// The CMDP with the cost coefficient replaced by `c0`.
    pub fn build_with_c0(&self, c0: f64) -> Result<CmdpModel> {
        CmdpModel::build(
            self.build_chain()?,
            self.delta_max,
            self.p_eps,
            self.goe,
            CostModel::new(c0)?,
            self.reward_mode,
        )
    }

    pub fn evaluation_goe(&self) -> GoeConfig {
        self.eval_goe.unwrap_or(self.goe)
    }

    fn check(&self, out: &mut Vec<Error>) {
        if let Err(e) = self.chain.build() {
            out.push(Error::config("model.chain", e.to_string()));
        }
        if self.delta_max < 2 {
            out.push(Error::config("model.delta_max", "must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.p_eps) {
            out.push(Error::config("model.p_eps", "must lie in [0, 1]"));
        } else if self.p_eps == 1.0 {
            out.push(Error::config(
                "model.p_eps",
                "every update would be lost; must be < 1",
            ));
        }
        for (field, goe) in [
            ("model.goe", Some(self.goe)),
            ("model.eval_goe", self.eval_goe),
        ] {
            if let Some(Err(e)) = goe.map(|g| g.validate()) {
                out.push(Error::config(field, e.to_string()));
            }
        }
        if self.delta_max >= 2 && !validate_truncation(&self.goe, self.delta_max, TRUNCATION_EPS) {
            log::warn!(
                "GoE penalty has not settled within {TRUNCATION_EPS} by delta_max = {}",
                self.delta_max
            );
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            out.push(Error::config("model.c0", "must be a finite value >= 0"));
        }
        if !(self.c_max.is_finite() && self.c_max >= 0.0) {
            out.push(Error::config("model.c_max", "must be a finite value >= 0"));
        }
    }
}

/// Which controller a `simulate` run uses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Solve the CMDP from the model block and follow the mixed policy.
    #[default]
    EffectAware,
    QaoiAware,
    VoiAware,
    Periodic {
        #[serde(default)]
        rate: Option<f64>,
        #[serde(default)]
        period: Option<u64>,
    },
    Binomial {
        rate: f64,
    },
    Markovian {
        rate: f64,
    },
    /// A policy previously written by `solve`.
    PolicyFile {
        path: PathBuf,
    },
    /// A threshold table in the age-by-level CSV layout.
    ThresholdCsv {
        path: PathBuf,
    },
}

impl ControllerSpec {
    pub fn baseline(kind: BaselineKind, rate: f64) -> Self {
        match kind {
            BaselineKind::Periodic => ControllerSpec::Periodic {
                rate: Some(rate),
                period: None,
            },
            BaselineKind::Binomial => ControllerSpec::Binomial { rate },
            BaselineKind::Markovian => ControllerSpec::Markovian { rate },
        }
    }

    fn check(&self, out: &mut Vec<Error>) {
        let rate_ok = |r: f64| r > 0.0 && r <= 1.0;
        match self {
            ControllerSpec::Periodic { rate, period } => match (rate, period) {
                (Some(_), Some(_)) | (None, None) => out.push(Error::config(
                    "controller",
                    "periodic needs exactly one of `rate` or `period`",
                )),
                (Some(r), None) if !rate_ok(*r) => {
                    out.push(Error::config("controller.rate", "must lie in (0, 1]"))
                }
                (None, Some(0)) => out.push(Error::config("controller.period", "must be >= 1")),
                _ => {}
            },
            ControllerSpec::Binomial { rate } if !rate_ok(*rate) => {
                out.push(Error::config("controller.rate", "must lie in (0, 1]"))
            }
            ControllerSpec::Markovian { rate }
                if !(*rate >= markovian_min_rate() && *rate <= 1.0) =>
            {
                out.push(Error::config(
                    "controller.rate",
                    format!(
                        "markovian rate must lie in [{:.6}, 1]",
                        markovian_min_rate()
                    ),
                ))
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub n_slots: u64,
    pub seed: u64,
    pub source_mode: SourceMode,
    pub replications: usize,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            n_slots: 1000,
            seed: 1,
            source_mode: SourceMode::ModelConsistent,
            replications: 1,
        }
    }
}

/// Named experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Table1,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2,
        ExperimentKind::Fig3,
        ExperimentKind::Fig4,
        ExperimentKind::Fig5,
        ExperimentKind::Table1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Fig5 => "fig5",
            ExperimentKind::Table1 => "table1",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::config(
                    "experiment.which",
                    format!("unknown experiment `{name}`; expected one of {known:?}"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub which: Option<ExperimentKind>,
    pub seed: u64,
    /// Replications per grid point of the rate sweep.
    pub replications: usize,
    pub n_slots: u64,
    /// Query-rate grid of the sweep.
    pub rates: Vec<f64>,
    /// Cost coefficients of the sweep.
    pub sweep_c0: Vec<f64>,
    pub snapshot_slots: u64,
    pub snapshot_period: u64,
    /// Replications behind the CDF comparison.
    pub cdf_replications: usize,
    /// Target rate of the baselines in the CDF comparison.
    pub cdf_rate: f64,
    pub convergence_c0: Vec<f64>,
    pub table_c0: Vec<f64>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            which: None,
            seed: 1,
            replications: 30,
            n_slots: 1000,
            rates: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            sweep_c0: vec![0.1, 0.5, 1.0],
            snapshot_slots: 50,
            snapshot_period: 7,
            cdf_replications: 200,
            cdf_rate: 0.8,
            convergence_c0: vec![0.1, 0.5, 1.0],
            table_c0: vec![0.5, 1.0],
        }
    }
}

impl ExperimentBlock {
    fn check(&self, out: &mut Vec<Error>) {
        if self.replications == 0 {
            out.push(Error::config("experiment.replications", "must be >= 1"));
        }
        if self.cdf_replications == 0 {
            out.push(Error::config("experiment.cdf_replications", "must be >= 1"));
        }
        if self.n_slots == 0 {
            out.push(Error::config("experiment.n_slots", "must be >= 1"));
        }
        if self.snapshot_slots == 0 {
            out.push(Error::config("experiment.snapshot_slots", "must be >= 1"));
        }
        if self.snapshot_period == 0 {
            out.push(Error::config("experiment.snapshot_period", "must be >= 1"));
        }
        if self.rates.is_empty() {
            out.push(Error::config("experiment.rates", "must not be empty"));
        }
        for (i, &q) in self.rates.iter().enumerate() {
            if !(q > 0.0 && q <= 1.0) {
                out.push(Error::config(
                    format!("experiment.rates[{i}]"),
                    "must lie in (0, 1]",
                ));
            }
        }
        if !(self.cdf_rate > 0.0 && self.cdf_rate <= 1.0) {
            out.push(Error::config("experiment.cdf_rate", "must lie in (0, 1]"));
        }
        for (name, grid) in [
            ("sweep_c0", &self.sweep_c0),
            ("convergence_c0", &self.convergence_c0),
            ("table_c0", &self.table_c0),
        ] {
            for (i, &c) in grid.iter().enumerate() {
                if !(c.is_finite() && c >= 0.0) {
                    out.push(Error::config(
                        format!("experiment.{name}[{i}]"),
                        "must be a finite value >= 0",
                    ));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub solver: SolverConfig,
    pub controller: ControllerSpec,
    pub simulation: SimulationBlock,
    pub experiment: ExperimentBlock,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelBlock::default(),
            solver: SolverConfig::default(),
            controller: ControllerSpec::default(),
            simulation: SimulationBlock::default(),
            experiment: ExperimentBlock::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    /// Parses a config document. Syntax and type errors name the offending
    /// field path with its line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let field = if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            };
            Error::config(field, inner.to_string())
        })
    }

    /// Parses and fully validates a config document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::from_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every validation problem across all blocks.
    pub fn diagnostics(&self) -> Vec<Error> {
        let mut out = Vec::new();
        self.model.check(&mut out);
        if let Err(e) = self.solver.validate() {
            out.push(Error::config("solver", e.to_string()));
        }
        self.controller.check(&mut out);
        if self.simulation.n_slots == 0 {
            out.push(Error::config("simulation.n_slots", "must be >= 1"));
        }
        if self.simulation.replications == 0 {
            out.push(Error::config("simulation.replications", "must be >= 1"));
        }
        self.experiment.check(&mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.diagnostics().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Simulator settings for the given seed and cost coefficient.
    pub fn sim_config(&self, c0: f64, n_slots: u64, seed: u64) -> Result<SimConfig> {
        Ok(SimConfig {
            n_slots,
            seed,
            source_mode: self.simulation.source_mode,
            p_eps: self.model.p_eps,
            cost: CostModel::new(c0)?,
            goe: self.model.evaluation_goe(),
            delta_max: self.model.delta_max,
            chain: self.model.build_chain()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::EtaMode;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg.model.delta_max, 10);
        assert_eq!(cfg.model.p_eps, 0.2);
        assert_eq!(cfg.model.c0, 0.5);
        assert_eq!(cfg.model.c_max, 0.4);
        assert_eq!(cfg.solver.eps_v, 1e-3);
        assert_eq!(cfg.solver.eta_mode, EtaMode::CostMatched);
        assert_eq!(cfg.simulation.n_slots, 1000);
        assert_eq!(cfg.experiment.rates.len(), 10);
        assert_eq!(cfg.controller, ControllerSpec::EffectAware);
        let model = cfg.model.build().unwrap();
        assert_eq!(model.space().len(), 100);
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"{
            "model": {"chain": {"uniform": {"count": 4}}, "delta_max": 6, "p_eps": 0.1,
                      "goe": {"penalty": "reciprocal", "utility": "linear", "compose": "product"},
                      "eval_goe": {"penalty": "neg_linear", "utility": "linear", "compose": "product"},
                      "c0": 1.0, "c_max": 0.3, "reward_mode": "pull_gated"},
            "solver": {"eps_v": 1e-4, "eta_mode": {"fixed": 0.25}},
            "controller": {"kind": "markovian", "rate": 0.8},
            "simulation": {"n_slots": 10, "seed": 3, "source_mode": "free_running"},
            "experiment": {"which": "fig4", "rates": [0.5]},
            "output_dir": "out"
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.controller, ControllerSpec::Markovian { rate: 0.8 });
        assert_eq!(cfg.experiment.which, Some(ExperimentKind::Fig4));
        assert_eq!(cfg.model.evaluation_goe(), GoeConfig::literal_ngoe());
        let again = RunConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = RunConfig::from_json("{\n  \"model\": {\"delta_max\": \"ten\"}\n}").unwrap_err();
        match err {
            Error::Config { field, message } => {
                assert_eq!(field, "model.delta_max");
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let unknown = RunConfig::from_json(r#"{"modle": {}}"#).unwrap_err();
        assert!(unknown.to_string().contains("modle"));
    }

    #[test]
    fn semantic_errors_name_fields() {
        let text = r#"{"model": {"p_eps": 1.5, "c0": -1},
                       "controller": {"kind": "markovian", "rate": 0.01},
                       "experiment": {"rates": [0.0, 0.5]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let fields: Vec<String> = cfg
            .diagnostics()
            .into_iter()
            .map(|e| match e {
                Error::Config { field, .. } => field,
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(
            fields,
            vec![
                "model.p_eps",
                "model.c0",
                "controller.rate",
                "experiment.rates[0]"
            ]
        );
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn periodic_needs_one_parameter() {
        for (text, ok) in [
            (r#"{"controller": {"kind": "periodic", "period": 7}}"#, true),
            (r#"{"controller": {"kind": "periodic", "rate": 0.5}}"#, true),
            (r#"{"controller": {"kind": "periodic"}}"#, false),
            (
                r#"{"controller": {"kind": "periodic", "rate": 0.5, "period": 2}}"#,
                false,
            ),
            (
                r#"{"controller": {"kind": "periodic", "period": 0}}"#,
                false,
            ),
        ] {
            assert_eq!(RunConfig::parse(text).is_ok(), ok, "{text}");
        }
    }

    #[test]
    fn experiment_names() {
        assert_eq!(
            ExperimentKind::parse("table1").unwrap(),
            ExperimentKind::Table1
        );
        assert!(ExperimentKind::parse("fig9").is_err());
    }
}
