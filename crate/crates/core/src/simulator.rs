//! Slotted Monte-Carlo execution of the query/update loop.
//!
//! Each slot the controller sees the current age and the importance level of
//! the last received update and decides whether to query. A query succeeds
//! with probability `1 - p_eps`; success resets the age to 1 and delivers a
//! fresh importance level. Source and channel draws are made every slot,
//! whatever the controller does, so runs of different controllers under the
//! same seed see the same realizations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::importance::ImportanceChain;
use crate::metrics::{comm_cost, net_goe, CostModel, GoeConfig};
use crate::model::CmdpModel;
use crate::policies::QueryController;
use crate::rng::{substream, Substream};

/// Where a successful pull takes its importance level from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// One chain step from the last received level, as in the CMDP kernel.
    #[default]
    ModelConsistent,
    /// The source steps every slot; a pull observes its current level.
    FreeRunning,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_slots: u64,
    pub seed: u64,
    pub source_mode: SourceMode,
    pub p_eps: f64,
    pub cost: CostModel,
    /// GoE family used to score slots.
    pub goe: GoeConfig,
    pub delta_max: u32,
    pub chain: ImportanceChain,
}

impl SimConfig {
    /// Simulation settings matching a solved model, scored with its GoE.
    pub fn from_model(model: &CmdpModel, n_slots: u64, seed: u64) -> Self {
        Self {
            n_slots,
            seed,
            source_mode: SourceMode::ModelConsistent,
            p_eps: model.p_eps(),
            cost: *model.cost_model(),
            goe: *model.goe_config(),
            delta_max: model.space().delta_max(),
            chain: model.chain().clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::invalid("n_slots must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.p_eps) {
            return Err(Error::invalid(format!(
                "p_eps must lie in [0, 1], got {}",
                self.p_eps
            )));
        }
        if self.delta_max < 2 {
            return Err(Error::invalid("delta_max must be >= 2"));
        }
        CostModel::new(self.cost.c0)?;
        self.goe.validate()?;
        self.chain
            .validate()
            .map_err(|v| Error::invalid(format!("importance chain invalid: {v:?}")))
    }
}

/// One simulated slot, with decision-time age and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotRecord {
    pub n: u64,
    pub alpha: Action,
    pub success: bool,
    pub delta: u32,
    /// Level index of the last received update.
    pub level: usize,
    pub v_state: f64,
    /// Level index delivered in this slot, if any.
    pub delivered: Option<usize>,
    pub ngoe: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub avg_ngoe: f64,
    pub query_rate: f64,
    pub avg_cost: f64,
    pub avg_aoi: f64,
    pub success_rate: f64,
    pub n_slots: u64,
    pub seed: u64,
}

#[derive(Default)]
struct Accumulator {
    n: u64,
    ngoe: f64,
    pulls: u64,
    successes: u64,
    cost: f64,
    aoi: f64,
}

impl Accumulator {
    fn add(&mut self, r: &SlotRecord) {
        self.n += 1;
        self.ngoe += r.ngoe;
        self.pulls += r.alpha.is_pull() as u64;
        self.successes += r.success as u64;
        self.cost += r.cost;
        self.aoi += f64::from(r.delta);
    }

    fn finish(&self, seed: u64) -> Result<SimSummary> {
        if self.n == 0 {
            return Err(Error::invalid("cannot summarize an empty trace"));
        }
        let n = self.n as f64;
        Ok(SimSummary {
            avg_ngoe: self.ngoe / n,
            query_rate: self.pulls as f64 / n,
            avg_cost: self.cost / n,
            avg_aoi: self.aoi / n,
            success_rate: if self.pulls == 0 {
                0.0
            } else {
                self.successes as f64 / self.pulls as f64
            },
            n_slots: self.n,
            seed,
        })
    }
}

/// Runs one simulation, handing every slot to `observe`.
pub fn run_observed(
    cfg: &SimConfig,
    controller: &mut QueryController,
    mut observe: impl FnMut(&SlotRecord),
) -> Result<SimSummary> {
    cfg.validate()?;
    let mut source_rng = substream(cfg.seed, Substream::Source);
    let mut channel_rng = substream(cfg.seed, Substream::Channel);
    let levels = cfg.chain.levels();
    let mut delta: u32 = 1;
    let mut level: usize = 0;
    let mut source_level: usize = 0;
    let mut acc = Accumulator::default();

    for n in 1..=cfg.n_slots {
        let u_source: f64 = source_rng.gen();
        let u_channel: f64 = channel_rng.gen();
        if cfg.source_mode == SourceMode::FreeRunning {
            source_level = cfg.chain.next_from_uniform(source_level, u_source);
        }

        let alpha = controller.decide(n, delta, level);
        let success = alpha.is_pull() && u_channel >= cfg.p_eps;
        let delivered = success.then(|| match cfg.source_mode {
            SourceMode::ModelConsistent => cfg.chain.next_from_uniform(level, u_source),
            SourceMode::FreeRunning => source_level,
        });
        let v = levels.value(level);
        let record = SlotRecord {
            n,
            alpha,
            success,
            delta,
            level,
            v_state: v,
            delivered,
            ngoe: net_goe(delta, v, alpha, &cfg.goe, &cfg.cost),
            cost: comm_cost(alpha, &cfg.cost, &cfg.goe),
        };
        acc.add(&record);
        observe(&record);

        match delivered {
            Some(next) => {
                delta = 1;
                level = next;
            }
            None => delta = (delta + 1).min(cfg.delta_max),
        }
    }
    acc.finish(cfg.seed)
}

/// Runs one simulation, optionally keeping the per-slot trace.
pub fn run(
    cfg: &SimConfig,
    controller: &mut QueryController,
    keep_trace: bool,
) -> Result<(SimSummary, Option<Vec<SlotRecord>>)> {
    let mut trace = keep_trace.then(Vec::new);
    let summary = run_observed(cfg, controller, |r| {
        if let Some(t) = trace.as_mut() {
            t.push(*r);
        }
    })?;
    Ok((summary, trace))
}

/// Arithmetic means over a recorded trace.
pub fn summarize(trace: &[SlotRecord], seed: u64) -> Result<SimSummary> {
    let mut acc = Accumulator::default();
    trace.iter().for_each(|r| acc.add(r));
    acc.finish(seed)
}

/// `replications` independent runs with seeds `seed, seed + 1, ...`, each
/// with a fresh controller from `factory(seed)`. Output is in seed order.
pub fn replicate<F>(cfg: &SimConfig, factory: F, replications: usize) -> Result<Vec<SimSummary>>
where
    F: Fn(u64) -> Result<QueryController> + Sync,
{
    if replications == 0 {
        return Err(Error::invalid("replication count must be >= 1"));
    }
    (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let run_cfg = SimConfig {
                seed,
                ..cfg.clone()
            };
            let mut controller = factory(seed)?;
            run(&run_cfg, &mut controller, false).map(|(s, _)| s)
        })
        .collect()
}

/// Per-slot trace as CSV with columns `n,alpha,success,delta,v_state,ngoe,cost`.
pub fn trace_csv(trace: &[SlotRecord]) -> String {
    let mut out = String::from("n,alpha,success,delta,v_state,ngoe,cost\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.alpha.is_pull() as u8,
            r.success as u8,
            r.delta,
            r.v_state,
            r.ngoe,
            r.cost
        ));
    }
    out
}

/// Single-row summary CSV.
pub fn summary_csv(label: &str, s: &SimSummary) -> String {
    format!(
        "policy,avg_ngoe,query_rate,avg_cost,avg_aoi,success_rate,n_slots,seed\n{label},{},{},{},{},{},{},{}\n",
        s.avg_ngoe, s.query_rate, s.avg_cost, s.avg_aoi, s.success_rate, s.n_slots, s.seed
    )
}
