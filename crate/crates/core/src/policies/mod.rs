//! Scheduling policies behind a common decision interface.
//!
//! Every policy returns a full [`PolicyDecision`] (device, gateway and server
//! actions) that satisfies the capacity and idleness constraints; the
//! transition system rejects anything else.

mod random;
mod round_robin;
mod saoithe;

use serde::{Deserialize, Serialize};

use crate::dynamics::{PolicyDecision, SystemState};
use crate::error::{Error, Result};
use crate::model::{carbon_cost, BudgetLedger, SimConfig};
use crate::traces::CarbonTrace;

pub use random::{Random, RandomParams};
pub use round_robin::{RoundRobin, RoundRobinParams};
pub use saoithe::{rank_order, select_top_m, IndexMode, PipelineAwareness, Saoithe, SaoitheParams};

pub trait Policy: Send {
    fn name(&self) -> &'static str;
    /// Clears per-episode state and reseeds any randomness.
    fn reset(&mut self, seed: u64);
    /// Decision for the slot `state.slot`.
    fn decide(&mut self, state: &SystemState, xi_t: f64, ledger: &BudgetLedger) -> Result<PolicyDecision>;
    /// Parameters echoed into result metadata.
    fn metadata(&self) -> serde_json::Value;
}

/// Total transmissions the budget allows at the trace's mean intensity
/// spread over N·T source-slots: K = ⌊κ / CF(ξ̄, E)⌋, p = ⌈N·T / K⌉ ∈ [1, T].
pub fn derive_rr_period(kappa: f64, trace: &CarbonTrace, e_tot: f64, num_sources: usize, horizon: usize) -> Result<usize> {
    let mean = trace.mean();
    if !(mean > 0.0) || !(e_tot > 0.0) {
        return Err(Error::domain(format!("mean intensity ({mean}) and update energy ({e_tot}) must be positive")));
    }
    if !(kappa >= 0.0) {
        return Err(Error::domain(format!("budget must be non-negative, got {kappa}")));
    }
    if num_sources == 0 || horizon == 0 {
        return Err(Error::domain("need at least one source and one slot"));
    }
    let per_update = carbon_cost(mean, e_tot)?;
    let ratio = kappa / per_update;
    let k = if ratio.is_finite() { (ratio + 1e-9).floor() } else { f64::INFINITY };
    if k < 1.0 {
        return Err(Error::Infeasible("budget permits no transmissions".into()));
    }
    let p = ((num_sources * horizon) as f64 / k).ceil();
    Ok((p as usize).clamp(1, horizon))
}

/// Serializable policy choice; [`PolicySpec::build`] turns it into a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Saoithe {
        lambda: f64,
        mu: f64,
        #[serde(default)]
        mode: IndexMode,
        #[serde(default)]
        pipeline: PipelineAwareness,
    },
    /// `period: None` derives p from the budget.
    RoundRobin { period: Option<usize> },
    /// `tx_probability: None` uses 1/p with the budget-derived period.
    Random { tx_probability: Option<f64> },
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Saoithe { .. } => "saoithe",
            PolicySpec::RoundRobin { .. } => "round_robin",
            PolicySpec::Random { .. } => "random",
        }
    }

    pub fn build(&self, cfg: &SimConfig, trace: &CarbonTrace) -> Result<Box<dyn Policy>> {
        let derived = || {
            derive_rr_period(cfg.cf_budget_grams(), trace, cfg.energy.e_tot_per_update, cfg.num_sources, cfg.horizon_slots)
        };
        Ok(match *self {
            PolicySpec::Saoithe { lambda, mu, mode, pipeline } => {
                let mut params = SaoitheParams::from_config(cfg, lambda, mu);
                params.mode = mode;
                params.pipeline = pipeline;
                Box::new(Saoithe::new(params)?)
            }
            PolicySpec::RoundRobin { period } => {
                // A derived period shorter than ceil(N/M) puts more sources due per
                // slot than the channel carries, and deferral then starves the
                // highest indices.
                let p = match period {
                    Some(p) => p,
                    None => {
                        let m = cfg.channel_capacity.max(1);
                        derived()?.max(cfg.num_sources.div_ceil(m)).min(cfg.horizon_slots.max(1))
                    }
                };
                Box::new(RoundRobin::new(RoundRobinParams::staggered(p, cfg.num_sources), cfg.channel_capacity)?)
            }
            PolicySpec::Random { tx_probability } => {
                let p_tx = match tx_probability {
                    Some(p) => p,
                    None => 1.0 / derived()? as f64,
                };
                Box::new(Random::new(RandomParams { tx_probability: p_tx, seed: cfg.rng_seed }, cfg.channel_capacity)?)
            }
        })
    }
}
