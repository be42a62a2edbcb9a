//! The episode loop: policy decides, dynamics steps, ledger and metrics accrue.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Dynamics, SlotMetrics, SystemState};
use crate::error::{Error, Result};
use crate::model::{carbon_cost_unchecked, BudgetLedger, SimConfig};
use crate::policies::Policy;
use crate::traces::CarbonTrace;

/// Relative slack used when checking cumulative spend against a budget.
pub const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub policy: String,
    pub policy_metadata: serde_json::Value,
    pub region: String,
    pub seed: u64,
    pub gate_enabled: bool,
    pub config_digest: String,
    pub num_sources: usize,
    pub horizon: usize,
    pub slot_minutes: f64,
    pub cf_budget: f64,
    pub duty_budget: f64,
    pub per_slot: Vec<SlotMetrics>,
    /// `aoi_trajectories[n][t]`: AoI of source n entering slot t.
    pub aoi_trajectories: Vec<Vec<u32>>,
    pub avg_aoi_slots: f64,
    pub avg_aoi_minutes: f64,
    /// Time-and-source mean of Δ².
    pub avg_staleness: f64,
    pub total_cf: f64,
    pub total_duty: f64,
    pub total_energy: f64,
    pub total_activations: u64,
    pub total_deliveries: u64,
    pub total_drops: u64,
    /// First slot in which the gate blocked an activation.
    pub budget_exhausted_at: Option<usize>,
    /// Footprint of infrastructure idle power over the horizon, reported only.
    pub idle_cf: f64,
}

impl EpisodeResult {
    pub fn cf_cumulative(&self) -> Vec<f64> {
        cumulative(self.per_slot.iter().map(|m| m.cf_spent))
    }

    pub fn duty_cumulative(&self) -> Vec<f64> {
        cumulative(self.per_slot.iter().map(|m| m.duty_spent))
    }

    /// Slots whose cumulative carbon spend exceeds the budget.
    pub fn cf_prefix_violations(&self) -> usize {
        let limit = self.cf_budget * (1.0 + BUDGET_EPS);
        self.cf_cumulative().iter().filter(|&&c| c > limit).count()
    }

    pub fn duty_prefix_violations(&self) -> usize {
        let limit = self.duty_budget * (1.0 + BUDGET_EPS);
        self.duty_cumulative().iter().filter(|&&c| c > limit).count()
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            policy: self.policy.clone(),
            policy_metadata: self.policy_metadata.clone(),
            region: self.region.clone(),
            seed: self.seed,
            gate_enabled: self.gate_enabled,
            config_digest: self.config_digest.clone(),
            num_sources: self.num_sources,
            horizon: self.horizon,
            avg_aoi_slots: self.avg_aoi_slots,
            avg_aoi_minutes: self.avg_aoi_minutes,
            avg_staleness: self.avg_staleness,
            total_cf: self.total_cf,
            cf_budget: self.cf_budget,
            total_duty: self.total_duty,
            duty_budget: self.duty_budget,
            total_energy: self.total_energy,
            total_activations: self.total_activations,
            total_deliveries: self.total_deliveries,
            total_drops: self.total_drops,
            budget_exhausted_at: self.budget_exhausted_at,
            cf_prefix_violations: self.cf_prefix_violations(),
            duty_prefix_violations: self.duty_prefix_violations(),
            idle_cf: self.idle_cf,
            digest: self.digest(),
        }
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_json(self)
    }
}

/// Scalar view of an episode, written as the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub policy: String,
    pub policy_metadata: serde_json::Value,
    pub region: String,
    pub seed: u64,
    pub gate_enabled: bool,
    pub config_digest: String,
    pub num_sources: usize,
    pub horizon: usize,
    pub avg_aoi_slots: f64,
    pub avg_aoi_minutes: f64,
    pub avg_staleness: f64,
    pub total_cf: f64,
    pub cf_budget: f64,
    pub total_duty: f64,
    pub duty_budget: f64,
    pub total_energy: f64,
    pub total_activations: u64,
    pub total_deliveries: u64,
    pub total_drops: u64,
    pub budget_exhausted_at: Option<usize>,
    pub cf_prefix_violations: usize,
    pub duty_prefix_violations: usize,
    pub idle_cf: f64,
    pub digest: String,
}

fn cumulative(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    it.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

pub(crate) fn sha256_json<T: Serialize + ?Sized>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("serializable");
    let mut h = Sha256::new();
    h.update(&bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_digest(cfg: &SimConfig) -> String {
    sha256_json(cfg)
}

/// Runs one episode of `cfg.horizon_slots` slots from a fresh state (Δ = 1,
/// empty buffers). The policy is reset with `cfg.rng_seed`.
pub fn run_episode(cfg: &SimConfig, trace: &CarbonTrace, policy: &mut dyn Policy, gate_enabled: bool) -> Result<EpisodeResult> {
    let t_max = cfg.horizon_slots;
    if trace.len() < t_max {
        return Err(Error::domain(format!("trace has {} slots, horizon needs {t_max}", trace.len())));
    }
    let dy = Dynamics::new(cfg).with_gate(gate_enabled);
    let n = cfg.num_sources;
    let mut state = SystemState::uniform(n, 1);
    let mut ledger = BudgetLedger::new(cfg);
    policy.reset(cfg.rng_seed);

    let mut per_slot = Vec::with_capacity(t_max);
    let mut traj = vec![Vec::with_capacity(t_max); n];
    let mut aoi_sum = 0u128;
    let mut budget_exhausted_at = None;
    let mut idle_cf = 0.0;
    let idle_energy = cfg.energy.idle_power * cfg.slot_duration;

    for t in 0..t_max {
        let xi = trace.xi[t];
        for (row, s) in traj.iter_mut().zip(&state.sources) {
            row.push(s.aoi);
            aoi_sum += s.aoi as u128;
        }
        let decision = policy.decide(&state, xi, &ledger)?;
        let out = dy.step(&state, &decision, xi, &ledger)?;
        if budget_exhausted_at.is_none() && !out.metrics.blocked_by_budget.is_empty() {
            budget_exhausted_at = Some(t);
        }
        idle_cf += carbon_cost_unchecked(xi, idle_energy);
        per_slot.push(out.metrics);
        state = out.state;
        ledger = out.ledger;
    }

    let cells = (n * t_max).max(1) as f64;
    let avg_aoi_slots = aoi_sum as f64 / cells;
    let slot_minutes = cfg.slot_duration / 60.0;
    let staleness: u128 = per_slot.iter().map(|m| m.staleness_cost as u128).sum();
    Ok(EpisodeResult {
        policy: policy.name().to_string(),
        policy_metadata: policy.metadata(),
        region: trace.region_label.clone(),
        seed: cfg.rng_seed,
        gate_enabled,
        config_digest: config_digest(cfg),
        num_sources: n,
        horizon: t_max,
        slot_minutes,
        cf_budget: ledger.cf_budget,
        duty_budget: ledger.duty_budget,
        avg_aoi_slots,
        avg_aoi_minutes: avg_aoi_slots * slot_minutes,
        avg_staleness: staleness as f64 / cells,
        total_cf: per_slot.iter().map(|m| m.cf_spent).sum(),
        total_duty: per_slot.iter().map(|m| m.duty_spent).sum(),
        total_energy: per_slot.iter().map(|m| m.energy_spent).sum(),
        total_activations: per_slot.iter().map(|m| m.activations as u64).sum(),
        total_deliveries: per_slot.iter().map(|m| m.deliveries as u64).sum(),
        total_drops: per_slot.iter().map(|m| m.drops as u64).sum(),
        per_slot,
        aoi_trajectories: traj,
        budget_exhausted_at,
        idle_cf,
    })
}
