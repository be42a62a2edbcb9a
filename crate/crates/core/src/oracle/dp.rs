//! Exact finite-horizon dynamic programming on the reduced chain: unit
//! uplink/forward timers, greedy gateway and server, per-slot Lagrangian
//! cost Σ_n [Δ² + λ·CF(ξ(t), E)·a + μ·C_duty·a] at fixed multipliers.
//!
//! The transition rules are written out here independently of
//! [`crate::dynamics`] so that the two can be cross-checked.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, SourceState, SystemState};
use crate::error::{Error, Result};
use crate::model::{carbon_cost_unchecked, EnergyAttribution};

pub const MAX_SOURCES: usize = 2;
pub const MAX_HORIZON: usize = 30;
pub const MAX_AOI_CAP: u32 = 8;
pub const STATE_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpProblem {
    pub num_sources: usize,
    pub horizon: usize,
    pub aoi_cap: u32,
    pub capacity: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Carbon intensity per slot, length `horizon`.
    pub xi: Vec<f64>,
    pub e_tot: f64,
    pub c_duty_frac: f64,
    /// Initial AoI per source; buffers start empty.
    pub initial_aoi: Vec<u32>,
}

impl DpProblem {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.num_sources == 0 || self.num_sources > MAX_SOURCES {
            errs.push(format!("num_sources must be in 1..={MAX_SOURCES}, got {}", self.num_sources));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            errs.push(format!("horizon must be in 1..={MAX_HORIZON}, got {}", self.horizon));
        }
        if self.aoi_cap == 0 || self.aoi_cap > MAX_AOI_CAP {
            errs.push(format!("aoi_cap must be in 1..={MAX_AOI_CAP}, got {}", self.aoi_cap));
        }
        if self.xi.len() != self.horizon {
            errs.push(format!("xi has {} entries for horizon {}", self.xi.len(), self.horizon));
        }
        if self.xi.iter().any(|x| !(*x >= 0.0)) {
            errs.push("xi must be non-negative".into());
        }
        if !(self.lambda >= 0.0) || !(self.mu >= 0.0) {
            errs.push("multipliers must be non-negative".into());
        }
        if !(self.e_tot >= 0.0) || !(self.c_duty_frac >= 0.0) {
            errs.push("energy and duty cost must be non-negative".into());
        }
        if self.initial_aoi.len() != self.num_sources || self.initial_aoi.iter().any(|&a| a == 0 || a > self.aoi_cap) {
            errs.push("initial_aoi needs one value in 1..=aoi_cap per source".into());
        }
        if !errs.is_empty() {
            return Err(Error::domain(errs.join("; ")));
        }
        let estimate = self.state_estimate();
        if estimate > STATE_GUARD {
            return Err(Error::SizeGuard { what: "dp joint states", estimate, limit: STATE_GUARD });
        }
        Ok(())
    }

    /// Upper bound on joint states over the horizon: (cap·(cap+1)²)^N · T.
    pub fn state_estimate(&self) -> u128 {
        let c = self.aoi_cap as u128;
        let per_source = c * (c + 1) * (c + 1);
        per_source.saturating_pow(self.num_sources as u32).saturating_mul(self.horizon as u128)
    }

    /// Activation cost of one update in slot `t`.
    pub fn update_cost(&self, t: usize) -> f64 {
        self.lambda * carbon_cost_unchecked(self.xi[t], self.e_tot) + self.mu * self.c_duty_frac
    }

    /// Production transition system configured as the reduced chain, gate off.
    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            tx_slots: 1,
            fwd_slots: 1,
            aoi_cap: self.aoi_cap,
            capacity: self.capacity,
            e_tot: self.e_tot,
            attribution: EnergyAttribution::Activation,
            shares: (self.e_tot, 0.0, 0.0),
            duty_cost_frac: self.c_duty_frac,
            duty_increment: 0.0,
            gate: false,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState::new(self.initial_aoi.iter().map(|&a| SourceState::fresh(a)).collect())
    }
}

/// Per-source state of the reduced chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub aoi: u32,
    /// Age at the gateway, 0 when empty.
    pub gw: u32,
    /// Age at the server, 0 when empty.
    pub sv: u32,
}

impl ChainState {
    /// Projection of a full source state; `None` if it is not a reduced-chain state.
    pub fn from_source(s: &SourceState) -> Option<Self> {
        if s.dev_busy || s.gw_busy {
            return None;
        }
        Some(Self { aoi: s.aoi, gw: s.gw_buf_age, sv: s.sv_buf_age })
    }

    fn next(self, activate: bool, cap: u32) -> Self {
        // Server processes whatever it holds; the gateway forwards whatever it
        // holds and the packet reaches the server one slot older; a fresh
        // uplink lands at the gateway one slot after generation.
        let aoi = if self.sv > 0 { self.sv + 1 } else { self.aoi + 1 };
        let sv = if self.gw > 0 { self.gw + 1 } else { 0 };
        let gw = if activate { 1 } else { 0 };
        Self { aoi: aoi.min(cap), gw: gw.min(cap), sv: sv.min(cap) }
    }
}

pub type JointState = Vec<ChainState>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub optimal_cost: f64,
    /// `policy[t]` maps each reachable joint state at slot t to the optimal activation vector.
    pub policy: Vec<Vec<(JointState, Vec<bool>)>>,
}

impl DpSolution {
    pub fn action(&self, t: usize, state: &[ChainState]) -> Option<&[bool]> {
        let row = self.policy.get(t)?;
        row.binary_search_by(|(s, _)| s.as_slice().cmp(state)).ok().map(|i| row[i].1.as_slice())
    }

    /// Optimal action for a full system state, when it lies on the reduced chain.
    pub fn action_for(&self, t: usize, state: &SystemState) -> Option<&[bool]> {
        let js: Option<JointState> = state.sources.iter().map(ChainState::from_source).collect();
        self.action(t, &js?)
    }
}

/// Activation vectors with at most `capacity` ones, fewest activations first.
pub(crate) fn action_set(n: usize, capacity: usize) -> Vec<Vec<bool>> {
    let mut out: Vec<Vec<bool>> = (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= capacity)
        .map(|m| (0..n).map(|i| m & (1 << i) != 0).collect())
        .collect();
    out.sort_by_key(|a| a.iter().filter(|&&x| x).count());
    out
}

fn staleness(js: &[ChainState]) -> f64 {
    js.iter().map(|s| (s.aoi as f64) * (s.aoi as f64)).sum()
}

/// Backward induction; ties resolve to the action listed first (fewest activations).
pub fn exact_dp(problem: &DpProblem) -> Result<DpSolution> {
    problem.validate()?;
    let cap = problem.aoi_cap;
    let actions = action_set(problem.num_sources, problem.capacity);
    let step = |js: &[ChainState], a: &[bool]| -> JointState {
        js.iter().zip(a).map(|(s, &act)| s.next(act, cap)).collect()
    };

    // Forward pass: reachable states per slot.
    let init: JointState = problem.initial_aoi.iter().map(|&aoi| ChainState { aoi, gw: 0, sv: 0 }).collect();
    let mut layers: Vec<Vec<JointState>> = vec![vec![init]];
    for _ in 1..problem.horizon {
        let mut next: Vec<JointState> = layers
            .last()
            .unwrap()
            .iter()
            .flat_map(|js| actions.iter().map(|a| step(js, a)).collect::<Vec<_>>())
            .collect();
        next.sort();
        next.dedup();
        layers.push(next);
    }

    // Backward pass.
    let mut value_next: HashMap<JointState, f64> = HashMap::new();
    let mut policy: Vec<Vec<(JointState, Vec<bool>)>> = vec![Vec::new(); problem.horizon];
    for t in (0..problem.horizon).rev() {
        let unit = problem.update_cost(t);
        let last = t + 1 == problem.horizon;
        let mut value = HashMap::with_capacity(layers[t].len());
        let mut row = Vec::with_capacity(layers[t].len());
        for js in &layers[t] {
            let base = staleness(js);
            let mut best: Option<(f64, &Vec<bool>)> = None;
            for a in &actions {
                let k = a.iter().filter(|&&x| x).count() as f64;
                let future = if last { 0.0 } else { value_next[&step(js, a)] };
                let q = base + k * unit + future;
                if best.is_none_or(|(b, _)| q < b) {
                    best = Some((q, a));
                }
            }
            let (q, a) = best.expect("action set contains the no-op");
            value.insert(js.clone(), q);
            row.push((js.clone(), a.clone()));
        }
        policy[t] = row;
        value_next = value;
    }
    let init = &layers[0][0];
    Ok(DpSolution { optimal_cost: value_next[init], policy })
}
