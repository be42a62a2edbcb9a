//! Three-stage store-and-forward transition system: device uplink, gateway
//! buffering/forwarding, server processing. All ages are in slots and share
//! the convention `age = current slot − generation slot`, capped at the AoI cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{carbon_cost, carbon_cost_unchecked, BudgetLedger, EnergyAttribution, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceState {
    /// Destination-side age of information.
    pub aoi: u32,
    pub dev_busy: bool,
    /// Remaining uplink slots, including the current one.
    pub dev_timer: u32,
    /// Age of the packet held at the gateway, 0 when empty.
    pub gw_buf_age: u32,
    pub gw_busy: bool,
    pub gw_timer: u32,
    /// Age of the packet being forwarded while `gw_busy`.
    pub gw_fwd_age: u32,
    /// Age of the packet waiting at the server, 0 when empty.
    pub sv_buf_age: u32,
}

impl SourceState {
    pub fn fresh(aoi: u32) -> Self {
        Self {
            aoi,
            dev_busy: false,
            dev_timer: 0,
            gw_buf_age: 0,
            gw_busy: false,
            gw_timer: 0,
            gw_fwd_age: 0,
            sv_buf_age: 0,
        }
    }

    /// Age of the freshest update still travelling towards the server, if any.
    pub fn freshest_pending_age(&self, tx_slots: u32) -> Option<u32> {
        let mut best: Option<u32> = None;
        let mut consider = |age: u32| best = Some(best.map_or(age, |b| b.min(age)));
        if self.dev_busy {
            consider(tx_slots.saturating_sub(self.dev_timer));
        }
        if self.gw_buf_age > 0 {
            consider(self.gw_buf_age);
        }
        if self.gw_busy {
            consider(self.gw_fwd_age);
        }
        if self.sv_buf_age > 0 {
            consider(self.sv_buf_age);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub sources: Vec<SourceState>,
    pub slot: usize,
}

impl SystemState {
    pub fn new(sources: Vec<SourceState>) -> Self {
        Self { sources, slot: 0 }
    }

    /// Every source idle with empty buffers and the given AoI.
    pub fn uniform(num_sources: usize, aoi: u32) -> Self {
        Self::new(vec![SourceState::fresh(aoi); num_sources])
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub a_dev: Vec<bool>,
    pub a_gw: Vec<bool>,
    pub a_sv: Vec<bool>,
}

impl PolicyDecision {
    pub fn idle(n: usize) -> Self {
        Self { a_dev: vec![false; n], a_gw: vec![false; n], a_sv: vec![false; n] }
    }

    pub fn activations(&self) -> usize {
        self.a_dev.iter().filter(|&&a| a).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    /// Σ Δ² over sources, evaluated on the state entering the slot.
    pub staleness_cost: u64,
    pub activations: u32,
    pub deliveries: u32,
    /// Packets overwritten in a buffer by a newer arrival.
    pub drops: u32,
    pub energy_spent: f64,
    pub cf_spent: f64,
    pub duty_spent: f64,
    /// Sources whose activation was suppressed by the budget gate.
    pub blocked_by_budget: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SystemState,
    pub metrics: SlotMetrics,
    pub ledger: BudgetLedger,
}

/// May source `n` start a transmission this slot. Capacity is enforced at selection time.
pub fn feasibility_mask(state: &SystemState) -> Vec<bool> {
    state.sources.iter().map(|s| !s.dev_busy).collect()
}

/// Uplink completes during the slot.
pub fn uplink_indicator(src: &SourceState) -> bool {
    src.dev_busy && src.dev_timer == 1
}

/// Σ Δ² (quadratic staleness).
pub fn instantaneous_cost(state: &SystemState) -> u64 {
    state.sources.iter().map(|s| (s.aoi as u64) * (s.aoi as u64)).sum()
}

/// Forward every buffered gateway packet on an idle gateway and process every
/// buffered server packet.
pub fn greedy_downstream(state: &SystemState, decision: &mut PolicyDecision) {
    for (n, s) in state.sources.iter().enumerate() {
        decision.a_gw[n] = s.gw_buf_age > 0 && !s.gw_busy;
        decision.a_sv[n] = s.sv_buf_age > 0;
    }
}

/// Parameters of the transition system, derived from a validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub tx_slots: u32,
    pub fwd_slots: u32,
    pub aoi_cap: u32,
    pub capacity: usize,
    pub e_tot: f64,
    pub attribution: EnergyAttribution,
    /// (device, gateway, server) energy shares in joules.
    pub shares: (f64, f64, f64),
    /// Per-slot normalised airtime of one transmission.
    pub duty_cost_frac: f64,
    /// Ledger increment per transmission.
    pub duty_increment: f64,
    pub gate: bool,
}

impl Dynamics {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            tx_slots: cfg.tx_duration_slots,
            fwd_slots: cfg.fwd_duration_slots,
            aoi_cap: cfg.aoi_cap,
            capacity: cfg.channel_capacity,
            e_tot: cfg.energy.e_tot_per_update,
            attribution: cfg.energy.attribution,
            shares: cfg.energy.stage_shares(),
            duty_cost_frac: cfg.duty_cost_frac(),
            duty_increment: cfg.duty_increment(),
            gate: true,
        }
    }

    pub fn with_gate(mut self, gate: bool) -> Self {
        self.gate = gate;
        self
    }

    #[inline]
    fn cap(&self, age: u32) -> u32 {
        age.min(self.aoi_cap)
    }

    /// Sets the gateway and server actions to forward/process whenever possible.
    pub fn greedy_downstream(&self, state: &SystemState, decision: &mut PolicyDecision) {
        greedy_downstream(state, decision);
    }

    pub fn check_decision(&self, state: &SystemState, d: &PolicyDecision) -> Result<()> {
        let n = state.len();
        if d.a_dev.len() != n || d.a_gw.len() != n || d.a_sv.len() != n {
            return Err(Error::contract(format!(
                "decision vectors have lengths ({}, {}, {}) for {n} sources",
                d.a_dev.len(),
                d.a_gw.len(),
                d.a_sv.len()
            )));
        }
        let active = d.activations();
        if active > self.capacity {
            return Err(Error::contract(format!("{active} activations exceed channel capacity {}", self.capacity)));
        }
        for (i, s) in state.sources.iter().enumerate() {
            if d.a_dev[i] && s.dev_busy {
                return Err(Error::contract(format!("source {i} activated while its device is busy")));
            }
            if d.a_gw[i] && (s.gw_buf_age == 0 || s.gw_busy) {
                return Err(Error::contract(format!("gateway forward for source {i} without an idle gateway and a buffered packet")));
            }
            if d.a_sv[i] && s.sv_buf_age == 0 {
                return Err(Error::contract(format!("server processing for source {i} with an empty buffer")));
            }
        }
        Ok(())
    }

    /// Energy (joules) triggered for source `n` by `d` this slot, before gating.
    fn triggered_energy(&self, s: &SourceState, d: &PolicyDecision, n: usize) -> f64 {
        match self.attribution {
            EnergyAttribution::Activation => {
                if d.a_dev[n] {
                    self.e_tot
                } else {
                    0.0
                }
            }
            EnergyAttribution::Staged => {
                let (dev, gw, sv) = self.shares;
                let mut e = 0.0;
                if d.a_dev[n] {
                    e += dev;
                }
                if d.a_gw[n] && s.gw_buf_age > 0 {
                    e += gw;
                }
                if d.a_sv[n] && s.sv_buf_age > 0 {
                    e += sv;
                }
                e
            }
        }
    }

    /// Per-slot Lagrangian cost: Σ [Δ² + λ·CF(ξ, E_active) + μ·a_dev·C_duty].
    pub fn lagrangian_cost(&self, state: &SystemState, d: &PolicyDecision, xi: f64, lambda: f64, mu: f64) -> Result<f64> {
        if !(lambda >= 0.0) || !(mu >= 0.0) {
            return Err(Error::domain(format!("multipliers must be non-negative, got lambda={lambda}, mu={mu}")));
        }
        carbon_cost(xi, 0.0)?;
        let mut total = instantaneous_cost(state) as f64;
        for (n, s) in state.sources.iter().enumerate() {
            let e = self.triggered_energy(s, d, n);
            if e > 0.0 {
                total += lambda * carbon_cost_unchecked(xi, e);
            }
            if d.a_dev[n] {
                total += mu * self.duty_cost_frac;
            }
        }
        Ok(total)
    }

    /// One slot of the transition system with budget accounting.
    pub fn step(&self, state: &SystemState, decision: &PolicyDecision, xi: f64, ledger: &BudgetLedger) -> Result<StepOutcome> {
        self.check_decision(state, decision)?;
        if !(xi >= 0.0) {
            return Err(Error::domain(format!("carbon intensity must be non-negative, got {xi}")));
        }
        let mut metrics = SlotMetrics {
            staleness_cost: instantaneous_cost(state),
            activations: 0,
            deliveries: 0,
            drops: 0,
            energy_spent: 0.0,
            cf_spent: 0.0,
            duty_spent: 0.0,
            blocked_by_budget: Vec::new(),
        };
        let mut cf = ledger.cf_spent;
        let mut duty = ledger.duty_spent;

        // Downstream stages of in-flight packets are charged first and never gated.
        if self.attribution == EnergyAttribution::Staged {
            let (_, gw, sv) = self.shares;
            for (n, s) in state.sources.iter().enumerate() {
                let mut e = 0.0;
                if decision.a_gw[n] && s.gw_buf_age > 0 {
                    e += gw;
                }
                if decision.a_sv[n] && s.sv_buf_age > 0 {
                    e += sv;
                }
                if e > 0.0 {
                    let c = carbon_cost_unchecked(xi, e);
                    metrics.energy_spent += e;
                    metrics.cf_spent += c;
                    cf += c;
                }
            }
        }

        let (charge_energy, reserve_energy) = match self.attribution {
            EnergyAttribution::Activation => (self.e_tot, self.e_tot),
            EnergyAttribution::Staged => (self.shares.0, self.e_tot),
        };
        let charge_cf = carbon_cost_unchecked(xi, charge_energy);
        let reserve_cf = carbon_cost_unchecked(xi, reserve_energy);

        let mut accepted = vec![false; state.len()];
        let mut reserved = cf;
        for (n, &want) in decision.a_dev.iter().enumerate() {
            if !want {
                continue;
            }
            if self.gate && (reserved + reserve_cf > ledger.cf_budget || duty + self.duty_increment > ledger.duty_budget) {
                metrics.blocked_by_budget.push(n);
                continue;
            }
            accepted[n] = true;
            reserved += reserve_cf;
            cf += charge_cf;
            duty += self.duty_increment;
            metrics.activations += 1;
            metrics.energy_spent += charge_energy;
            metrics.cf_spent += charge_cf;
            metrics.duty_spent += self.duty_increment;
        }

        let sources = state
            .sources
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let (next, delivered, dropped) = self.advance(s, accepted[n], decision.a_gw[n], decision.a_sv[n]);
                metrics.deliveries += delivered as u32;
                metrics.drops += dropped;
                next
            })
            .collect();

        Ok(StepOutcome {
            state: SystemState { sources, slot: state.slot + 1 },
            metrics,
            ledger: BudgetLedger { cf_spent: cf, duty_spent: duty, ..*ledger },
        })
    }

    /// Advances one source; returns (next state, delivered, packets dropped).
    fn advance(&self, s: &SourceState, activate: bool, forward: bool, process: bool) -> (SourceState, bool, u32) {
        let mut dropped = 0;

        // Device stage: an activation starts the uplink timer within this slot.
        let (busy, timer) = if activate { (true, self.tx_slots) } else { (s.dev_busy, s.dev_timer) };
        let arrival = busy && timer == 1;
        let (dev_busy, dev_timer) = if arrival || !busy { (false, 0) } else { (true, timer - 1) };

        // Gateway stage.
        let forwarding = forward && s.gw_buf_age > 0;
        let (g_busy, g_timer, g_age) = if forwarding {
            (true, self.fwd_slots, s.gw_buf_age)
        } else {
            (s.gw_busy, s.gw_timer, s.gw_fwd_age)
        };
        let fwd_done = g_busy && g_timer == 1;
        let (gw_busy, gw_timer, gw_fwd_age) = if fwd_done || !g_busy {
            (false, 0, 0)
        } else {
            (true, g_timer - 1, self.cap(g_age + 1))
        };
        let gw_buf_age = if arrival {
            if s.gw_buf_age > 0 && !forwarding {
                dropped += 1;
            }
            self.cap(self.tx_slots)
        } else if forwarding {
            0
        } else if s.gw_buf_age > 0 {
            self.cap(s.gw_buf_age + 1)
        } else {
            0
        };

        // Server stage.
        let deliver = process && s.sv_buf_age > 0;
        let sv_buf_age = if fwd_done {
            if s.sv_buf_age > 0 && !deliver {
                dropped += 1;
            }
            self.cap(g_age + 1)
        } else if deliver {
            0
        } else if s.sv_buf_age > 0 {
            self.cap(s.sv_buf_age + 1)
        } else {
            0
        };

        let aoi = if deliver { self.cap(s.sv_buf_age + 1) } else { self.cap(s.aoi + 1) };

        (
            SourceState { aoi, dev_busy, dev_timer, gw_buf_age, gw_busy, gw_timer, gw_fwd_age, sv_buf_age },
            deliver,
            dropped,
        )
    }
}
