//! Fixed-period baseline: source n is due whenever (t − offset_n) mod p = 0.
//! Due sources beyond the channel capacity stay due until served.

use serde::{Deserialize, Serialize};

use crate::dynamics::{greedy_downstream, PolicyDecision, SystemState};
use crate::error::{Error, Result};
use crate::model::BudgetLedger;

use super::Policy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRobinParams {
    pub period: usize,
    pub phase_offsets: Vec<usize>,
}

impl RoundRobinParams {
    /// Offsets n mod p, spreading sources over the period.
    pub fn staggered(period: usize, num_sources: usize) -> Self {
        let p = period.max(1);
        Self { period, phase_offsets: (0..num_sources).map(|n| n % p).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct RoundRobin {
    pub params: RoundRobinParams,
    capacity: usize,
    pending: Vec<bool>,
}

impl RoundRobin {
    pub fn new(params: RoundRobinParams, capacity: usize) -> Result<Self> {
        if params.period == 0 {
            return Err(Error::domain("round robin period must be at least 1"));
        }
        let n = params.phase_offsets.len();
        Ok(Self { params, capacity, pending: vec![false; n] })
    }
}

impl Policy for RoundRobin {
    fn name(&self) -> &'static str {
        "round_robin"
    }

    fn reset(&mut self, _seed: u64) {
        self.pending.iter_mut().for_each(|p| *p = false);
    }

    fn decide(&mut self, state: &SystemState, _xi_t: f64, _ledger: &BudgetLedger) -> Result<PolicyDecision> {
        let n = state.len();
        if n != self.pending.len() {
            return Err(Error::contract(format!("round robin configured for {} sources, got {n}", self.pending.len())));
        }
        let p = self.params.period;
        let t = state.slot;
        let mut d = PolicyDecision::idle(n);
        let mut used = 0;
        for (i, s) in state.sources.iter().enumerate() {
            let off = self.params.phase_offsets[i] % p;
            if t >= off && (t - off).is_multiple_of(p) {
                self.pending[i] = true;
            }
            if self.pending[i] && !s.dev_busy && used < self.capacity {
                d.a_dev[i] = true;
                self.pending[i] = false;
                used += 1;
            }
        }
        greedy_downstream(state, &mut d);
        Ok(d)
    }

    fn metadata(&self) -> serde_json::Value {
        serde_json::json!({ "period": self.params.period, "capacity": self.capacity })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> BudgetLedger {
        BudgetLedger { cf_spent: 0.0, duty_spent: 0.0, cf_budget: f64::INFINITY, duty_budget: f64::INFINITY }
    }

    #[test]
    fn staggered_cycles_one_per_slot() {
        let mut rr = RoundRobin::new(RoundRobinParams::staggered(3, 3), 8).unwrap();
        let mut st = SystemState::uniform(3, 1);
        let mut who = Vec::new();
        for t in 0..6 {
            st.slot = t;
            let d = rr.decide(&st, 100.0, &ledger()).unwrap();
            assert_eq!(d.activations(), 1);
            who.push(d.a_dev.iter().position(|&a| a).unwrap());
        }
        assert_eq!(who, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn capacity_overflow_is_deferred() {
        let mut rr = RoundRobin::new(RoundRobinParams { period: 2, phase_offsets: vec![0; 10] }, 8).unwrap();
        let mut st = SystemState::uniform(10, 1);
        let d = rr.decide(&st, 1.0, &ledger()).unwrap();
        assert_eq!(d.activations(), 8);
        assert_eq!(&d.a_dev[..8], &[true; 8]);
        st.slot = 1;
        let d = rr.decide(&st, 1.0, &ledger()).unwrap();
        assert_eq!(d.a_dev.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect::<Vec<_>>(), vec![8, 9]);
    }

    #[test]
    fn busy_source_is_skipped() {
        let mut rr = RoundRobin::new(RoundRobinParams::staggered(1, 2), 8).unwrap();
        let mut st = SystemState::uniform(2, 1);
        st.sources[0].dev_busy = true;
        st.sources[0].dev_timer = 2;
        let d = rr.decide(&st, 1.0, &ledger()).unwrap();
        assert_eq!(d.a_dev, vec![false, true]);
    }

    #[test]
    fn zero_period_rejected() {
        assert!(RoundRobin::new(RoundRobinParams { period: 0, phase_offsets: vec![0] }, 1).is_err());
    }
}
