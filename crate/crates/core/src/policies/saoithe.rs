//! Whittle-index scheduler: price each update at C(t) = λ·CF(ξ(t), E) + μ·C_duty,
//! score every source, and activate the top M strictly positive scores.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dynamics::{greedy_downstream, PolicyDecision, SourceState, SystemState};
use crate::error::Result;
use crate::model::{BudgetLedger, SimConfig};
use crate::par;
use crate::whittle::{buffered_index_unchecked, urgency_f64, IndexContext};

use super::Policy;

/// Which entity a positive score acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// Scores drive device activation only; gateway and server run greedily.
    #[default]
    Greedy,
    /// Scores drive device activation; a gateway forwards a buffered packet
    /// only when its buffered index is positive. Forwards do not use channel slots.
    Gated,
}

/// How an idle device with a packet already in the pipeline is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineAwareness {
    /// U(min(Δ, h)) − C with h the age of the freshest pending packet: a new
    /// update only buys the staleness that the pending one will not remove.
    #[default]
    InFlight,
    /// U(Δ) − C for every idle device.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaoitheParams {
    pub lambda: f64,
    pub mu: f64,
    pub e_tot: f64,
    pub c_duty_frac: f64,
    pub capacity: usize,
    pub tx_slots: u32,
    pub mode: IndexMode,
    pub pipeline: PipelineAwareness,
}

impl SaoitheParams {
    pub fn from_config(cfg: &SimConfig, lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            e_tot: cfg.energy.e_tot_per_update,
            c_duty_frac: cfg.duty_cost_frac(),
            capacity: cfg.channel_capacity,
            tx_slots: cfg.tx_duration_slots,
            mode: IndexMode::default(),
            pipeline: PipelineAwareness::default(),
        }
    }

    pub fn context(&self, xi_t: f64) -> IndexContext {
        IndexContext { lambda: self.lambda, mu: self.mu, xi_t, e_tot: self.e_tot, c_duty_frac: self.c_duty_frac }
    }
}

#[derive(Debug, Clone)]
pub struct Saoithe {
    pub params: SaoitheParams,
}

impl Saoithe {
    pub fn new(params: SaoitheParams) -> Result<Self> {
        params.context(0.0).check()?;
        Ok(Self { params })
    }

    /// Device score of one source; `None` for busy devices (never selected).
    #[inline]
    pub fn device_index(&self, s: &SourceState, cost: f64) -> Option<f64> {
        if s.dev_busy {
            return None;
        }
        let age = match self.params.pipeline {
            PipelineAwareness::Literal => s.aoi,
            PipelineAwareness::InFlight => match s.freshest_pending_age(self.params.tx_slots) {
                Some(h) => h.min(s.aoi),
                None => s.aoi,
            },
        };
        Some(urgency_f64(age as u64) - cost)
    }

    /// Device scores for all sources, busy devices mapped to −∞.
    pub fn indices(&self, state: &SystemState, xi_t: f64) -> Vec<f64> {
        let cost = self.params.context(xi_t).cost();
        par::map(&state.sources, |s| self.device_index(s, cost).unwrap_or(f64::NEG_INFINITY))
    }
}

/// Sources ordered by descending score, lower id first on ties.
pub fn rank_order(indices: &[f64]) -> Vec<usize> {
    let mut order: Vec<(f64, u32)> = indices.iter().enumerate().map(|(i, &w)| (w, i as u32)).collect();
    par::sort_unstable_by(&mut order, cmp_desc);
    order.into_iter().map(|(_, i)| i as usize).collect()
}

#[inline]
fn cmp_desc(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Up to `m` sources with strictly positive score, best first.
pub fn select_top_m(indices: &[f64], m: usize) -> Vec<usize> {
    if m == 0 {
        return Vec::new();
    }
    let mut cand: Vec<(f64, u32)> =
        indices.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, &w)| (w, i as u32)).collect();
    par::sort_unstable_by(&mut cand, cmp_desc);
    cand.truncate(m);
    cand.into_iter().map(|(_, i)| i as usize).collect()
}

impl Policy for Saoithe {
    fn name(&self) -> &'static str {
        "saoithe"
    }

    fn reset(&mut self, _seed: u64) {}

    fn decide(&mut self, state: &SystemState, xi_t: f64, _ledger: &BudgetLedger) -> Result<PolicyDecision> {
        let n = state.len();
        let cost = self.params.context(xi_t).cost();
        let indices = self.indices(state, xi_t);
        let mut d = PolicyDecision::idle(n);
        for i in select_top_m(&indices, self.params.capacity) {
            d.a_dev[i] = true;
        }
        greedy_downstream(state, &mut d);
        if self.params.mode == IndexMode::Gated {
            for (i, s) in state.sources.iter().enumerate() {
                if d.a_gw[i] {
                    d.a_gw[i] = buffered_index_unchecked(s.aoi, s.gw_buf_age, cost) > 0.0;
                }
            }
        }
        Ok(d)
    }

    fn metadata(&self) -> serde_json::Value {
        serde_json::to_value(self.params).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(cost: f64, m: usize) -> Saoithe {
        Saoithe::new(SaoitheParams {
            lambda: cost,
            mu: 0.0,
            e_tot: 1.0,
            c_duty_frac: 0.0,
            capacity: m,
            tx_slots: 1,
            mode: IndexMode::Greedy,
            pipeline: PipelineAwareness::InFlight,
        })
        .unwrap()
    }

    fn ledger() -> BudgetLedger {
        BudgetLedger { cf_spent: 0.0, duty_spent: 0.0, cf_budget: f64::INFINITY, duty_budget: f64::INFINITY }
    }

    const XI_ONE_GRAM: f64 = crate::model::JOULES_PER_KWH;

    #[test]
    fn example_top_one() {
        let st = SystemState::new([5, 2, 9].iter().map(|&a| SourceState::fresh(a)).collect());
        let d = policy(13.0, 1).decide(&st, XI_ONE_GRAM, &ledger()).unwrap();
        assert_eq!(d.a_dev, vec![false, false, true]);
        let idx = policy(13.0, 1).indices(&st, XI_ONE_GRAM);
        assert_eq!(idx[0], 112.0);
        assert_eq!(idx[1], 0.0);
    }

    #[test]
    fn zero_index_excluded_even_when_capacity_slack() {
        let st = SystemState::new([5, 2, 9].iter().map(|&a| SourceState::fresh(a)).collect());
        let d = policy(13.0, 8).decide(&st, XI_ONE_GRAM, &ledger()).unwrap();
        assert_eq!(d.a_dev, vec![true, false, true]);
    }

    #[test]
    fn huge_cost_selects_nothing() {
        let st = SystemState::uniform(4, 288);
        let d = policy(1e12, 8).decide(&st, XI_ONE_GRAM, &ledger()).unwrap();
        assert_eq!(d.activations(), 0);
    }

    #[test]
    fn free_updates_activate_all_idle() {
        let mut st = SystemState::uniform(5, 1);
        st.sources[3].dev_busy = true;
        st.sources[3].dev_timer = 2;
        let d = policy(0.0, 8).decide(&st, XI_ONE_GRAM, &ledger()).unwrap();
        assert_eq!(d.a_dev, vec![true, true, true, false, true]);
    }

    #[test]
    fn in_flight_packet_suppresses_reactivation() {
        let mut s = SourceState::fresh(9);
        s.gw_buf_age = 1;
        let st = SystemState::new(vec![s]);
        let aware = policy(5.0, 1).decide(&st, XI_ONE_GRAM, &ledger()).unwrap();
        assert_eq!(aware.a_dev, vec![false]);
        assert_eq!(aware.a_gw, vec![true]);
        let mut literal = policy(5.0, 1);
        literal.params.pipeline = PipelineAwareness::Literal;
        assert_eq!(literal.decide(&st, XI_ONE_GRAM, &ledger()).unwrap().a_dev, vec![true]);
    }

    #[test]
    fn gated_mode_holds_low_value_forwards() {
        let mut s = SourceState::fresh(3);
        s.gw_buf_age = 2;
        let st = SystemState::new(vec![s]);
        let mut p = policy(50.0, 1);
        p.params.mode = IndexMode::Gated;
        // U(3) − U(2) − 50 < 0.
        assert_eq!(p.decide(&st, XI_ONE_GRAM, &ledger()).unwrap().a_gw, vec![false]);
        p.params.lambda = 1.0;
        assert_eq!(p.decide(&st, XI_ONE_GRAM, &ledger()).unwrap().a_gw, vec![true]);
    }

    #[test]
    fn rank_order_breaks_ties_by_id() {
        assert_eq!(rank_order(&[1.0, 3.0, 3.0, -1.0]), vec![1, 2, 0, 3]);
        assert_eq!(select_top_m(&[1.0, 3.0, 3.0, -1.0, 0.0], 2), vec![1, 2]);
        assert_eq!(select_top_m(&[1.0, 3.0], 0), Vec::<usize>::new());
    }

    fn brute_top_m(idx: &[f64], m: usize) -> Vec<usize> {
        let n = idx.len();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if set.len() > m || set.iter().any(|&i| idx[i] <= 0.0) {
                continue;
            }
            let score: f64 = set.iter().map(|&i| idx[i]).sum();
            let better = match &best {
                None => true,
                Some((b, s)) => score > *s || (score == *s && (set.len() > b.len() || (set.len() == b.len() && set < *b))),
            };
            if better {
                best = Some((set, score));
            }
        }
        best.map(|(s, _)| s).unwrap_or_default()
    }

    proptest::proptest! {
        #[test]
        fn matches_exhaustive_top_m(idx in proptest::collection::vec(-20i32..40, 1..=12), m in 0usize..6) {
            // Distinct integer scores keep the exhaustive optimum unique.
            let idx: Vec<f64> = idx.iter().enumerate().map(|(i, &v)| v as f64 + i as f64 * 1e-3).collect();
            let mut fast = select_top_m(&idx, m);
            fast.sort();
            proptest::prop_assert_eq!(fast, brute_top_m(&idx, m));
        }

        #[test]
        fn affine_rescaling_keeps_selection(idx in proptest::collection::vec(-50.0..50.0f64, 1..40), a in 0.01..100.0f64, m in 1usize..8) {
            let scaled: Vec<f64> = idx.iter().map(|w| a * w).collect();
            proptest::prop_assert_eq!(select_top_m(&idx, m), select_top_m(&scaled, m));
            proptest::prop_assert_eq!(rank_order(&idx), rank_order(&scaled));
        }
    }
}
