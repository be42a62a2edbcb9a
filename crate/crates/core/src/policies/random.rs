//! Bernoulli baseline: every idle source transmits with probability p_tx,
//! giving geometric inter-transmission times with mean 1/p_tx.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{greedy_downstream, PolicyDecision, SystemState};
use crate::error::{Error, Result};
use crate::model::BudgetLedger;

use super::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub tx_probability: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Random {
    pub params: RandomParams,
    capacity: usize,
    rng: ChaCha8Rng,
}

impl Random {
    pub fn new(params: RandomParams, capacity: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&params.tx_probability) {
            return Err(Error::domain(format!("transmission probability must be in [0, 1], got {}", params.tx_probability)));
        }
        Ok(Self { params, capacity, rng: ChaCha8Rng::seed_from_u64(params.seed) })
    }
}

impl Policy for Random {
    fn name(&self) -> &'static str {
        "random"
    }

    fn reset(&mut self, seed: u64) {
        self.params.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn decide(&mut self, state: &SystemState, _xi_t: f64, _ledger: &BudgetLedger) -> Result<PolicyDecision> {
        let p = self.params.tx_probability;
        let mut hits: Vec<usize> = Vec::new();
        for (i, s) in state.sources.iter().enumerate() {
            // One draw per idle source keeps the stream aligned across capacity settings.
            if !s.dev_busy && self.rng.random_bool(p) {
                hits.push(i);
            }
        }
        if hits.len() > self.capacity {
            let mut keep: Vec<usize> = sample(&mut self.rng, hits.len(), self.capacity).into_iter().map(|k| hits[k]).collect();
            keep.sort_unstable();
            hits = keep;
        }
        let mut d = PolicyDecision::idle(state.len());
        for i in hits {
            d.a_dev[i] = true;
        }
        greedy_downstream(state, &mut d);
        Ok(d)
    }

    fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "tx_probability": self.params.tx_probability,
            "seed": self.params.seed,
            "capacity": self.capacity,
        })
    }
}
