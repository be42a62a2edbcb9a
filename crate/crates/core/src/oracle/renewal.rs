//! Renewal-cycle analysis of a single source under a threshold policy
//! (transmit iff Δ ≥ H, immediate update resets the age to 1).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub threshold: u64,
}

impl ThresholdPolicy {
    pub fn transmits(&self, aoi: u64) -> bool {
        aoi >= self.threshold
    }
}

/// Σ_{h=1}^{H} h² = H(H+1)(2H+1)/6.
pub fn cycle_cost(h: u64) -> u128 {
    let h = h as u128;
    h * (h + 1) * (2 * h + 1) / 6
}

/// Φ(H) = [J(H) + C + ν] / H.
pub fn renewal_avg_cost(h: u64, nu: f64, cost_c: f64) -> f64 {
    assert!(h >= 1, "threshold must be at least 1");
    (cycle_cost(h) as f64 + cost_c + nu) / h as f64
}

/// argmin_{H ∈ [1, h_max]} Φ(H), ties to the smaller H. Comparisons are
/// cross-multiplied so exact ties on integer inputs are detected exactly.
pub fn optimal_threshold(nu: f64, cost_c: f64, h_max: u64) -> ThresholdPolicy {
    let h_max = h_max.max(1);
    let k = cost_c + nu;
    let numer = |h: u64| cycle_cost(h) as f64 + k;
    let mut best = 1u64;
    for h in 2..=h_max {
        // Φ(h) < Φ(best)  ⇔  numer(h)·best < numer(best)·h
        if numer(h) * (best as f64) < numer(best) * (h as f64) {
            best = h;
        }
    }
    ThresholdPolicy { threshold: best }
}

/// Indifference subsidy between thresholds Δ and Δ+1:
/// ν = Δ·J(Δ+1) − (Δ+1)·J(Δ) − C, in exact integer arithmetic.
pub fn index_from_indifference(aoi: u64, cost_c: i128) -> i128 {
    let d = aoi as i128;
    d * cycle_cost(aoi + 1) as i128 - (d + 1) * cycle_cost(aoi) as i128 - cost_c
}

/// Floating-point variant of [`index_from_indifference`].
pub fn index_from_indifference_f64(aoi: u64, cost_c: f64) -> f64 {
    let d = aoi as f64;
    d * cycle_cost(aoi + 1) as f64 - (d + 1.0) * cycle_cost(aoi) as f64 - cost_c
}
