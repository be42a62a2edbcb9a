//! Closed-form Whittle index for the quadratic-staleness source model.
//!
//! The urgency polynomial U(x) = (4x³ + 9x² + 5x)/6 is the indifference
//! subsidy between transmitting at age x and at age x+1 in the renewal
//! model with zero transmission cost. The index subtracts the aggregated
//! per-update cost C = λ·CF(ξ, E_tot) + μ·C_duty.
//!
//! Exact integer versions are provided for identity checks; the scheduler
//! hot path uses `f64`. For x ≤ 2^17 the `f64` urgency is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::carbon_cost_unchecked;

/// Prices and physical constants that turn an update into a scalar cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexContext {
    /// Carbon shadow price, per gram CO₂eq.
    pub lambda: f64,
    /// Duty shadow price, per normalised airtime.
    pub mu: f64,
    /// Carbon intensity of the current slot (gCO₂/kWh).
    pub xi_t: f64,
    /// Energy of one update (J).
    pub e_tot: f64,
    /// Airtime of one update relative to the slot length.
    pub c_duty_frac: f64,
}

impl IndexContext {
    pub fn new(lambda: f64, mu: f64, xi_t: f64, e_tot: f64, c_duty_frac: f64) -> Result<Self> {
        let ctx = Self { lambda, mu, xi_t, e_tot, c_duty_frac };
        ctx.check()?;
        Ok(ctx)
    }

    /// A context whose aggregated cost is exactly `cost` (λ = cost, one gram per update).
    pub fn with_cost(cost: f64) -> Self {
        Self { lambda: cost, mu: 0.0, xi_t: crate::model::JOULES_PER_KWH, e_tot: 1.0, c_duty_frac: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.mu >= 0.0) {
            return Err(Error::domain(format!("multipliers must be non-negative (lambda={}, mu={})", self.lambda, self.mu)));
        }
        if !(self.xi_t >= 0.0) || !(self.e_tot >= 0.0) || !(self.c_duty_frac >= 0.0) {
            return Err(Error::domain("intensity, energy and duty cost must be non-negative"));
        }
        Ok(())
    }

    pub fn at_xi(self, xi_t: f64) -> Self {
        Self { xi_t, ..self }
    }

    /// C = λ·CF(ξ, E_tot) + μ·C_duty.
    #[inline]
    pub fn cost(&self) -> f64 {
        self.lambda * carbon_cost_unchecked(self.xi_t, self.e_tot) + self.mu * self.c_duty_frac
    }
}

/// 6·U(x) = 4x³ + 9x² + 5x, exact.
#[inline]
pub fn urgency6_exact(x: u64) -> u128 {
    let x = x as u128;
    x * (4 * x * x + 9 * x + 5)
}

/// U(x), exact. The numerator x(x+1)(4x+5) is always divisible by 6.
pub fn urgency_exact(x: u64) -> u128 {
    urgency6_exact(x) / 6
}

/// U(x) = (4x³ + 9x² + 5x)/6.
pub fn urgency(x: i64) -> Result<f64> {
    if x < 0 {
        return Err(Error::domain(format!("urgency is defined for non-negative ages, got {x}")));
    }
    Ok(urgency_f64(x as u64))
}

#[inline]
pub fn urgency_f64(x: u64) -> f64 {
    let x = x as f64;
    x * (x * (4.0 * x + 9.0) + 5.0) / 6.0
}

/// W(Δ) = U(Δ) − C.
#[inline]
pub fn whittle_index(aoi: u32, ctx: &IndexContext) -> f64 {
    urgency_f64(aoi as u64) - ctx.cost()
}

/// 6·W(Δ) for an integer cost, exact.
pub fn whittle_index6_exact(aoi: u64, cost: i128) -> i128 {
    urgency6_exact(aoi) as i128 - 6 * cost
}

/// Differential index of a buffered packet: [U(Δ) − U(h)] − C.
pub fn buffered_index(aoi: u32, buf_age: u32, ctx: &IndexContext) -> Result<f64> {
    if buf_age == 0 || aoi == 0 {
        return Err(Error::domain("buffered index needs aoi ≥ 1 and a non-empty buffer"));
    }
    if buf_age > aoi {
        return Err(Error::domain(format!("buffered packet age {buf_age} exceeds the delivered AoI {aoi}")));
    }
    Ok(buffered_index_unchecked(aoi, buf_age, ctx.cost()))
}

#[inline]
pub(crate) fn buffered_index_unchecked(aoi: u32, buf_age: u32, cost: f64) -> f64 {
    urgency_f64(aoi as u64) - urgency_f64(buf_age as u64) - cost
}

/// Smallest Δ ≥ 1 with W(Δ) > 0.
pub fn critical_age(ctx: &IndexContext) -> u64 {
    critical_age_for_cost(ctx.cost())
}

/// Smallest Δ ≥ 1 with U(Δ) > `cost`. Integer galloping search on the
/// monotone urgency, so the result is exact for any representable cost.
pub fn critical_age_for_cost(cost: f64) -> u64 {
    if cost.is_nan() {
        return 1;
    }
    let positive = |d: u64| urgency_f64(d) > cost;
    if positive(1) {
        return 1;
    }
    let mut lo = 1u64; // not positive
    let mut hi = 2u64;
    while !positive(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Outcome of a passive-set monotonicity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexabilityReport {
    pub passed: bool,
    pub checked: usize,
    /// First ν where the check failed, with a description.
    pub violation: Option<(f64, String)>,
}

/// Verifies indexability on `1..=aoi_range`: for every ν in the (increasing)
/// grid the passive set of the renewal-optimal threshold policy must contain
/// the passive set at every smaller ν, and must coincide with the states
/// whose index is below ν.
pub fn indexability_check(cost: f64, aoi_range: u32, nu_grid: &[f64]) -> IndexabilityReport {
    indexability_check_with(cost, aoi_range, nu_grid, |d| urgency_f64(d as u64) - cost)
}

/// [`indexability_check`] against an arbitrary index function.
pub fn indexability_check_with<F>(cost: f64, aoi_range: u32, nu_grid: &[f64], index: F) -> IndexabilityReport
where
    F: Fn(u32) -> f64,
{
    use crate::oracle::renewal::optimal_threshold;

    let fail = |nu: f64, msg: String, checked| IndexabilityReport { passed: false, checked, violation: Some((nu, msg)) };
    if nu_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return fail(nu_grid[0], "ν grid must be strictly increasing".into(), 0);
    }
    let h_max = aoi_range as u64 + 2;
    let mut prev_threshold: Option<u64> = None;
    for (i, &nu) in nu_grid.iter().enumerate() {
        let h = optimal_threshold(nu, cost, h_max).threshold;
        // Passive set {Δ < h}; nested iff h is non-decreasing.
        if let Some(p) = prev_threshold {
            if h < p {
                return fail(nu, format!("passive set shrank: threshold {p} -> {h}"), i);
            }
        }
        prev_threshold = Some(h);
        for d in 1..=aoi_range {
            let renewal_passive = (d as u64) < h;
            let index_passive = index(d) < nu;
            if renewal_passive != index_passive {
                return fail(
                    nu,
                    format!("state {d}: renewal says passive={renewal_passive}, index says passive={index_passive}"),
                    i,
                );
            }
        }
    }
    IndexabilityReport { passed: true, checked: nu_grid.len(), violation: None }
}
