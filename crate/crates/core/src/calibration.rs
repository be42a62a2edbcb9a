//! Shadow prices for the carbon and duty budgets by projected dual ascent on
//! ungated index-policy episodes.
//!
//! Iterates are kept in scaled form so one step size serves both constraints:
//! λ̂ = λ·CF(ξ̄, E) and μ̂ = μ·C_duty are the per-update costs (in staleness
//! units) each multiplier contributes at the mean intensity. The carbon
//! multiplier starts from the renewal estimate λ̂₀ = U(N·T/K), where K is the
//! number of updates the budget buys at ξ̄.
//!
//! Once an iterate on each side of the carbon constraint has been seen, any
//! step that would leave that bracket is replaced by its midpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{carbon_cost_unchecked, SimConfig};
use crate::policies::{IndexMode, PipelineAwareness, Saoithe, SaoitheParams};
use crate::reporting::{run_episode, EpisodeResult};
use crate::traces::CarbonTrace;
use crate::whittle::urgency_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub mu: f64,
    pub step_size: f64,
    pub iteration: usize,
    /// J_C − κ (grams).
    pub residual_cf: f64,
    /// J_D − D.
    pub residual_duty: f64,
    pub avg_aoi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Relative tolerance on each budget.
    pub tolerance: f64,
    pub max_iters: usize,
    pub mode: IndexMode,
    pub pipeline: PipelineAwareness,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { tolerance: 0.01, max_iters: 200, mode: IndexMode::Greedy, pipeline: PipelineAwareness::InFlight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub lambda_star: f64,
    pub mu_star: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the returned multipliers are the best feasible iterate rather
    /// than a converged one.
    pub fallback: bool,
    pub trace: Vec<DualState>,
}

/// (J_C − κ, J_D − D) of a completed episode.
pub fn dual_residuals(result: &EpisodeResult) -> (f64, f64) {
    (result.total_cf - result.cf_budget, result.total_duty - result.duty_budget)
}

fn normalized(residual: f64, budget: f64) -> f64 {
    if budget.is_infinite() {
        -1.0
    } else if budget > 0.0 {
        residual / budget
    } else {
        residual.signum()
    }
}

fn satisfied(residual: f64, budget: f64, multiplier: f64, tol: f64) -> bool {
    if budget.is_infinite() {
        return multiplier == 0.0;
    }
    let band = tol * budget;
    residual.abs() <= band || (residual <= band && multiplier == 0.0)
}

/// Index-policy episode (gate off) at the given multipliers.
pub fn ungated_episode(cfg: &SimConfig, trace: &CarbonTrace, lambda: f64, mu: f64, opts: &CalibrationOptions) -> Result<EpisodeResult> {
    let mut params = SaoitheParams::from_config(cfg, lambda, mu);
    params.mode = opts.mode;
    params.pipeline = opts.pipeline;
    let mut policy = Saoithe::new(params)?;
    run_episode(cfg, trace, &mut policy, false)
}

/// Returns (λ*, μ*, report).
pub fn calibrate(cfg: &SimConfig, trace: &CarbonTrace, opts: &CalibrationOptions) -> Result<(f64, f64, CalibrationReport)> {
    let kappa = cfg.cf_budget_grams();
    let duty = cfg.duty_budget;
    if !(kappa > 0.0) {
        return Err(Error::Infeasible(format!("carbon budget {kappa} g admits no transmissions")));
    }
    if !(duty > 0.0) {
        return Err(Error::Infeasible(format!("duty budget {duty} admits no transmissions")));
    }
    if !(opts.tolerance > 0.0) || opts.max_iters == 0 {
        return Err(Error::domain("tolerance must be positive and max_iters at least 1"));
    }
    if trace.len() < cfg.horizon_slots {
        return Err(Error::domain(format!("trace has {} slots, horizon needs {}", trace.len(), cfg.horizon_slots)));
    }
    let xi_bar = trace.xi[..cfg.horizon_slots].iter().sum::<f64>() / cfg.horizon_slots as f64;
    let lambda_scale = carbon_cost_unchecked(xi_bar, cfg.energy.e_tot_per_update);
    let mu_scale = cfg.duty_cost_frac();
    if !(lambda_scale > 0.0) {
        // Updates are carbon-free: the carbon constraint cannot bind.
        let r = ungated_episode(cfg, trace, 0.0, 0.0, opts)?;
        let (rc, rd) = dual_residuals(&r);
        let st = DualState { lambda: 0.0, mu: 0.0, step_size: 0.0, iteration: 1, residual_cf: rc, residual_duty: rd, avg_aoi: r.avg_aoi_slots };
        return Ok((0.0, 0.0, CalibrationReport { lambda_star: 0.0, mu_star: 0.0, converged: rc <= 0.0, iterations: 1, fallback: false, trace: vec![st] }));
    }

    let updates = kappa / lambda_scale;
    let h0 = (cfg.num_sources * cfg.horizon_slots) as f64 / updates;
    let lam0 = if h0.is_finite() { urgency_f64(h0.max(0.0).round() as u64) } else { 0.0 };
    let alpha0 = lam0.max(1.0);

    let (mut lam, mut mu) = (lam0, 0.0f64);
    // Largest over-spending and smallest within-budget λ̂ seen so far.
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    let mut trace_log = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;

    for k in 1..=opts.max_iters {
        let lambda = lam / lambda_scale;
        let mu_raw = if mu_scale > 0.0 { mu / mu_scale } else { 0.0 };
        let r = ungated_episode(cfg, trace, lambda, mu_raw, opts)?;
        let (rc, rd) = dual_residuals(&r);
        let step = alpha0 / (k as f64).sqrt();
        trace_log.push(DualState { lambda, mu: mu_raw, step_size: step, iteration: k, residual_cf: rc, residual_duty: rd, avg_aoi: r.avg_aoi_slots });

        let tol = opts.tolerance;
        if rc <= tol * kappa && rd <= tol * duty && best.is_none_or(|(_, _, a)| r.avg_aoi_slots < a) {
            best = Some((lambda, mu_raw, r.avg_aoi_slots));
        }
        if satisfied(rc, kappa, lam, tol) && satisfied(rd, duty, mu, tol) {
            return Ok((lambda, mu_raw, CalibrationReport { lambda_star: lambda, mu_star: mu_raw, converged: true, iterations: k, fallback: false, trace: trace_log }));
        }

        if rc > 0.0 {
            lo = Some(lo.map_or(lam, |l: f64| l.max(lam)));
        } else {
            hi = Some(hi.map_or(lam, |h: f64| h.min(lam)));
        }
        let mut next = (lam + step * normalized(rc, kappa)).max(0.0);
        if let (Some(l), Some(h)) = (lo, hi) {
            if l < h && !(next > l && next < h) {
                next = 0.5 * (l + h);
            }
        }
        lam = next;
        mu = (mu + step * normalized(rd, duty)).max(0.0);
    }

    let iterations = trace_log.len();
    match best {
        Some((l, m, _)) => Ok((l, m, CalibrationReport { lambda_star: l, mu_star: m, converged: false, iterations, fallback: true, trace: trace_log })),
        None => Err(Error::Infeasible(format!("no iterate within budget after {iterations} iterations"))),
    }
}
