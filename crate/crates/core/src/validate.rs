//! Invariant and oracle suites shared by the command line and the test targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, PolicyDecision, SystemState};
use crate::model::{carbon_cost_unchecked, BudgetLedger, EnergyAttribution, SimConfig};
use crate::oracle::brute::policy_lagrangian_cost;
use crate::oracle::{brute_force_enumerate, exact_dp, index_from_indifference, DpProblem};
use crate::policies::{PipelineAwareness, Saoithe, SaoitheParams};
use crate::whittle::{critical_age_for_cost, indexability_check, urgency_f64, whittle_index6_exact};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Whittle,
    Oracle,
    Dynamics,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: &str, name: &str, passed: bool, detail: String) -> Self {
        Self { suite: suite.into(), name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}/{}: {}", if self.passed { "PASS" } else { "FAIL" }, self.suite, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Whittle => whittle_suite(),
        Suite::Oracle => oracle_suite(),
        Suite::Dynamics => dynamics_suite(),
        Suite::All => [whittle_suite(), oracle_suite(), dynamics_suite()].concat(),
    }
}

/// Twenty integer costs spanning zero to well past U(10⁴)/10.
pub fn identity_cost_grid() -> Vec<i128> {
    (0..20).map(|k| if k == 0 { 0 } else { 10i128.pow((k as u32).div_ceil(2)) * if k % 2 == 0 { 3 } else { 1 } }).collect()
}

/// Count of (Δ, C) pairs where 6·(U(Δ) − C) differs from 6·ν_indiff(Δ, C).
pub fn whittle_identity_mismatches(max_aoi: u64, costs: &[i128]) -> (usize, usize) {
    let mut bad = 0;
    let mut total = 0;
    for &c in costs {
        for d in 1..=max_aoi {
            total += 1;
            if whittle_index6_exact(d, c) != 6 * index_from_indifference(d, c) {
                bad += 1;
            }
        }
    }
    (total, bad)
}

pub fn indexability_nu_grid(points: usize) -> Vec<f64> {
    let top = urgency_f64(200);
    (0..points).map(|i| top * i as f64 / (points - 1).max(1) as f64).collect()
}

fn whittle_suite() -> Vec<Check> {
    let s = "whittle";
    let mut out = Vec::new();
    let (total, bad) = whittle_identity_mismatches(10_000, &identity_cost_grid());
    out.push(Check::new(s, "indifference_identity", bad == 0, format!("{bad} mismatches over {total} (Δ, C) pairs")));

    let mut worst: f64 = 0.0;
    let mut positive = true;
    for c in [0.0, 1.0, 10.0, 50.0, 1000.0] {
        let w = urgency_f64(1000) - c;
        worst = worst.max((w / 1e9 - 2.0 / 3.0).abs());
        let crit = critical_age_for_cost(c);
        positive &= (crit..crit + 5000).all(|d| urgency_f64(d) - c > 0.0);
    }
    out.push(Check::new(s, "cubic_asymptote", worst < 2e-3 && positive, format!("max |W/Δ³ − 2/3| = {worst:.2e} at Δ = 1000")));

    let grid = indexability_nu_grid(2001);
    let mut failures = Vec::new();
    for c in [0.0, 1.0, 10.0, 100.0, 1000.0] {
        let r = indexability_check(c, 200, &grid);
        if !r.passed {
            failures.push(format!("C={c}: {:?}", r.violation));
        }
    }
    out.push(Check::new(
        s,
        "indexability",
        failures.is_empty(),
        if failures.is_empty() { "passive sets nested for all costs".into() } else { failures.join("; ") },
    ));

    let costs: Vec<f64> = (0..25).map(|k| 1e6 * 10f64.powf(k as f64 / 4.0)).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        costs.iter().map(|&c| (c.ln(), (critical_age_for_cost(c) as f64).ln())).unzip();
    let slope = crate::reporting::stats::linear_fit(&lx, &ly).map_or(f64::NAN, |f| f.slope);
    out.push(Check::new(s, "cube_root_boundary", (0.28..=0.40).contains(&slope), format!("log-log slope {slope:.4}")));
    out
}

/// Random reduced-chain instance: N ≤ 2, T ≤ `max_horizon`, δ_max ≤ 8, with
/// per-update cost drawn below U(δ_max − 1) and constant or varying ξ.
pub fn random_dp_instance(rng: &mut ChaCha8Rng, max_horizon: usize) -> DpProblem {
    let n = rng.random_range(1..=2usize);
    let cap = rng.random_range(4..=8u32);
    let horizon = rng.random_range(4..=max_horizon.max(4));
    let capacity = rng.random_range(1..=n);
    let e_tot = 0.9251;
    let xi_bar = rng.random_range(50.0..450.0);
    let varying = rng.random_bool(0.5);
    let xi: Vec<f64> = (0..horizon)
        .map(|t| {
            if varying {
                let phase = rng.random_range(0.0..1.0);
                (xi_bar * (1.0 + 0.5 * (std::f64::consts::TAU * (t as f64 / 12.0 + phase)).sin())).max(0.0)
            } else {
                xi_bar
            }
        })
        .collect();
    let target = rng.random_range(1.0..urgency_f64(cap as u64 - 1));
    let c_duty_frac = 1.296 / 300.0;
    let mu_share = rng.random_range(0.0..0.2);
    let lambda = target * (1.0 - mu_share) / carbon_cost_unchecked(xi_bar, e_tot);
    let mu = target * mu_share / c_duty_frac;
    let initial_aoi = (0..n).map(|_| rng.random_range(1..=cap)).collect();
    DpProblem { num_sources: n, horizon, aoi_cap: cap, capacity, lambda, mu, xi, e_tot, c_duty_frac, initial_aoi }
}

pub fn saoithe_for(problem: &DpProblem) -> Saoithe {
    Saoithe::new(SaoitheParams {
        lambda: problem.lambda,
        mu: problem.mu,
        e_tot: problem.e_tot,
        c_duty_frac: problem.c_duty_frac,
        capacity: problem.capacity,
        tx_slots: 1,
        mode: Default::default(),
        pipeline: PipelineAwareness::InFlight,
    })
    .expect("non-negative prices")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub problem: DpProblem,
    pub dp_cost: f64,
    pub brute_cost: Option<f64>,
    pub saoithe_cost: f64,
    /// (SAOITHE − DP) / DP.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub instances: Vec<OracleInstance>,
}

impl OracleReport {
    pub fn bound_violations(&self) -> usize {
        self.instances.iter().filter(|i| i.saoithe_cost < i.dp_cost * (1.0 - 1e-12) - 1e-9).count()
    }

    pub fn within(&self, rel: f64) -> usize {
        self.instances.iter().filter(|i| i.gap <= rel).count()
    }

    pub fn brute_checked(&self) -> usize {
        self.instances.iter().filter(|i| i.brute_cost.is_some()).count()
    }

    pub fn brute_mismatches(&self) -> usize {
        self.instances
            .iter()
            .filter(|i| i.brute_cost.is_some_and(|b| (b - i.dp_cost).abs() > 1e-9 * (1.0 + b.abs())))
            .count()
    }
}

pub fn oracle_comparison(count: usize, max_horizon: usize, seed: u64) -> crate::Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<DpProblem> = (0..count).map(|_| random_dp_instance(&mut rng, max_horizon)).collect();
    let instances: Vec<crate::Result<OracleInstance>> = crate::par::map(&problems, |p| {
        let dp_cost = exact_dp(p)?.optimal_cost;
        let brute_cost = match brute_force_enumerate(p) {
            Ok(c) => Some(c),
            Err(Error::SizeGuard { .. }) => None,
            Err(e) => return Err(e),
        };
        let saoithe_cost = policy_lagrangian_cost(p, &mut saoithe_for(p), 0)?;
        let gap = (saoithe_cost - dp_cost) / dp_cost;
        Ok(OracleInstance { problem: p.clone(), dp_cost, brute_cost, saoithe_cost, gap })
    });
    Ok(OracleReport { seed, instances: instances.into_iter().collect::<crate::Result<_>>()? })
}

fn oracle_suite() -> Vec<Check> {
    let s = "oracle";
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mism = 0;
    for _ in 0..50 {
        let mut p = random_dp_instance(&mut rng, 10);
        p.num_sources = 1;
        p.capacity = 1;
        p.initial_aoi.truncate(1);
        match (exact_dp(&p), brute_force_enumerate(&p)) {
            (Ok(d), Ok(b)) if (d.optimal_cost - b).abs() <= 1e-9 * (1.0 + b.abs()) => {}
            _ => mism += 1,
        }
    }
    out.push(Check::new(s, "dp_equals_brute_single_source", mism == 0, format!("{mism} mismatches over 50 instances")));

    match oracle_comparison(50, 20, 7) {
        Ok(r) => {
            let n = r.instances.len();
            out.push(Check::new(
                s,
                "dp_lower_bound",
                r.bound_violations() == 0,
                format!("{} of {n} instances below the DP bound", r.bound_violations()),
            ));
            out.push(Check::new(
                s,
                "dp_equals_brute_mixed",
                r.brute_mismatches() == 0,
                format!("{} mismatches over {} enumerable instances", r.brute_mismatches(), r.brute_checked()),
            ));
            let ok = r.within(0.10);
            out.push(Check::new(s, "near_optimality", ok * 10 >= n * 9, format!("{ok} of {n} instances within 10% of the DP optimum")));
        }
        Err(e) => out.push(Check::new(s, "oracle_comparison", false, e.to_string())),
    }
    out
}

/// Per-source generation timestamps along the pipeline, advanced with
/// timestamp arithmetic only.
#[derive(Debug, Clone, Copy)]
struct Shadow {
    delivered_gen: i64,
    dev: Option<(i64, u32)>,
    gw_buf: Option<i64>,
    fwd: Option<(i64, u32)>,
    sv_buf: Option<i64>,
}

impl Shadow {
    fn step(&mut self, t: i64, act: bool, fwd: bool, proc: bool, tx: u32, fw: u32) {
        if act {
            self.dev = Some((t, tx));
        }
        let arrival = match self.dev {
            Some((g, 1)) => {
                self.dev = None;
                Some(g)
            }
            Some((g, r)) => {
                self.dev = Some((g, r - 1));
                None
            }
            None => None,
        };
        if fwd {
            if let Some(g) = self.gw_buf.take() {
                self.fwd = Some((g, fw));
            }
        }
        if let Some(g) = arrival {
            self.gw_buf = Some(g);
        }
        let done = match self.fwd {
            Some((g, 1)) => {
                self.fwd = None;
                Some(g)
            }
            Some((g, r)) => {
                self.fwd = Some((g, r - 1));
                None
            }
            None => None,
        };
        if proc {
            if let Some(g) = self.sv_buf.take() {
                self.delivered_gen = g;
            }
        }
        if let Some(g) = done {
            self.sv_buf = Some(g);
        }
    }
}

/// Runs `steps` random slots through the transition system and a timestamp
/// shadow; returns (steps, mismatching slots).
pub fn shadow_ledger_mismatches(steps: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut mismatches = 0;
    while done < steps {
        let n = rng.random_range(1..=4usize);
        let tx = rng.random_range(1..=3u32);
        let fw = rng.random_range(1..=3u32);
        let cap = if rng.random_bool(0.3) { rng.random_range(3..=12u32) } else { 10_000 };
        let capacity = rng.random_range(1..=n);
        let cfg = SimConfig {
            num_sources: n,
            channel_capacity: capacity,
            aoi_cap: cap,
            tx_duration_slots: tx,
            fwd_duration_slots: fw,
            ..SimConfig::table1(n, 1.0)
        };
        let mut dy = Dynamics::new(&cfg).with_gate(false);
        dy.attribution = EnergyAttribution::Activation;
        let ledger = BudgetLedger { cf_spent: 0.0, duty_spent: 0.0, cf_budget: f64::INFINITY, duty_budget: f64::INFINITY };
        let init: Vec<u32> = (0..n).map(|_| rng.random_range(1..=cap.min(50))).collect();
        let mut state = SystemState::new(init.iter().map(|&a| crate::dynamics::SourceState::fresh(a)).collect());
        let mut shadow: Vec<Shadow> = init
            .iter()
            .map(|&a| Shadow { delivered_gen: -(a as i64), dev: None, gw_buf: None, fwd: None, sv_buf: None })
            .collect();
        let p_act = rng.random_range(0.05..0.9);
        let p_fwd = rng.random_range(0.3..1.0);
        let p_proc = rng.random_range(0.3..1.0);
        let len = rng.random_range(50..400usize).min(steps - done);
        let age = |now: i64, g: i64| ((now - g) as u64).min(cap as u64) as u32;
        for t in 0..len as i64 {
            let mut d = PolicyDecision::idle(n);
            let mut used = 0;
            for (i, s) in state.sources.iter().enumerate() {
                if !s.dev_busy && used < capacity && rng.random_bool(p_act) {
                    d.a_dev[i] = true;
                    used += 1;
                }
                d.a_gw[i] = s.gw_buf_age > 0 && !s.gw_busy && rng.random_bool(p_fwd);
                d.a_sv[i] = s.sv_buf_age > 0 && rng.random_bool(p_proc);
            }
            let out = match dy.step(&state, &d, 100.0, &ledger) {
                Ok(o) => o,
                Err(_) => {
                    mismatches += 1;
                    break;
                }
            };
            let now = t + 1;
            let mut ok = true;
            for (i, sh) in shadow.iter_mut().enumerate() {
                sh.step(t, d.a_dev[i], d.a_gw[i], d.a_sv[i], tx, fw);
                let s = &out.state.sources[i];
                ok &= s.aoi == age(now, sh.delivered_gen);
                ok &= s.gw_buf_age == sh.gw_buf.map_or(0, |g| age(now, g));
                ok &= s.sv_buf_age == sh.sv_buf.map_or(0, |g| age(now, g));
                ok &= s.dev_busy == sh.dev.is_some();
                ok &= s.gw_busy == sh.fwd.is_some();
                if let Some((g, _)) = sh.fwd {
                    ok &= s.gw_fwd_age == age(now, g);
                }
            }
            if !ok {
                mismatches += 1;
            }
            state = out.state;
            done += 1;
        }
    }
    (done, mismatches)
}

fn dynamics_suite() -> Vec<Check> {
    let s = "dynamics";
    let (steps, bad) = shadow_ledger_mismatches(100_000, 99);
    vec![Check::new(s, "shadow_timestamp_ledger", bad == 0, format!("{bad} mismatches over {steps} random steps"))]
}
