//! Exhaustive enumeration of activation sequences through the production
//! transition system, for cross-checking [`super::exact_dp`].

use crate::dynamics::{Dynamics, PolicyDecision, SystemState};
use crate::error::{Error, Result};
use crate::model::BudgetLedger;
use crate::policies::Policy;

use super::dp::{action_set, DpProblem};

pub const SEQUENCE_GUARD: u128 = 1_000_000;

fn unlimited_ledger() -> BudgetLedger {
    BudgetLedger { cf_spent: 0.0, duty_spent: 0.0, cf_budget: f64::INFINITY, duty_budget: f64::INFINITY }
}

fn decision(dy: &Dynamics, state: &SystemState, a_dev: &[bool]) -> PolicyDecision {
    let mut d = PolicyDecision::idle(state.len());
    d.a_dev.copy_from_slice(a_dev);
    dy.greedy_downstream(state, &mut d);
    d
}

/// Minimum total Lagrangian cost over every feasible action sequence.
pub fn brute_force_enumerate(problem: &DpProblem) -> Result<f64> {
    problem.validate()?;
    let dy = problem.dynamics();
    let actions = action_set(problem.num_sources, problem.capacity);
    let estimate = (actions.len() as u128).saturating_pow(problem.horizon as u32);
    if estimate > SEQUENCE_GUARD {
        return Err(Error::SizeGuard { what: "action sequences", estimate, limit: SEQUENCE_GUARD });
    }
    let search = Search { dy: &dy, problem, actions: &actions };
    let mut best = f64::INFINITY;
    search.dfs(&problem.initial_state(), &unlimited_ledger(), 0.0, &mut best)?;
    Ok(best)
}

struct Search<'a> {
    dy: &'a Dynamics,
    problem: &'a DpProblem,
    actions: &'a [Vec<bool>],
}

impl Search<'_> {
    fn dfs(&self, state: &SystemState, ledger: &BudgetLedger, acc: f64, best: &mut f64) -> Result<()> {
        let t = state.slot;
        if t == self.problem.horizon {
            *best = best.min(acc);
            return Ok(());
        }
        let xi = self.problem.xi[t];
        for a in self.actions {
            if a.iter().zip(&state.sources).any(|(&on, s)| on && s.dev_busy) {
                continue;
            }
            let d = decision(self.dy, state, a);
            let cost = self.dy.lagrangian_cost(state, &d, xi, self.problem.lambda, self.problem.mu)?;
            let out = self.dy.step(state, &d, xi, ledger)?;
            self.dfs(&out.state, &out.ledger, acc + cost, best)?;
        }
        Ok(())
    }
}

/// Total Lagrangian cost of `policy` on the instance (gate off). The policy's
/// downstream actions are used as given.
pub fn policy_lagrangian_cost(problem: &DpProblem, policy: &mut dyn Policy, seed: u64) -> Result<f64> {
    problem.validate()?;
    let dy = problem.dynamics();
    let mut state = problem.initial_state();
    let mut ledger = unlimited_ledger();
    policy.reset(seed);
    let mut total = 0.0;
    for t in 0..problem.horizon {
        let xi = problem.xi[t];
        let d = policy.decide(&state, xi, &ledger)?;
        total += dy.lagrangian_cost(&state, &d, xi, problem.lambda, problem.mu)?;
        let out = dy.step(&state, &d, xi, &ledger)?;
        state = out.state;
        ledger = out.ledger;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_dp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, t: usize, m: usize) -> DpProblem {
        let cap = rng.random_range(3..=8);
        DpProblem {
            num_sources: n,
            horizon: t,
            aoi_cap: cap,
            capacity: m,
            lambda: rng.random_range(0.0..200.0),
            mu: rng.random_range(0.0..50.0),
            xi: (0..t).map(|_| rng.random_range(1e6..6e6)).collect(),
            e_tot: 1.0,
            c_duty_frac: rng.random_range(0.0..1.0),
            initial_aoi: (0..n).map(|_| rng.random_range(1..=cap)).collect(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn matches_dp_on_random_single_source_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..50 {
            let t = rng.random_range(1..=10);
            let p = random_problem(&mut rng, 1, t, 1);
            let dp = exact_dp(&p).unwrap().optimal_cost;
            let bf = brute_force_enumerate(&p).unwrap();
            assert!(close(dp, bf), "instance {i}: dp {dp} vs brute {bf} ({p:?})");
        }
    }

    #[test]
    fn matches_dp_two_sources_one_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let p = random_problem(&mut rng, 2, 6, 1);
            let dp = exact_dp(&p).unwrap().optimal_cost;
            let bf = brute_force_enumerate(&p).unwrap();
            assert!(close(dp, bf), "dp {dp} vs brute {bf}");
        }
    }

    #[test]
    fn zero_capacity_never_transmits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_problem(&mut rng, 1, 5, 0);
        p.aoi_cap = 8;
        p.initial_aoi = vec![2];
        let expected = (2..7).map(|d| (d * d) as f64).sum::<f64>();
        assert_eq!(brute_force_enumerate(&p).unwrap(), expected);
    }

    #[test]
    fn guard_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_problem(&mut rng, 2, 20, 2);
        assert!(matches!(brute_force_enumerate(&p), Err(Error::SizeGuard { .. })));
    }
}
