//! Independent ground truth for the index scheduler.
//!
//! [`renewal`] re-derives the index from threshold-policy cycle costs without
//! touching the urgency polynomial; [`dp`] solves tiny instances of the
//! relaxed objective exactly by backward induction over its own copy of the
//! reduced chain; [`brute`] enumerates every action sequence through the
//! production [`crate::dynamics`] code. Each pair is kept independent so that
//! agreement between them is evidence rather than tautology.

pub mod brute;
pub mod dp;
pub mod renewal;

pub use brute::brute_force_enumerate;
pub use dp::{exact_dp, DpProblem, DpSolution};
pub use renewal::{cycle_cost, index_from_indifference, optimal_threshold, renewal_avg_cost, ThresholdPolicy};
