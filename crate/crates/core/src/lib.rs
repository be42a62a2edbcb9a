//! Carbon-aware Age-of-Information status updating for an
//! N-source → gateway → server LPWAN pipeline.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: configuration, energy composition and carbon accounting primitives
//! - [`dynamics`]: the three-stage store-and-forward transition system with budget gating
//! - [`whittle`]: closed-form Whittle index, urgency polynomial and critical age
//! - [`policies`]: the index scheduler plus Round Robin and Random baselines
//! - [`calibration`]: projected dual ascent for the carbon and duty multipliers
//! - [`oracle`]: renewal analysis, exact finite-horizon DP and brute-force enumeration
//! - [`traces`]: carbon-intensity ingestion, zero-order-hold resampling, synthetic regions
//! - [`reporting`]: episode loop, sweeps, decision-boundary tables and file output
//! - [`validate`]: invariant and oracle suites shared by the CLI and the test targets

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod par;
pub mod policies;
pub mod reporting;
pub mod traces;
pub mod validate;
pub mod whittle;

pub use error::{Error, Result};
