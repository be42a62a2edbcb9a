//! Grid experiments over regions, budgets, source counts and policies.

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, CalibrationOptions};
use crate::error::Result;
use crate::model::SimConfig;
use crate::par;
use crate::policies::PolicySpec;
use crate::traces::{synthetic_trace, CarbonTrace, Region};

use super::episode::{run_episode, sha256_json, EpisodeResult};
use super::stats::{mean, t95_half_width};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Saoithe,
    RoundRobin,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Saoithe, PolicyKind::RoundRobin, PolicyKind::Random];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Saoithe => "saoithe",
            PolicyKind::RoundRobin => "round_robin",
            PolicyKind::Random => "random",
        }
    }
}

fn default_replications() -> usize {
    30
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub regions: Vec<Region>,
    /// Budgets in config units (see `SimConfig::cf_budget_scale`).
    pub kappas: Vec<f64>,
    pub num_sources: Vec<usize>,
    pub policies: Vec<PolicyKind>,
    /// Replications of the Random policy.
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace_seed: u64,
    #[serde(default = "default_true")]
    pub gate: bool,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    /// Template for every cell; N and κ are overwritten. Defaults to the
    /// reference deployment.
    #[serde(default)]
    pub base: Option<SimConfig>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            regions: Region::ALL.to_vec(),
            kappas: vec![0.5, 2.0, 5.0, 21.5],
            num_sources: vec![10, 50, 100],
            policies: PolicyKind::ALL.to_vec(),
            replications: default_replications(),
            seed: 0,
            trace_seed: 0,
            gate: true,
            calibration: CalibrationOptions::default(),
            base: None,
        }
    }
}

impl SweepSpec {
    pub fn cell_config(&self, num_sources: usize, kappa: f64) -> SimConfig {
        let base = self.base.clone().unwrap_or_default();
        SimConfig { num_sources, cf_budget: kappa, rng_seed: self.seed, ..base }
    }

    pub fn trace(&self, region: Region) -> Result<CarbonTrace> {
        let base = self.base.clone().unwrap_or_default();
        synthetic_trace(region, base.horizon_slots, base.slot_duration, self.trace_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub region: Region,
    pub num_sources: usize,
    pub kappa: f64,
    pub policy: PolicyKind,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        replications: usize,
        avg_aoi_slots: f64,
        avg_aoi_minutes: f64,
        /// 95% half-width in minutes; 0 for single runs.
        half_width_minutes: f64,
        total_cf: f64,
        cf_budget: f64,
        total_duty: f64,
        cf_prefix_violations: usize,
        duty_prefix_violations: usize,
        budget_exhausted_at: Option<usize>,
        lambda: Option<f64>,
        mu: Option<f64>,
        calibration_converged: Option<bool>,
        episode_digests: Vec<String>,
    },
    Failed {
        error: String,
    },
}

impl CellResult {
    pub fn avg_aoi_minutes(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Ok { avg_aoi_minutes, .. } => Some(*avg_aoi_minutes),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellResult>,
    pub digest: String,
    /// One representative episode per successful cell (first replication), for file output.
    #[serde(skip)]
    pub episodes: Vec<Option<EpisodeResult>>,
}

impl SweepResult {
    pub fn find(&self, region: Region, num_sources: usize, kappa: f64, policy: PolicyKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.region == region && c.num_sources == num_sources && c.kappa == kappa && c.policy == policy)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c.outcome, CellOutcome::Failed { .. })).count()
    }
}

/// Calibrates when needed, then runs the cell's episodes.
pub fn run_cell(
    cfg: &SimConfig,
    trace: &CarbonTrace,
    policy: PolicyKind,
    replications: usize,
    gate: bool,
    calibration: &CalibrationOptions,
) -> Result<(CellOutcome, EpisodeResult)> {
    let cfg = cfg.clone().validate()?;
    let (spec, lambda, mu, converged) = match policy {
        PolicyKind::Saoithe => {
            let (l, m, rep) = calibrate(&cfg, trace, calibration)?;
            let spec = PolicySpec::Saoithe { lambda: l, mu: m, mode: calibration.mode, pipeline: calibration.pipeline };
            (spec, Some(l), Some(m), Some(rep.converged))
        }
        PolicyKind::RoundRobin => (PolicySpec::RoundRobin { period: None }, None, None, None),
        PolicyKind::Random => (PolicySpec::Random { tx_probability: None }, None, None, None),
    };
    let reps = if policy == PolicyKind::Random { replications.max(1) } else { 1 };
    let runs: Vec<Result<EpisodeResult>> = par::map_range(reps, |r| {
        let c = SimConfig { rng_seed: cfg.rng_seed.wrapping_add(r as u64), ..cfg.clone() };
        let mut p = spec.build(&c, trace)?;
        run_episode(&c, trace, p.as_mut(), gate)
    });
    let runs: Vec<EpisodeResult> = runs.into_iter().collect::<Result<_>>()?;
    let aoi_slots: Vec<f64> = runs.iter().map(|r| r.avg_aoi_slots).collect();
    let aoi_min: Vec<f64> = runs.iter().map(|r| r.avg_aoi_minutes).collect();
    let cf: Vec<f64> = runs.iter().map(|r| r.total_cf).collect();
    let duty: Vec<f64> = runs.iter().map(|r| r.total_duty).collect();
    let outcome = CellOutcome::Ok {
        replications: reps,
        avg_aoi_slots: mean(&aoi_slots),
        avg_aoi_minutes: mean(&aoi_min),
        half_width_minutes: t95_half_width(&aoi_min),
        total_cf: mean(&cf),
        cf_budget: runs[0].cf_budget,
        total_duty: mean(&duty),
        cf_prefix_violations: runs.iter().map(|r| r.cf_prefix_violations()).sum(),
        duty_prefix_violations: runs.iter().map(|r| r.duty_prefix_violations()).sum(),
        budget_exhausted_at: runs[0].budget_exhausted_at,
        lambda,
        mu,
        calibration_converged: converged,
        episode_digests: runs.iter().map(|r| r.digest()).collect(),
    };
    let first = runs.into_iter().next().expect("at least one replication");
    Ok((outcome, first))
}

/// Runs every grid cell; failures are recorded and the sweep continues.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let traces: Vec<(Region, CarbonTrace)> =
        spec.regions.iter().map(|&r| spec.trace(r).map(|t| (r, t))).collect::<Result<_>>()?;
    let mut grid = Vec::new();
    for (ri, _) in traces.iter().enumerate() {
        for &n in &spec.num_sources {
            for &k in &spec.kappas {
                for &p in &spec.policies {
                    grid.push((ri, n, k, p));
                }
            }
        }
    }
    let results: Vec<(CellResult, Option<EpisodeResult>)> = par::map(&grid, |&(ri, n, kappa, policy)| {
        let (region, trace) = &traces[ri];
        let cfg = spec.cell_config(n, kappa);
        let (outcome, ep) = match run_cell(&cfg, trace, policy, spec.replications, spec.gate, &spec.calibration) {
            Ok((o, ep)) => (o, Some(ep)),
            Err(e) => (CellOutcome::Failed { error: e.to_string() }, None),
        };
        (CellResult { region: *region, num_sources: n, kappa, policy, outcome }, ep)
    });
    let (cells, episodes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let digest = sha256_json(&(spec, &cells));
    Ok(SweepResult { spec: spec.clone(), cells, digest, episodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            regions: vec![Region::Medium],
            kappas: vec![0.0, 5.0],
            num_sources: vec![10],
            replications: 4,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn failed_cells_are_recorded() {
        let r = sweep(&small_spec()).unwrap();
        assert_eq!(r.cells.len(), 6);
        // κ = 0 cannot be calibrated and admits no round-robin period.
        assert!(r.failures() >= 2);
        assert!(r.find(Region::Medium, 10, 5.0, PolicyKind::Saoithe).unwrap().avg_aoi_minutes().is_some());
        match &r.find(Region::Medium, 10, 5.0, PolicyKind::Random).unwrap().outcome {
            CellOutcome::Ok { replications, half_width_minutes, .. } => {
                assert_eq!(*replications, 4);
                assert!(*half_width_minutes >= 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_is_reproducible() {
        let spec = SweepSpec { kappas: vec![5.0], ..small_spec() };
        assert_eq!(sweep(&spec).unwrap().digest, sweep(&spec).unwrap().digest);
    }
}
