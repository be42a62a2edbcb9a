//! File output: per-slot CSV, JSON summaries and TOML configs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SimConfig;

use super::episode::{EpisodeResult, EpisodeSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Long format: one row per (slot, source).
    Csv,
    /// Scalar summary document.
    Json,
}

/// `{policy}_{region}_N{N}_kappa{κ}.csv`
pub fn output_file_name(policy: &str, region: &str, num_sources: usize, kappa: f64) -> String {
    format!("{policy}_{region}_N{num_sources}_kappa{kappa}.csv")
}

pub fn write_per_slot_csv<W: Write>(result: &EpisodeResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["slot", "source", "aoi", "cf_cum", "duty_cum"])?;
    let cf = result.cf_cumulative();
    let duty = result.duty_cumulative();
    for t in 0..result.horizon {
        let (c, d) = (cf[t].to_string(), duty[t].to_string());
        let slot = t.to_string();
        for (n, row) in result.aoi_trajectories.iter().enumerate() {
            out.write_record([slot.as_str(), &n.to_string(), &row[t].to_string(), &c, &d])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(summary: &EpisodeSummary, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<EpisodeSummary> {
    Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
}

pub fn emit(result: &EpisodeResult, format: OutputFormat, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        OutputFormat::Csv => write_per_slot_csv(result, file),
        OutputFormat::Json => write_summary_json(&result.summary(), file),
    }
}

const CONFIG_HEADER: &str = "\
# Units: slot_duration and duty_cost_per_tx in seconds; cf_budget in budget
# units of cf_budget_scale grams CO2eq each; duty_budget as a fraction of the
# horizon per device; energies in joules, powers in watts; ages in slots.
";

pub fn save_config_toml(cfg: &SimConfig, path: &Path) -> Result<()> {
    let body = toml::to_string(cfg).map_err(|e| Error::Toml(e.to_string()))?;
    std::fs::write(path, format!("{CONFIG_HEADER}{body}"))?;
    Ok(())
}

/// Reads and validates a config.
pub fn load_config_toml(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: SimConfig = toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?;
    cfg.validate()
}
