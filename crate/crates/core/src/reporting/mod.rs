//! Episode execution, experiment sweeps, decision-boundary tables and output.

mod boundary;
mod emit;
mod episode;
pub mod stats;
mod sweep;

pub use boundary::{boundary_table, linspace, BoundaryRow, BoundaryTable};
pub use emit::{
    emit, load_config_toml, output_file_name, read_summary, save_config_toml, write_per_slot_csv, write_summary_json,
    OutputFormat,
};
pub use episode::{config_digest, run_episode, EpisodeResult, EpisodeSummary, BUDGET_EPS};
pub use sweep::{run_cell, sweep, CellOutcome, CellResult, PolicyKind, SweepResult, SweepSpec};
