//! Scenario catalog, replication runner, result tables, and behavioral
//! reports.

mod catalog;
mod experiment;
mod manifest;
mod reports;
mod table;

use thiserror::Error;

pub use catalog::{catalog_file, compile_catalog_file, load_scenario, load_scenario_or_path, scenario_names};
pub use experiment::{experiment_config, train_selected, SelectedRun, EVAL_SEEDS, SELECTION_SEEDS};
pub use manifest::{InputStamp, Manifest, ScenarioStamp, MANIFEST_FILE};
pub use reports::{
    correlation_report, median, paired_wins, pearson, split_report, tts_vs_hop_report, write_scatter_csv, HopReport,
    HopRow, SplitSummary, MIN_CORRELATION_SAMPLES,
};
pub use table::{evaluate, mean_std, ControllerSpec, Evaluation, ResultRow, ResultTable, SeedRow};

use crate::control::ControlError;
use crate::rl::RlError;
use crate::sim::SimError;

/// Default replication seeds.
pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("no split history overlaps [{start_s}, {end_s}) at intersection {intersection}")]
    EmptyWindow { intersection: usize, start_s: f64, end_s: f64 },
    #[error("a series is constant; correlation is undefined")]
    DegenerateVariance,
    #[error("need at least {need} paired samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
