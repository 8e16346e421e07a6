//! Deterministic discrete-time store-and-forward signal simulator.
//!
//! Links hold FIFO vehicle lists with a storage capacity. A vehicle becomes
//! queued once its free-flow travel time has elapsed and leaves its link when
//! the stop line is green, its saturation credit allows, and the next link on
//! its pre-sampled route has space. A blocked head vehicle blocks everything
//! behind it. Demand that cannot enter a full origin link waits in that
//! origin's unbounded virtual queue.

mod episode;
mod metrics;
mod scenario;
mod signal;
mod state;

use thiserror::Error;

pub use episode::{run_episode, EpisodeOptions};
pub use metrics::{EpisodeSummary, MetricsLog, SplitRecord};
pub use scenario::{
    DemandInterval, DemandProfile, DemandSpec, Intersection, IntersectionSpec, NetworkRef, PhaseSpec, Scenario,
    ScenarioFile, Timing, MAX_HOP,
};
pub use signal::{check_splits, SignalProgram, SignalState, SPLIT_TOLERANCE};
pub use state::{SimState, Totals, VehicleRecord};

use crate::control::ControlError;
use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("link `{link}` (#{index}) holds {vehicles} vehicles, capacity {capacity}")]
    CapacityViolation { link: String, index: usize, vehicles: usize, capacity: u32 },
    #[error("{generated} vehicles generated but {accounted} accounted for")]
    ConservationViolation { generated: usize, accounted: usize },
    #[error("invalid control decision: {0}")]
    InvalidDecision(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
