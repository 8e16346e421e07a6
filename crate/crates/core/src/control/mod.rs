//! Signal controllers behind one interface.
//!
//! A [`Controller`] is asked for decisions whenever intersections are due.
//! Split-setting controllers answer with [`Action::Splits`] once per cycle;
//! MaxPressure answers with [`Action::Activate`] once per control period.
//! Decisions for different intersections are independent.

mod greedy;
mod max_pressure;
mod splits;
mod webster;

use thiserror::Error;

pub use greedy::{greedy_splits, GreedySplitController};
pub use max_pressure::{max_pressure_choice, MaxPressureController};
pub use splits::project_with_floors;
pub use webster::{webster_plan, FixedPlan, FixedTimeController, WebsterController, WebsterPlan};

use crate::network::QueueSnapshot;
use crate::pressure::PressureError;
use crate::sim::Scenario;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error("hop {hop} exceeds the supported maximum {max}")]
    HopTooLarge { hop: usize, max: usize },
    #[error("policy: {0}")]
    Policy(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Green shares of the next cycle, in phase order. Each share is at least
    /// `min_green / cycle` and the shares sum to one.
    Splits { cycle_s: f64, splits: Vec<f64> },
    /// Serve `phase` for the next `period_s` seconds.
    Activate { phase: usize, period_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub intersection: usize,
    pub action: Action,
}

/// What a controller sees at a decision epoch.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub time_s: f64,
    pub scenario: &'a Scenario,
    pub queues: &'a QueueSnapshot,
    /// Intersections that need a decision now.
    pub due: &'a [usize],
}

pub trait Controller: Send {
    fn name(&self) -> String;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ControlDecision>, ControlError>;

    /// Called once at the horizon with the final queues.
    fn finish(&mut self, _ctx: &DecisionContext<'_>) -> Result<(), ControlError> {
        Ok(())
    }
}

pub(crate) fn check_hop(hop: usize) -> Result<(), ControlError> {
    if hop > crate::sim::MAX_HOP {
        return Err(ControlError::HopTooLarge { hop, max: crate::sim::MAX_HOP });
    }
    Ok(())
}

/// Phase pressures at `hop` for one intersection, in phase order.
pub fn phase_pressures(
    scenario: &Scenario,
    queues: &QueueSnapshot,
    intersection: usize,
    hop: usize,
) -> Result<Vec<f64>, ControlError> {
    check_hop(hop)?;
    let powers = &scenario.powers;
    scenario.intersections[intersection]
        .phases
        .iter()
        .map(|p| powers.phase_pressure(queues, p, hop).map_err(ControlError::from))
        .collect()
}
