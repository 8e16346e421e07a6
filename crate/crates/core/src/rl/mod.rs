//! Split-setting agents trained with PPO.
//!
//! Each signalized intersection is an agent. It observes its phase
//! pressures at a hop count `H`, picks an unconstrained action vector from a
//! diagonal Gaussian, and the action is mapped to next-cycle splits through
//! a softmax with minimum-green floors. The reward is read at the end of
//! the cycle.

mod env;
mod nn;
mod policy;
mod ppo;
mod train;

use thiserror::Error;

pub use env::{
    action_to_splits, compute_reward, make_observation, pressure_reward, reward_for, ActionMode, ObservationMode,
    RewardMode, RlController, RlSettings, Rollout,
};
pub use nn::{Activations, Mlp};
pub use policy::{gaussian_log_prob, ActionSample, Adam, GaussianPolicy, PolicyShape, RunningScale, OBS_CLIP};
pub use ppo::{
    gae, loss, loss_and_grad, normalize_advantages, ppo_update, update_on_samples, Agent, LossParts, PpoConfig,
    Sample, Transition, UpdateStats,
};
pub use train::{
    evaluate_policies, train, CurvePoint, EvalEpisode, PolicySet, TrainConfig, TrainOutcome, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};

use crate::control::ControlError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("no transitions to learn from")]
    EmptyBatch,
    #[error("non-finite advantage or return")]
    NonFiniteAdvantage,
    #[error("non-finite gradient in epoch {epoch}, minibatch {minibatch}")]
    NonFiniteGradient { epoch: usize, minibatch: usize },
    #[error("update produced non-finite parameters")]
    NonFiniteParameters,
    #[error("{0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
