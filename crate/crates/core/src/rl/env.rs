use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use super::ppo::Transition;
use crate::control::{check_hop, project_with_floors, Action, ControlDecision, ControlError, Controller, DecisionContext};
use crate::network::QueueSnapshot;
use crate::pressure::{HopRange, MatrixPowers};
use crate::sim::Intersection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Negative sum of upstream potentials over hops `0..=H` at the
    /// intersection's incoming links.
    Potential,
    /// Negative absolute intersection pressure at hop `H`.
    Pressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// One pressure per phase, at hop `H`.
    #[default]
    AtHop,
    /// Pressures at every hop `0..=H`, phase-major.
    Stacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlSettings {
    pub hop: usize,
    pub reward: RewardMode,
    #[serde(default)]
    pub observation: ObservationMode,
}

impl RlSettings {
    pub fn obs_dim(&self, phases: usize) -> usize {
        match self.observation {
            ObservationMode::AtHop => phases,
            ObservationMode::Stacked => phases * (self.hop + 1),
        }
    }
}

/// Phase pressures at `hop`, in phase order.
pub fn make_observation(
    powers: &MatrixPowers,
    queues: &QueueSnapshot,
    intersection: &Intersection,
    hop: usize,
) -> Result<Vec<f64>, ControlError> {
    check_hop(hop)?;
    intersection
        .phases
        .iter()
        .map(|p| powers.phase_pressure(queues, p, hop).map_err(ControlError::from))
        .collect()
}

fn observe(
    settings: &RlSettings,
    powers: &MatrixPowers,
    queues: &QueueSnapshot,
    intersection: &Intersection,
) -> Result<Vec<f64>, ControlError> {
    match settings.observation {
        ObservationMode::AtHop => make_observation(powers, queues, intersection, settings.hop),
        ObservationMode::Stacked => {
            let mut out = Vec::with_capacity(settings.obs_dim(intersection.phases.len()));
            for p in &intersection.phases {
                for h in 0..=settings.hop {
                    out.push(powers.phase_pressure(queues, p, h)?);
                }
            }
            Ok(out)
        }
    }
}

/// `−Σ_{h=0..=H} Φ(l, h)` summed over every incoming link of the
/// intersection. Zero exactly when those potentials are all zero.
pub fn compute_reward(
    powers: &MatrixPowers,
    queues: &QueueSnapshot,
    intersection: &Intersection,
    hop: usize,
) -> Result<f64, ControlError> {
    check_hop(hop)?;
    let links = intersection.incoming_links();
    Ok(-powers.potential_sum(queues, &links, hop, HopRange::FromZero)?)
}

/// `−|Σ phase pressure at H|`.
pub fn pressure_reward(
    powers: &MatrixPowers,
    queues: &QueueSnapshot,
    intersection: &Intersection,
    hop: usize,
) -> Result<f64, ControlError> {
    let total: f64 = make_observation(powers, queues, intersection, hop)?.iter().sum();
    Ok(-total.abs())
}

pub fn reward_for(
    settings: &RlSettings,
    powers: &MatrixPowers,
    queues: &QueueSnapshot,
    intersection: &Intersection,
) -> Result<f64, ControlError> {
    match settings.reward {
        RewardMode::Potential => compute_reward(powers, queues, intersection, settings.hop),
        RewardMode::Pressure => pressure_reward(powers, queues, intersection, settings.hop),
    }
}

/// Softmax of the raw action, then floored at `floors` with the free mass
/// redistributed proportionally.
pub fn action_to_splits(raw: &[f64], floors: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = raw.iter().map(|r| (r - max).exp()).collect();
    project_with_floors(&weights, floors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Draw from the policy and record trajectories.
    Sample,
    /// Use the mean action.
    Mean,
}

/// What one episode of an [`RlController`] produced.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    /// One trajectory per intersection.
    pub trajectories: Vec<Vec<Transition>>,
    /// Raw observations per intersection, for the running scale.
    pub raw_observations: Vec<Vec<Vec<f64>>>,
    /// Undiscounted reward summed over intersections and decisions.
    pub total_reward: f64,
}

/// Split-setting agents, one per intersection, driven by their policies.
///
/// Each decision's reward is read from the queues at the next decision,
/// which is the end of the cycle it controlled; the last one is read at the
/// horizon and marked terminal.
pub struct RlController {
    settings: RlSettings,
    policies: Arc<Vec<GaussianPolicy>>,
    agent_of: Vec<usize>,
    mode: ActionMode,
    rng: ChaCha8Rng,
    pending: Vec<Option<Transition>>,
    rollout: Rollout,
}

impl RlController {
    /// `agent_of[i]` picks the policy that drives intersection `i`.
    pub fn new(
        settings: RlSettings,
        policies: Arc<Vec<GaussianPolicy>>,
        agent_of: Vec<usize>,
        mode: ActionMode,
        seed: u64,
    ) -> Self {
        let n = agent_of.len();
        Self {
            settings,
            policies,
            agent_of,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: vec![None; n],
            rollout: Rollout {
                trajectories: vec![Vec::new(); n],
                raw_observations: vec![Vec::new(); n],
                total_reward: 0.0,
            },
        }
    }

    pub fn settings(&self) -> &RlSettings {
        &self.settings
    }

    pub fn into_rollout(self) -> Rollout {
        self.rollout
    }

    fn close_pending(&mut self, ctx: &DecisionContext<'_>, i: usize, done: bool) -> Result<(), ControlError> {
        if let Some(mut t) = self.pending[i].take() {
            let reward = reward_for(&self.settings, &ctx.scenario.powers, ctx.queues, &ctx.scenario.intersections[i])?;
            if !reward.is_finite() {
                return Err(ControlError::Policy(format!("non-finite reward at intersection {i}")));
            }
            t.reward = reward;
            t.done = done;
            self.rollout.total_reward += reward;
            self.rollout.trajectories[i].push(t);
        }
        Ok(())
    }
}

impl Controller for RlController {
    fn name(&self) -> String {
        let reward = match self.settings.reward {
            RewardMode::Potential => "potential",
            RewardMode::Pressure => "pressure",
        };
        format!("rl-{reward}-h{}", self.settings.hop)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ControlDecision>, ControlError> {
        let cycle_s = ctx.scenario.timing.cycle_s;
        let mut out = Vec::with_capacity(ctx.due.len());
        for &i in ctx.due {
            self.close_pending(ctx, i, false)?;
            let inter = &ctx.scenario.intersections[i];
            let raw = observe(&self.settings, &ctx.scenario.powers, ctx.queues, inter)?;
            let policy = &self.policies[self.agent_of[i]];
            if raw.len() != policy.obs_dim() {
                return Err(ControlError::Policy(format!(
                    "intersection {i} gives {} observations, policy expects {}",
                    raw.len(),
                    policy.obs_dim()
                )));
            }
            let obs = policy.normalize(&raw);
            let mut critic_in = obs.clone();
            if policy.critic_extra() > 0 {
                critic_in.push(ctx.time_s / ctx.scenario.timing.horizon_s);
            }
            let action = match self.mode {
                ActionMode::Sample => {
                    let s = policy.sample(&obs, &critic_in, &mut self.rng);
                    self.pending[i] = Some(Transition {
                        obs,
                        critic_in,
                        action: s.action.clone(),
                        log_prob: s.log_prob,
                        reward: 0.0,
                        value: s.value,
                        done: false,
                    });
                    s.action
                }
                ActionMode::Mean => {
                    let a = policy.mean(&obs);
                    self.pending[i] = Some(Transition {
                        obs,
                        critic_in,
                        action: a.clone(),
                        log_prob: 0.0,
                        reward: 0.0,
                        value: 0.0,
                        done: false,
                    });
                    a
                }
            };
            if action.iter().any(|a| !a.is_finite()) {
                return Err(ControlError::Policy(format!("non-finite action at intersection {i}")));
            }
            self.rollout.raw_observations[i].push(raw);
            let splits = action_to_splits(&action, &inter.min_splits(cycle_s));
            out.push(ControlDecision { intersection: i, action: Action::Splits { cycle_s, splits } });
        }
        Ok(out)
    }

    fn finish(&mut self, ctx: &DecisionContext<'_>) -> Result<(), ControlError> {
        for i in 0..self.pending.len() {
            self.close_pending(ctx, i, true)?;
        }
        Ok(())
    }
}
