use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::{ActionMode, RlController, RlSettings, Rollout};
use super::policy::{GaussianPolicy, PolicyShape};
use super::ppo::{ppo_update, Agent, PpoConfig, Transition};
use super::RlError;
use crate::exec::{self, Execution};
use crate::sim::{run_episode, EpisodeOptions, MetricsLog, Scenario};

pub const CHECKPOINT_FORMAT: &str = "mhp-policy-set";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub settings: RlSettings,
    /// PPO updates.
    pub iterations: usize,
    /// Sampled episodes per update.
    pub episodes_per_iteration: usize,
    /// Evaluate the mean-action policy every this many iterations.
    pub eval_every: usize,
    pub eval_seeds: Vec<u64>,
    pub seed: u64,
    pub ppo: PpoConfig,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// One policy for every intersection instead of one each.
    pub share_parameters: bool,
    /// Gives the critic the elapsed fraction of the horizon as an extra
    /// input. The actor never sees it.
    pub critic_time: bool,
}

impl TrainConfig {
    pub fn new(settings: RlSettings) -> Self {
        Self {
            settings,
            iterations: 100,
            episodes_per_iteration: 8,
            eval_every: 5,
            eval_seeds: (1000..1005).collect(),
            seed: 0,
            ppo: PpoConfig::default(),
            hidden: vec![64, 64],
            init_log_std: -0.5,
            share_parameters: false,
            critic_time: true,
        }
    }
}

/// Trained policies plus what is needed to drive a scenario with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub format: String,
    pub version: u32,
    pub settings: RlSettings,
    pub scenario: String,
    pub scenario_fingerprint: String,
    /// Policy index per intersection.
    pub agent_of: Vec<usize>,
    pub policies: Vec<GaussianPolicy>,
}

impl PolicySet {
    pub fn controller(&self, mode: ActionMode, seed: u64) -> RlController {
        RlController::new(self.settings, Arc::new(self.policies.clone()), self.agent_of.clone(), mode, seed)
    }

    /// Rejects policies trained for a different intersection layout.
    pub fn check_compatible(&self, scenario: &Scenario) -> Result<(), RlError> {
        if self.agent_of.len() != scenario.intersections.len() {
            return Err(RlError::Checkpoint(format!(
                "checkpoint drives {} intersections, scenario has {}",
                self.agent_of.len(),
                scenario.intersections.len()
            )));
        }
        for (i, inter) in scenario.intersections.iter().enumerate() {
            let p = self
                .policies
                .get(self.agent_of[i])
                .ok_or_else(|| RlError::Checkpoint(format!("no policy for intersection {i}")))?;
            let dims = (self.settings.obs_dim(inter.phases.len()), inter.phases.len());
            if (p.obs_dim(), p.act_dim()) != dims {
                return Err(RlError::Checkpoint(format!("policy shape mismatch at intersection {}", inter.id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RlError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RlError> {
        let set: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if set.format != CHECKPOINT_FORMAT || set.version != CHECKPOINT_VERSION {
            return Err(RlError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                set.format, set.version
            )));
        }
        if set.policies.iter().any(|p| !p.is_finite()) {
            return Err(RlError::NonFiniteParameters);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Mean undiscounted episode reward of the sampled episodes.
    pub mean_reward: f64,
    pub mean_train_tts_h: f64,
    pub eval_tts_h: Option<f64>,
    pub eval_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalEpisode {
    pub seed: u64,
    pub reward: f64,
    pub log: MetricsLog,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The evaluation-best policies.
    pub best: PolicySet,
    pub last: PolicySet,
    pub best_iteration: usize,
    pub best_eval_tts_h: f64,
    pub curve: Vec<CurvePoint>,
}

impl TrainOutcome {
    /// Evaluation TTS values in iteration order.
    pub fn eval_tts(&self) -> Vec<f64> {
        self.curve.iter().filter_map(|c| c.eval_tts_h).collect()
    }

    /// First iteration after which the last `window` evaluations have a
    /// standard deviation below `tolerance` times their mean.
    pub fn plateau_iteration(&self, window: usize, tolerance: f64) -> Option<usize> {
        let evals: Vec<(usize, f64)> =
            self.curve.iter().filter_map(|c| c.eval_tts_h.map(|t| (c.iteration, t))).collect();
        evals.windows(window).find(|w| relative_spread(w.iter().map(|x| x.1)) < tolerance).map(|w| w[window - 1].0)
    }
}

fn relative_spread(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if mean.abs() < 1e-12 {
        return if std < 1e-12 { 0.0 } else { f64::INFINITY };
    }
    std / mean.abs()
}

fn agent_layout(scenario: &Scenario, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<PolicyShape>), RlError> {
    let shape = |phases: usize| PolicyShape {
        obs_dim: cfg.settings.obs_dim(phases),
        act_dim: phases,
        hidden: cfg.hidden.clone(),
        init_log_std: cfg.init_log_std,
        critic_extra: usize::from(cfg.critic_time),
    };
    let n = scenario.intersections.len();
    if n == 0 {
        return Err(RlError::Shape("scenario has no signalized intersections".into()));
    }
    if cfg.share_parameters {
        let phases = scenario.intersections[0].phases.len();
        if scenario.intersections.iter().any(|i| i.phases.len() != phases) {
            return Err(RlError::Shape("shared parameters need equal phase counts".into()));
        }
        Ok((vec![0; n], vec![shape(phases)]))
    } else {
        Ok(((0..n).collect(), scenario.intersections.iter().map(|i| shape(i.phases.len())).collect()))
    }
}

fn rollout(
    scenario: &Scenario,
    settings: RlSettings,
    policies: &Arc<Vec<GaussianPolicy>>,
    agent_of: &[usize],
    mode: ActionMode,
    demand_seed: u64,
    action_seed: u64,
) -> Result<(MetricsLog, Rollout), RlError> {
    let mut c = RlController::new(settings, Arc::clone(policies), agent_of.to_vec(), mode, action_seed);
    let log = run_episode(scenario, &mut c, demand_seed, EpisodeOptions::default())?;
    Ok((log, c.into_rollout()))
}

/// Runs the mean-action policies on each demand seed.
pub fn evaluate_policies(
    scenario: &Scenario,
    set: &PolicySet,
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<EvalEpisode>, RlError> {
    set.check_compatible(scenario)?;
    let policies = Arc::new(set.policies.clone());
    exec::map(execution, seeds.to_vec(), |seed| {
        let (log, r) = rollout(scenario, set.settings, &policies, &set.agent_of, ActionMode::Mean, seed, 0)?;
        Ok(EvalEpisode { seed, reward: r.total_reward, log })
    })
    .into_iter()
    .collect()
}

/// Trains one PPO agent per intersection (or one shared agent) on sampled
/// episodes and keeps the policies with the best evaluation TTS.
///
/// All randomness derives from `cfg.seed`; rollouts run concurrently but
/// are collected in a fixed order, so a run is reproducible bit for bit.
pub fn train(scenario: &Scenario, cfg: &TrainConfig, execution: Execution) -> Result<TrainOutcome, RlError> {
    if cfg.iterations == 0 || cfg.episodes_per_iteration == 0 || cfg.eval_every == 0 || cfg.eval_seeds.is_empty() {
        return Err(RlError::Shape("iterations, episodes, eval interval and eval seeds must be nonzero".into()));
    }
    crate::control::check_hop(cfg.settings.hop)?;
    let (agent_of, shapes) = agent_layout(scenario, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agents: Vec<Agent> =
        shapes.iter().map(|s| Agent::new(GaussianPolicy::new(s, &mut rng), cfg.ppo.lr)).collect();

    let snapshot = |agents: &[Agent]| -> PolicySet {
        PolicySet {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            settings: cfg.settings,
            scenario: scenario.name.clone(),
            scenario_fingerprint: scenario.fingerprint().to_string(),
            agent_of: agent_of.clone(),
            policies: agents.iter().map(|a| a.policy.clone()).collect(),
        }
    };
    let draw_jobs = |rng: &mut ChaCha8Rng| -> Vec<(u64, u64)> {
        (0..cfg.episodes_per_iteration).map(|_| (rng.random(), rng.random())).collect()
    };
    let run_batch = |set: &PolicySet, jobs: Vec<(u64, u64)>| -> Result<Vec<(MetricsLog, Rollout)>, RlError> {
        let policies = Arc::new(set.policies.clone());
        exec::map(execution, jobs, |(ds, acts)| {
            rollout(scenario, cfg.settings, &policies, &agent_of, ActionMode::Sample, ds, acts)
        })
        .into_iter()
        .collect()
    };

    // Fit the observation scales on one batch from the initial policies.
    let warmup = run_batch(&snapshot(&agents), draw_jobs(&mut rng))?;
    absorb_observations(&mut agents, &agent_of, &warmup);

    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(f64, usize, PolicySet)> = None;
    for iteration in 1..=cfg.iterations {
        let current = snapshot(&agents);
        let batch = run_batch(&current, draw_jobs(&mut rng))?;
        let n = batch.len() as f64;
        let mean_reward = batch.iter().map(|(_, r)| r.total_reward).sum::<f64>() / n;
        let mean_train_tts_h = batch.iter().map(|(l, _)| l.total_time_spent_h).sum::<f64>() / n;

        for (a, agent) in agents.iter_mut().enumerate() {
            let trajs: Vec<Vec<Transition>> = batch
                .iter()
                .flat_map(|(_, r)| {
                    r.trajectories.iter().enumerate().filter(|(i, _)| agent_of[*i] == a).map(|(_, t)| t.clone())
                })
                .filter(|t| !t.is_empty())
                .collect();
            ppo_update(agent, &trajs, &cfg.ppo, &mut rng)?;
        }
        absorb_observations(&mut agents, &agent_of, &batch);

        let mut point = CurvePoint { iteration, mean_reward, mean_train_tts_h, eval_tts_h: None, eval_reward: None };
        if iteration % cfg.eval_every == 0 || iteration == cfg.iterations {
            let set = snapshot(&agents);
            let evals = evaluate_policies(scenario, &set, &cfg.eval_seeds, execution)?;
            let m = evals.len() as f64;
            let tts = evals.iter().map(|e| e.log.total_time_spent_h).sum::<f64>() / m;
            point.eval_tts_h = Some(tts);
            point.eval_reward = Some(evals.iter().map(|e| e.reward).sum::<f64>() / m);
            if best.as_ref().is_none_or(|(b, _, _)| tts < *b) {
                best = Some((tts, iteration, set));
            }
        }
        curve.push(point);
    }

    let (best_eval_tts_h, best_iteration, best) = best.expect("the last iteration always evaluates");
    Ok(TrainOutcome { best, last: snapshot(&agents), best_iteration, best_eval_tts_h, curve })
}

fn absorb_observations(agents: &mut [Agent], agent_of: &[usize], batch: &[(MetricsLog, Rollout)]) {
    for (_, r) in batch {
        for (i, obs) in r.raw_observations.iter().enumerate() {
            let scale = &mut agents[agent_of[i]].policy.obs_scale;
            for o in obs {
                scale.update(o);
            }
        }
    }
}
