use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Adam, GaussianPolicy};
use super::RlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Gradient norm cap applied separately to the policy parameters
    /// (actor and log-std) and to the critic; nonpositive disables it.
    pub max_grad_norm: f64,
    /// Rewards are multiplied by this before advantages and returns.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 64,
            lr: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            reward_scale: 0.01,
        }
    }
}

/// One decision of one agent. `obs` is already normalized; `critic_in` is
/// `obs` plus the critic's extra inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub critic_in: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// A transition with its advantage and return target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub critic_in: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Generalized advantage estimates for one trajectory. The value after the
/// last transition is taken as zero when it is terminal, else its own value.
pub fn gae(traj: &[Transition], gamma: f64, lambda: f64, reward_scale: f64) -> Vec<Sample> {
    let mut out = Vec::with_capacity(traj.len());
    let mut running = 0.0;
    for (i, t) in traj.iter().enumerate().rev() {
        let next_value = match traj.get(i + 1) {
            _ if t.done => 0.0,
            Some(n) => n.value,
            None => t.value,
        };
        let delta = t.reward * reward_scale + gamma * next_value - t.value;
        running = delta + if t.done { 0.0 } else { gamma * lambda * running };
        out.push(Sample {
            obs: t.obs.clone(),
            critic_in: t.critic_in.clone(),
            action: t.action.clone(),
            old_log_prob: t.log_prob,
            advantage: running,
            ret: running + t.value,
        });
    }
    out.reverse();
    out
}

/// Shifts advantages to mean zero and, when they vary, unit variance.
pub fn normalize_advantages(samples: &mut [Sample]) {
    if samples.is_empty() {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for s in samples.iter_mut() {
        s.advantage -= mean;
        if std > 1e-8 {
            s.advantage /= std;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Share of samples whose ratio was clipped.
    pub clip_fraction: f64,
}

impl LossParts {
    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy + cfg.value_coef * self.value - cfg.entropy_coef * self.entropy
    }
}

/// Mean clipped-surrogate loss over `batch` and its gradient with respect
/// to the flat parameters (actor, log-std, critic).
///
/// Loss = −min(r·A, clip(r, 1−ε, 1+ε)·A) + c_v·½(V − R)² − c_e·entropy.
pub fn loss_and_grad(policy: &GaussianPolicy, batch: &[Sample], cfg: &PpoConfig) -> (LossParts, Vec<f64>) {
    let na = policy.actor.param_count();
    let ns = policy.log_std.len();
    let mut grad = vec![0.0; policy.param_count()];
    let mut parts = LossParts::default();
    if batch.is_empty() {
        return (parts, grad);
    }
    let n = batch.len() as f64;
    let inv_var: Vec<f64> = policy.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let mut clipped = 0usize;

    for s in batch {
        let acts = policy.actor_pass(&s.obs);
        let mean = acts.output();
        let log_prob = super::policy::gaussian_log_prob(mean, &policy.log_std, &s.action);
        let ratio = (log_prob - s.old_log_prob).exp();
        let unclipped = ratio * s.advantage;
        let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surrogate = unclipped.min(clipped_ratio * s.advantage);
        parts.policy -= surrogate / n;

        // The gradient flows only where the unclipped term is the minimum
        // and the ratio is inside the trust region on the binding side.
        let active = !((s.advantage > 0.0 && ratio > 1.0 + cfg.clip) || (s.advantage < 0.0 && ratio < 1.0 - cfg.clip));
        if !active {
            clipped += 1;
        } else if s.advantage != 0.0 {
            // d(-r·A)/dθ = -A·r·d(log π)/dθ
            let coef = -s.advantage * ratio / n;
            let grad_mean: Vec<f64> = (0..mean.len())
                .map(|k| coef * (s.action[k] - mean[k]) * inv_var[k])
                .collect();
            policy.actor.backward(&acts, &grad_mean, &mut grad[..na]);
            for k in 0..ns {
                let z2 = (s.action[k] - mean[k]).powi(2) * inv_var[k];
                grad[na + k] += coef * (z2 - 1.0);
            }
        }

        let vacts = policy.critic_pass(&s.critic_in);
        let v = vacts.output()[0];
        let err = v - s.ret;
        parts.value += 0.5 * err * err / n;
        policy.critic.backward(&vacts, &[cfg.value_coef * err / n], &mut grad[na + ns..]);
    }

    parts.entropy = policy.entropy();
    for g in &mut grad[na..na + ns] {
        *g -= cfg.entropy_coef;
    }
    parts.clip_fraction = clipped as f64 / n;
    (parts, grad)
}

/// Scalar loss only, for finite-difference checks.
pub fn loss(policy: &GaussianPolicy, batch: &[Sample], cfg: &PpoConfig) -> f64 {
    loss_and_grad(policy, batch, cfg).0.total(cfg)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub samples: usize,
    pub minibatches: usize,
    pub last: LossParts,
    pub grad_norm: f64,
}

/// A policy with its optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: GaussianPolicy,
    pub optimizer: Adam,
}

impl Agent {
    pub fn new(policy: GaussianPolicy, lr: f64) -> Self {
        let optimizer = Adam::new(policy.param_count(), lr);
        Self { policy, optimizer }
    }
}

/// Clipped-surrogate PPO update from a set of trajectories.
///
/// Aborts with [`RlError::NonFiniteGradient`] before touching the parameters
/// of the offending minibatch, and with [`RlError::NonFiniteParameters`] if a
/// step produced a non-finite parameter.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    trajectories: &[Vec<Transition>],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, RlError> {
    let samples: Vec<Sample> = trajectories
        .iter()
        .flat_map(|t| gae(t, cfg.gamma, cfg.lambda, cfg.reward_scale))
        .collect();
    update_on_samples(agent, samples, cfg, rng)
}

/// The optimization half of [`ppo_update`], on precomputed samples.
pub fn update_on_samples<R: Rng + ?Sized>(
    agent: &mut Agent,
    mut samples: Vec<Sample>,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, RlError> {
    if samples.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    if samples.iter().any(|s| !s.advantage.is_finite() || !s.ret.is_finite()) {
        return Err(RlError::NonFiniteAdvantage);
    }
    normalize_advantages(&mut samples);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mb = cfg.minibatch.max(1);
    let mut stats = UpdateStats { samples: samples.len(), ..Default::default() };
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (b, chunk) in order.chunks(mb).enumerate() {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (parts, mut grad) = loss_and_grad(&agent.policy, &batch, cfg);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(RlError::NonFiniteGradient { epoch, minibatch: b });
            }
            let split = agent.policy.actor.param_count() + agent.policy.log_std.len();
            let (policy_grad, critic_grad) = grad.split_at_mut(split);
            clip_norm(policy_grad, cfg.max_grad_norm);
            clip_norm(critic_grad, cfg.max_grad_norm);
            let mut params = agent.policy.flat_params();
            agent.optimizer.step(&mut params, &grad);
            agent.policy.set_flat_params(&params);
            if !agent.policy.is_finite() {
                return Err(RlError::NonFiniteParameters);
            }
            stats.minibatches += 1;
            stats.last = parts;
            stats.grad_norm = norm;
        }
    }
    Ok(stats)
}

fn clip_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
}
