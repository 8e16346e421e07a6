use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nn::{Activations, Mlp};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;
/// Normalized observations are clipped to this magnitude.
pub const OBS_CLIP: f64 = 10.0;
const MIN_LOG_STD: f64 = -5.0;
const MAX_LOG_STD: f64 = 2.0;

/// Per-entry root-mean-square of everything observed so far. Dividing by a
/// positive scale keeps zero at zero and preserves order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningScale {
    pub count: u64,
    pub mean_square: Vec<f64>,
}

impl RunningScale {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, mean_square: vec![0.0; dim] }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (m, v) in self.mean_square.iter_mut().zip(x) {
            *m += (v * v - *m) / n;
        }
    }

    pub fn scale(&self, i: usize) -> f64 {
        if self.count == 0 {
            return 1.0;
        }
        self.mean_square[i].sqrt().max(1e-6)
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| (v / self.scale(i)).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Hidden layer widths; empty gives linear actor and critic.
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Extra inputs the critic sees after the observation.
    #[serde(default)]
    pub critic_extra: usize,
}

/// Actor-critic for one intersection. The actor maps a normalized
/// observation to the mean of a diagonal Gaussian over unconstrained action
/// vectors; the standard deviation is a free parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
    pub obs_scale: RunningScale,
}

/// One sampled action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(shape: &PolicyShape, rng: &mut R) -> Self {
        let mut actor_sizes = vec![shape.obs_dim];
        actor_sizes.extend(&shape.hidden);
        actor_sizes.push(shape.act_dim);
        let mut sizes = vec![shape.obs_dim + shape.critic_extra];
        sizes.extend(&shape.hidden);
        sizes.push(1);
        Self {
            actor: Mlp::new(&actor_sizes, 0.01, rng),
            log_std: vec![shape.init_log_std; shape.act_dim],
            critic: Mlp::new(&sizes, 1.0, rng),
            obs_scale: RunningScale::new(shape.obs_dim),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Number of critic inputs beyond the observation.
    pub fn critic_extra(&self) -> usize {
        self.critic.input_dim() - self.actor.input_dim()
    }

    /// Actor, then log-std, then critic.
    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.log_std.len() + self.critic.param_count()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.actor.params());
        out.extend_from_slice(&self.log_std);
        out.extend_from_slice(self.critic.params());
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let a = self.actor.param_count();
        let s = self.log_std.len();
        self.actor.params_mut().copy_from_slice(&flat[..a]);
        for (d, v) in self.log_std.iter_mut().zip(&flat[a..a + s]) {
            *d = v.clamp(MIN_LOG_STD, MAX_LOG_STD);
        }
        self.critic.params_mut().copy_from_slice(&flat[a + s..]);
    }

    pub fn is_finite(&self) -> bool {
        self.flat_params().iter().all(|p| p.is_finite())
    }

    pub fn normalize(&self, raw_obs: &[f64]) -> Vec<f64> {
        self.obs_scale.normalize(raw_obs)
    }

    /// Mean action for a normalized observation.
    pub fn mean(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.forward(obs)
    }

    /// Critic estimate; `critic_in` is the observation followed by the
    /// critic's extra inputs.
    pub fn value(&self, critic_in: &[f64]) -> f64 {
        self.critic.forward(critic_in)[0]
    }

    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], critic_in: &[f64], rng: &mut R) -> ActionSample {
        let mean = self.mean(obs);
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        let log_prob = gaussian_log_prob(&mean, &self.log_std, &action);
        ActionSample { action, log_prob, value: self.value(critic_in) }
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> f64 {
        gaussian_log_prob(&self.mean(obs), &self.log_std, action)
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + LOG_2PI)).sum()
    }

    pub(crate) fn actor_pass(&self, obs: &[f64]) -> Activations {
        self.actor.forward_cached(obs)
    }

    pub(crate) fn critic_pass(&self, critic_in: &[f64]) -> Activations {
        self.critic.forward_cached(critic_in)
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; dim], v: vec![0.0; dim] }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Gradient descent step: `params -= lr * m̂ / (sqrt(v̂) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scale_keeps_sign_and_order() {
        let mut s = RunningScale::new(2);
        s.update(&[3.0, -4.0]);
        s.update(&[1.0, 0.0]);
        let a = s.normalize(&[1.0, -1.0]);
        let b = s.normalize(&[2.0, 0.0]);
        assert!(a[0] > 0.0 && a[1] < 0.0);
        assert!(b[0] > a[0] && b[1] > a[1]);
        assert_eq!(s.normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = PolicyShape { obs_dim: 3, act_dim: 2, hidden: vec![4], init_log_std: -0.5, critic_extra: 1 };
        let p = GaussianPolicy::new(&shape, &mut rng);
        let mut q = p.clone();
        q.set_flat_params(&p.flat_params());
        assert_eq!(p, q);
    }

    #[test]
    fn log_prob_of_standard_normal_at_mean() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + 0.5 * LOG_2PI).abs() < 1e-15);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut opt = Adam::new(2, 0.1);
        let mut x = [1.0, -1.0];
        opt.step(&mut x, &[1.0, -1.0]);
        assert!((x[0] - 0.9).abs() < 1e-9 && (x[1] + 0.9).abs() < 1e-9);
    }
}
