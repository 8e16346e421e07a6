use mhp_core::rl::{
    action_to_splits, loss, loss_and_grad, ppo_update, Agent, GaussianPolicy, PolicyShape, PpoConfig, Sample,
    Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_batch(policy: &GaussianPolicy, n: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let obs_dim = policy.obs_dim();
    let extra = policy.critic_extra();
    (0..n)
        .map(|_| {
            let obs: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut critic_in = obs.clone();
            critic_in.extend((0..extra).map(|_| rng.random::<f64>()));
            let s = policy.sample(&obs, &critic_in, rng);
            // Old log-probs near the current ones keep every ratio inside
            // the clip range, away from the kinks of the surrogate.
            let old = s.log_prob + rng.random_range(-0.05..0.05);
            Sample {
                obs,
                critic_in,
                action: s.action,
                old_log_prob: old,
                advantage: rng.random_range(-1.5..1.5),
                ret: rng.random_range(-3.0..3.0),
            }
        })
        .collect()
}

/// Largest relative gap between the analytic gradient and central
/// differences over every parameter.
pub fn gradient_gap(policy: &GaussianPolicy, batch: &[Sample], cfg: &PpoConfig) -> f64 {
    let (_, grad) = loss_and_grad(policy, batch, cfg);
    let theta = policy.flat_params();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut p = policy.clone();
        let mut t = theta.clone();
        t[i] += eps;
        p.set_flat_params(&t);
        let up = loss(&p, batch, cfg);
        t[i] -= 2.0 * eps;
        p.set_flat_params(&t);
        let down = loss(&p, batch, cfg);
        let numeric = (up - down) / (2.0 * eps);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}

/// Trains on a one-step bandit with reward −(split₀ − 0.75)² and returns the
/// mean first split afterwards.
pub fn bandit_split(seed: u64) -> f64 {
    // One decision per episode; reward −(split₀ − 0.75)², optimum split₀ = 0.75.
    let floors = [10.0 / 90.0; 2];
    let shape = PolicyShape { obs_dim: 1, act_dim: 2, hidden: vec![], init_log_std: -0.5, critic_extra: 0 };
    let cfg = PpoConfig { lr: 3e-3, reward_scale: 1.0, minibatch: 32, ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Agent::new(GaussianPolicy::new(&shape, &mut rng), cfg.lr);
    let obs = vec![1.0];
    let split0 = |agent: &Agent| action_to_splits(&agent.policy.mean(&obs), &floors)[0];
    for _ in 0..500 {
        let trajs: Vec<Vec<Transition>> = (0..64)
            .map(|_| {
                let s = agent.policy.sample(&obs, &obs, &mut rng);
                let split = action_to_splits(&s.action, &floors)[0];
                vec![Transition {
                    obs: obs.clone(),
                    critic_in: obs.clone(),
                    action: s.action,
                    log_prob: s.log_prob,
                    reward: -(split - 0.75).powi(2),
                    value: s.value,
                    done: true,
                }]
            })
            .collect();
        ppo_update(&mut agent, &trajs, &cfg, &mut rng).unwrap();
    }
    split0(&agent)
}
