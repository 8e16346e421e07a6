use std::ops::Range;

use super::HarnessError;
use crate::exec::Execution;
use crate::rl::{train, RlSettings, TrainConfig, TrainOutcome};
use crate::sim::Scenario;

/// Seeds used to pick checkpoints. Disjoint from the default test seeds.
pub const EVAL_SEEDS: Range<u64> = 1000..1010;

/// Training seeds tried per configuration by [`train_selected`].
pub const SELECTION_SEEDS: [u64; 2] = [0, 1];

/// Training settings used for the scenario experiments: a shorter
/// discount horizon, larger batches, and a higher step size than the PPO
/// defaults. Ten checkpoint-selection seeds.
pub fn experiment_config(settings: RlSettings, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(settings);
    cfg.seed = seed;
    cfg.iterations = 100;
    cfg.episodes_per_iteration = 16;
    cfg.eval_seeds = EVAL_SEEDS.collect();
    cfg.ppo.gamma = 0.9;
    cfg.ppo.lr = 1e-3;
    cfg
}

/// The winning run of [`train_selected`].
#[derive(Debug, Clone)]
pub struct SelectedRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    /// (training seed, best evaluation TTS) for every candidate.
    pub candidates: Vec<(u64, f64)>,
}

/// Trains once per seed with `cfg_for(seed)` and keeps the run whose best
/// checkpoint has the lowest evaluation TTS. Ties go to the earlier seed.
pub fn train_selected<F>(
    scenario: &Scenario,
    seeds: &[u64],
    cfg_for: F,
    execution: Execution,
) -> Result<SelectedRun, HarnessError>
where
    F: Fn(u64) -> TrainConfig,
{
    let mut best: Option<(u64, TrainOutcome)> = None;
    let mut candidates = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let out = train(scenario, &cfg_for(seed), execution)?;
        candidates.push((seed, out.best_eval_tts_h));
        if best.as_ref().is_none_or(|(_, b)| out.best_eval_tts_h < b.best_eval_tts_h) {
            best = Some((seed, out));
        }
    }
    let (seed, outcome) = best.ok_or_else(|| HarnessError::Invalid("no training seeds".into()))?;
    Ok(SelectedRun { seed, outcome, candidates })
}
