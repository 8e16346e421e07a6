use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use mhp_core::exec::Execution;
use mhp_core::harness::{experiment_config, train_selected, MANIFEST_FILE};
use mhp_core::rl::{ObservationMode, RewardMode, RlSettings, TrainConfig};

use crate::sim::load_scenario;
use crate::Ctx;

#[derive(Subcommand)]
pub enum RlCommand {
    /// Trains one agent per intersection and writes checkpoints and the
    /// learning curve.
    Train(TrainArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RewardArg {
    Potential,
    Pressure,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    hop: usize,
    #[arg(long, value_enum, default_value = "potential")]
    reward: RewardArg,
    /// Training episodes in total, rounded up to whole iterations.
    #[arg(long, default_value_t = 1600)]
    episodes: usize,
    #[arg(long, default_value_t = 0, conflicts_with = "select")]
    seed: u64,
    /// Train once per listed seed and keep the run with the best
    /// evaluation TTS.
    #[arg(long, value_delimiter = ',')]
    select: Vec<u64>,
    /// Observe pressures at every hop up to H instead of only at H.
    #[arg(long)]
    stacked: bool,
    /// One policy shared by all intersections.
    #[arg(long)]
    shared: bool,
    /// Output directory for best.json, last.json, curve.csv and the manifest.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(ctx: &Ctx, cmd: RlCommand) -> Result<()> {
    let RlCommand::Train(a) = cmd;
    if a.episodes == 0 {
        bail!("--episodes must be positive");
    }
    let s = load_scenario(&a.scenario)?;
    let settings = RlSettings {
        hop: a.hop,
        reward: match a.reward {
            RewardArg::Potential => RewardMode::Potential,
            RewardArg::Pressure => RewardMode::Pressure,
        },
        observation: if a.stacked { ObservationMode::Stacked } else { ObservationMode::AtHop },
    };
    let cfg_for = |seed: u64| -> TrainConfig {
        let mut cfg = experiment_config(settings, seed);
        cfg.iterations = a.episodes.div_ceil(cfg.episodes_per_iteration);
        cfg.share_parameters = a.shared;
        cfg
    };
    let seeds = if a.select.is_empty() { vec![a.seed] } else { a.select.clone() };
    let run = train_selected(&s, &seeds, cfg_for, Execution::Parallel)?;
    let out = &run.outcome;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    out.best.save(a.out.join("best.json"))?;
    out.last.save(a.out.join("last.json"))?;
    let mut w = csv::Writer::from_path(a.out.join("curve.csv"))?;
    for point in &out.curve {
        w.serialize(point)?;
    }
    w.flush()?;

    println!("seed: {}", run.seed);
    println!("best_iteration: {}", out.best_iteration);
    println!("best_eval_tts_h: {}", out.best_eval_tts_h);
    match out.plateau_iteration(5, 0.05) {
        Some(i) => println!("plateau_iteration: {i}"),
        None => println!("plateau_iteration: none"),
    }
    if run.candidates.len() > 1 {
        for (seed, tts) in &run.candidates {
            println!("candidate seed {seed}: {tts}");
        }
    }

    let m = ctx.manifest("rl train").scenario(&s, &a.scenario).seeds(&seeds).config(&cfg_for(run.seed))?;
    ctx.write_manifest(&m, &a.out.join(MANIFEST_FILE))
}
