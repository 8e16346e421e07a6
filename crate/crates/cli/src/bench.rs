use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use mhp_core::exec::Execution;
use mhp_core::harness::{
    evaluate, experiment_config, load_scenario, train_selected, ControllerSpec, ResultTable, SeedRow, MANIFEST_FILE,
    SELECTION_SEEDS,
};
use mhp_core::rl::{ObservationMode, PolicySet, RewardMode, RlSettings};

use crate::report::{check_hop_pattern, HopPattern};
use crate::{Checks, Ctx};

const DEFAULT_SCENARIOS: [&str; 6] =
    ["net1x2-under", "net1x2-slight", "net1x2-heavy", "net1x3-under", "net1x3-slight", "net1x3-heavy"];

#[derive(Args)]
pub struct BenchArgs {
    /// Output directory for the tables, per-seed rows, and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Built-in scenario names; defaults to the 1x2 and 1x3 arterials at
    /// every demand level.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Replication seeds 0..N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Largest hop evaluated; defaults to one less than the number of
    /// intersections.
    #[arg(long)]
    max_hop: Option<usize>,
    /// Directory of checkpoints named `<scenario>-h<H>.json` for the rl rows.
    #[arg(long)]
    policies: Option<PathBuf>,
    /// Train checkpoints that `--policies` does not provide and save them
    /// under `<out>/policies`.
    #[arg(long)]
    train: bool,
    /// Training episodes per run when `--train` is given.
    #[arg(long, default_value_t = 1600)]
    episodes: usize,
    /// Check the TTS-versus-hop pattern of the rl rows on the heavy and
    /// undersaturated scenarios; exit with status 2 if it does not hold.
    #[arg(long = "assert")]
    check: bool,
}

fn checkpoint_name(scenario: &str, hop: usize) -> String {
    format!("{scenario}-h{hop}.json")
}

pub fn run(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let names: Vec<String> =
        if a.scenarios.is_empty() { DEFAULT_SCENARIOS.iter().map(|s| s.to_string()).collect() } else { a.scenarios.clone() };
    let seeds: Vec<u64> = (0..a.seeds).collect();
    anyhow::ensure!(!seeds.is_empty(), "--seeds must be positive");
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let trained_dir = a.out.join("policies");

    let mut manifest = ctx.manifest("bench").seeds(&seeds);
    let mut all_rows: Vec<SeedRow> = Vec::new();
    let mut checks = Checks::default();
    for name in &names {
        let s = load_scenario(name)?;
        manifest = manifest.scenario(&s, name);
        let max_hop = a.max_hop.unwrap_or(s.intersections.len().saturating_sub(1));

        let mut specs = vec![ControllerSpec::Webster];
        specs.extend((0..=max_hop).map(|hop| ControllerSpec::MaxPressure { hop }));
        specs.extend((0..=max_hop).map(|hop| ControllerSpec::Greedy { hop }));
        for hop in 0..=max_hop {
            let found = a.policies.as_ref().map(|d| d.join(checkpoint_name(name, hop))).filter(|p| p.exists());
            let set = match found {
                Some(p) => {
                    manifest = manifest.input(&p)?;
                    PolicySet::load(&p).with_context(|| format!("loading {}", p.display()))?
                }
                None if a.train => {
                    let settings = RlSettings { hop, reward: RewardMode::Potential, observation: ObservationMode::AtHop };
                    let cfg_for = |seed| {
                        let mut cfg = experiment_config(settings, seed);
                        cfg.iterations = a.episodes.div_ceil(cfg.episodes_per_iteration);
                        cfg
                    };
                    eprintln!("training {name} H={hop}");
                    let run = train_selected(&s, &SELECTION_SEEDS, cfg_for, Execution::Parallel)?;
                    std::fs::create_dir_all(&trained_dir)?;
                    let path = trained_dir.join(checkpoint_name(name, hop));
                    run.outcome.best.save(&path)?;
                    run.outcome.best
                }
                None => continue,
            };
            specs.push(ControllerSpec::Rl(Arc::new(set)));
        }

        let mut table = ResultTable::new(name);
        let mut rl_rows = Vec::new();
        for spec in &specs {
            let e = evaluate(&s, spec, &seeds, Execution::Parallel)?;
            if let ControllerSpec::Rl(_) = spec {
                rl_rows.push((spec.hop().unwrap_or(0), e.per_seed.iter().map(|r| r.tts_h).collect::<Vec<_>>()));
            }
            table.rows.push(e.row);
            all_rows.extend(e.per_seed);
        }
        print_table(&table);
        table.write_csv(std::fs::File::create(a.out.join(format!("table-{name}.csv")))?)?;

        if a.check {
            let pattern = if name.ends_with("-heavy") {
                Some(HopPattern::Saturated)
            } else if name.ends_with("-under") {
                Some(HopPattern::Flat)
            } else {
                None
            };
            match pattern {
                Some(p) if rl_rows.len() == max_hop + 1 && max_hop > 0 => {
                    let rows = if p == HopPattern::Flat { vec![rl_rows[0].clone(), rl_rows[max_hop].clone()] } else { rl_rows };
                    check_hop_pattern(&mut checks, name, p, &rows);
                }
                Some(_) => checks.check(false, format!("{name}: rl checkpoints missing for hops 0..={max_hop}")),
                None => {}
            }
        }
    }
    ResultTable::write_seed_csv(&all_rows, std::fs::File::create(a.out.join("per_seed.csv"))?)?;

    let manifest = manifest.config(&serde_json::json!({
        "scenarios": names,
        "max_hop": a.max_hop,
        "train": a.train,
        "episodes": a.episodes,
        "selection_seeds": SELECTION_SEEDS,
    }))?;
    ctx.write_manifest(&manifest, &a.out.join(MANIFEST_FILE))?;
    checks.finish()
}

fn print_table(t: &ResultTable) {
    println!("{}", t.scenario);
    println!("  {:<12} {:>3} {:>16} {:>16} {:>16}", "method", "hop", "TTS (h)", "queue (h)", "virtual (h)");
    for r in &t.rows {
        let hop = r.hop.map(|h| h.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "  {:<12} {:>3} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2}",
            r.method, hop, r.tts_mean_h, r.tts_std_h, r.queue_mean_h, r.queue_std_h, r.virtual_queue_mean_h, r.virtual_queue_std_h
        );
    }
}
