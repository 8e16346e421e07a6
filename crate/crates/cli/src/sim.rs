use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use mhp_core::harness::{load_scenario_or_path, ControllerSpec};
use mhp_core::rl::PolicySet;
use mhp_core::sim::{run_episode, EpisodeOptions, MetricsLog, Scenario};

use crate::{manifest_beside, ControllerKind, Ctx};

#[derive(Subcommand)]
pub enum SimCommand {
    /// Runs one episode and writes the per-step queue trace.
    Run(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum)]
    controller: ControllerKind,
    /// Pressure hop for maxpressure and greedy. For rl it must match the
    /// checkpoint if given.
    #[arg(long)]
    hop: Option<usize>,
    /// Checkpoint for the rl controller.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV: time and measured queue per link after every step.
    #[arg(long)]
    out: PathBuf,
    /// Also write the split history to this CSV.
    #[arg(long)]
    splits: Option<PathBuf>,
}

pub fn load_scenario(arg: &str) -> Result<Scenario> {
    load_scenario_or_path(arg).with_context(|| format!("loading scenario `{arg}`"))
}

/// Builds a controller spec from CLI arguments.
pub fn controller_spec(kind: ControllerKind, hop: Option<usize>, policy: Option<&Path>) -> Result<ControllerSpec> {
    let need_hop = || hop.with_context(|| format!("--hop is required for {kind:?}").to_lowercase());
    Ok(match kind {
        ControllerKind::Webster => ControllerSpec::Webster,
        ControllerKind::Maxpressure => ControllerSpec::MaxPressure { hop: need_hop()? },
        ControllerKind::Greedy => ControllerSpec::Greedy { hop: need_hop()? },
        ControllerKind::Rl => {
            let path = policy.context("--policy is required for rl")?;
            let set = PolicySet::load(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(h) = hop {
                if h != set.settings.hop {
                    bail!("--hop {h} does not match the checkpoint's hop {}", set.settings.hop);
                }
            }
            ControllerSpec::Rl(Arc::new(set))
        }
    })
}

fn write_trace(s: &Scenario, log: &MetricsLog, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    let mut header = vec!["t_s".to_string()];
    header.extend((0..s.graph.real_len()).map(|l| s.graph.name(mhp_core::network::LinkId(l)).to_string()));
    w.write_record(&header)?;
    for (k, q) in log.queue_trace.iter().flatten().enumerate() {
        let mut rec = vec![((k + 1) as f64 * s.timing.dt_s).to_string()];
        rec.extend(q.iter().take(s.graph.real_len()).map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_splits(s: &Scenario, log: &MetricsLog, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(["intersection", "start_s", "duration_s", "phase", "share"])?;
    for r in &log.splits {
        for (k, share) in r.splits.iter().enumerate() {
            w.write_record([
                s.intersections[r.intersection].id.clone(),
                r.start_s.to_string(),
                r.duration_s.to_string(),
                s.intersections[r.intersection].phases[k].label.clone(),
                share.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(ctx: &Ctx, cmd: SimCommand) -> Result<()> {
    let SimCommand::Run(a) = cmd;
    let s = load_scenario(&a.scenario)?;
    let spec = controller_spec(a.controller, a.hop, a.policy.as_deref())?;
    let mut controller = spec.build(&s)?;
    let log = run_episode(&s, controller.as_mut(), a.seed, EpisodeOptions { record_trace: true })?;
    write_trace(&s, &log, &a.out)?;
    if let Some(p) = &a.splits {
        write_splits(&s, &log, p)?;
    }

    println!("scenario: {}", s.name);
    println!("controller: {}", spec.method());
    println!("total_time_spent_h: {}", log.total_time_spent_h);
    println!("total_queue_time_h: {}", log.total_queue_time_h);
    println!("virtual_queue_time_h: {}", log.total_virtual_queue_time_h);
    println!("generated: {}", log.generated);
    println!("exited: {}", log.exited);
    println!("state_digest: {}", log.state_digest);

    let mut m = ctx.manifest("sim run").scenario(&s, &a.scenario).seeds(&[a.seed]).config(&serde_json::json!({
        "controller": spec.method(),
        "hop": spec.hop(),
        "policy": a.policy,
        "state_digest": log.state_digest,
    }))?;
    if let Some(p) = &a.policy {
        m = m.input(p)?;
    }
    ctx.write_manifest(&m, &manifest_beside(&a.out))
}
