use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use mhp_core::exec::Execution;
use mhp_core::harness::{
    correlation_report, median, paired_wins, split_report, tts_vs_hop_report, write_scatter_csv,
};
use mhp_core::rl::{evaluate_policies, PolicySet};
use mhp_core::sim::{run_episode, EpisodeOptions};

use crate::sim::{controller_spec, load_scenario};
use crate::{manifest_beside, stdout_manifest, Checks, ControllerKind, Ctx};

#[derive(Subcommand)]
pub enum ReportCommand {
    /// Pearson correlation between episode reward and TTS.
    Correlation(CorrelationArgs),
    /// Time-weighted mean green splits over a window.
    Splits(SplitsArgs),
    /// TTS per hop for one trained checkpoint per hop.
    Hops(HopsArgs),
}

#[derive(Args)]
pub struct CorrelationArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    policy: PathBuf,
    /// Evaluation seeds 0..N.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Scatter CSV of seed, reward, TTS.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 unless r is at most this value.
    #[arg(long, value_name = "MAX_R", allow_negative_numbers = true)]
    assert_max: Option<f64>,
}

#[derive(Args)]
pub struct SplitsArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value = "rl")]
    controller: ControllerKind,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Seeds 0..N, averaged.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Window end in seconds; defaults to the horizon.
    #[arg(long)]
    end: Option<f64>,
    /// Require phase 0 : phase 1 at this intersection index to reach
    /// `--min-ratio`.
    #[arg(long, requires = "min_ratio")]
    ratio_at: Option<usize>,
    #[arg(long, requires = "ratio_at")]
    min_ratio: Option<f64>,
    /// Require phase 0 at this intersection index to sit within 0.01 of its
    /// largest allowed share.
    #[arg(long)]
    max_at: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HopPattern {
    /// TTS falls as the hop grows.
    Saturated,
    /// The largest hop stays within 5% of hop 0.
    Flat,
}

#[derive(Args)]
pub struct HopsArgs {
    #[arg(long)]
    scenario: String,
    /// Checkpoints in increasing hop order.
    #[arg(long, value_delimiter = ',', required = true)]
    policies: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "assert", value_enum)]
    pattern: Option<HopPattern>,
}

/// Checks a TTS-versus-hop pattern over (hop, per-seed TTS) rows sorted by
/// hop. With two hops the saturated pattern asks the larger hop to win at
/// least 8 of 10 seed pairs; with more it asks medians to fall strictly.
pub fn check_hop_pattern(checks: &mut Checks, label: &str, pattern: HopPattern, rows: &[(usize, Vec<f64>)]) {
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    match pattern {
        HopPattern::Saturated if rows.len() == 2 => {
            let wins = paired_wins(&last.1, &first.1);
            let need = (last.1.len() * 8).div_ceil(10);
            checks.check(wins >= need, format!("{label}: H{} beats H{} on {wins}/{} seeds", last.0, first.0, last.1.len()));
        }
        HopPattern::Saturated => {
            let medians: Vec<f64> = rows.iter().map(|r| median(&r.1)).collect();
            let falling = medians.windows(2).all(|w| w[1] < w[0]);
            let shown: Vec<String> = rows.iter().zip(&medians).map(|(r, m)| format!("H{} {m:.2}", r.0)).collect();
            checks.check(falling, format!("{label}: median TTS falls with hop ({})", shown.join(", ")));
        }
        HopPattern::Flat => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let base = mean(&first.1);
            let gap = (mean(&last.1) - base).abs() / base;
            checks.check(gap <= 0.05, format!("{label}: H{} within {:.2}% of H{}", last.0, 100.0 * gap, first.0));
        }
    }
}

pub fn run(ctx: &Ctx, cmd: ReportCommand) -> Result<()> {
    match cmd {
        ReportCommand::Correlation(a) => correlation(ctx, a),
        ReportCommand::Splits(a) => splits(ctx, a),
        ReportCommand::Hops(a) => hops(ctx, a),
    }
}

fn load_policy(path: &PathBuf) -> Result<PolicySet> {
    PolicySet::load(path).with_context(|| format!("loading {}", path.display()))
}

fn correlation(ctx: &Ctx, a: CorrelationArgs) -> Result<()> {
    let s = load_scenario(&a.scenario)?;
    let set = load_policy(&a.policy)?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let evals = evaluate_policies(&s, &set, &seeds, Execution::Parallel)?;
    let rewards: Vec<f64> = evals.iter().map(|e| e.reward).collect();
    let tts: Vec<f64> = evals.iter().map(|e| e.log.total_time_spent_h).collect();
    let r = correlation_report(&rewards, &tts)?;
    println!("pearson_r: {r}");
    println!("episodes: {}", seeds.len());
    if let Some(out) = &a.out {
        write_scatter_csv(&seeds, &rewards, &tts, std::fs::File::create(out)?)?;
    }
    let m = ctx.manifest("report correlation").scenario(&s, &a.scenario).input(&a.policy)?.seeds(&seeds);
    ctx.write_manifest(&m, &a.out.as_deref().map(manifest_beside).unwrap_or_else(stdout_manifest))?;
    let mut checks = Checks::default();
    if let Some(max) = a.assert_max {
        checks.check(r <= max, format!("r = {r:.4} <= {max}"));
    }
    checks.finish()
}

fn splits(ctx: &Ctx, a: SplitsArgs) -> Result<()> {
    let s = load_scenario(&a.scenario)?;
    let spec = controller_spec(a.controller, a.hop, a.policy.as_deref())?;
    let end = a.end.unwrap_or(s.timing.horizon_s);
    if !(end > a.start) {
        bail!("empty window [{}, {end})", a.start);
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let n_int = s.intersections.len();
    if seeds.is_empty() {
        bail!("--seeds must be positive");
    }
    for i in [a.ratio_at, a.max_at].into_iter().flatten() {
        if i >= n_int {
            bail!("intersection index {i} out of range (scenario has {n_int})");
        }
        if s.intersections[i].phases.len() < 2 {
            bail!("intersection {} has a single phase", s.intersections[i].id);
        }
    }
    let mut mean = vec![Vec::<f64>::new(); n_int];
    for &seed in &seeds {
        let mut c = spec.build(&s)?;
        let log = run_episode(&s, c.as_mut(), seed, EpisodeOptions::default())?;
        for (i, acc) in mean.iter_mut().enumerate() {
            let sum = split_report(&log, i, a.start, end)?;
            if acc.is_empty() {
                *acc = vec![0.0; sum.mean_splits.len()];
            }
            for (x, y) in acc.iter_mut().zip(&sum.mean_splits) {
                *x += y / seeds.len() as f64;
            }
        }
    }
    println!("intersection,phase,mean_share");
    for (i, shares) in mean.iter().enumerate() {
        for (k, share) in shares.iter().enumerate() {
            println!("{},{},{share}", s.intersections[i].id, s.intersections[i].phases[k].label);
        }
    }
    let m = ctx.manifest("report splits").scenario(&s, &a.scenario).seeds(&seeds).config(&serde_json::json!({
        "controller": spec.method(),
        "hop": spec.hop(),
        "start_s": a.start,
        "end_s": end,
    }))?;
    let m = match &a.policy {
        Some(p) => m.input(p)?,
        None => m,
    };
    ctx.write_manifest(&m, &stdout_manifest())?;

    let mut checks = Checks::default();
    if let (Some(i), Some(min)) = (a.ratio_at, a.min_ratio) {
        let ratio = mean[i][0] / mean[i][1];
        checks.check(ratio >= min, format!("{} phase ratio {ratio:.2}:1 >= {min}:1", s.intersections[i].id));
    }
    if let Some(i) = a.max_at {
        let floors = s.intersections[i].min_splits(s.timing.cycle_s);
        let max = 1.0 - floors[1..].iter().sum::<f64>();
        let got = mean[i][0];
        checks.check(got >= max - 0.01, format!("{} phase 0 share {got:.3} at maximum {max:.3}", s.intersections[i].id));
    }
    checks.finish()
}

fn hops(ctx: &Ctx, a: HopsArgs) -> Result<()> {
    let s = load_scenario(&a.scenario)?;
    let sets = a.policies.iter().map(load_policy).collect::<Result<Vec<_>>>()?;
    if sets.windows(2).any(|w| w[1].settings.hop <= w[0].settings.hop) {
        bail!("checkpoints must be given in increasing hop order");
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let report = tts_vs_hop_report(&s, &sets.iter().collect::<Vec<_>>(), &seeds, Execution::Parallel)?;
    report.write_csv(std::io::stdout().lock())?;
    if let Some(out) = &a.out {
        report.write_csv(std::fs::File::create(out)?)?;
    }
    let mut m = ctx.manifest("report hops").scenario(&s, &a.scenario).seeds(&seeds);
    for p in &a.policies {
        m = m.input(p)?;
    }
    ctx.write_manifest(&m, &a.out.as_deref().map(manifest_beside).unwrap_or_else(stdout_manifest))?;

    let mut checks = Checks::default();
    if let Some(pattern) = a.pattern {
        let rows: Vec<(usize, Vec<f64>)> = report.rows.iter().map(|r| (r.hop, r.per_seed_h.clone())).collect();
        check_hop_pattern(&mut checks, &s.name, pattern, &rows);
    }
    checks.finish()
}
