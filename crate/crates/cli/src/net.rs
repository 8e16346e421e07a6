use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use mhp_core::network::{ExtendedGraph, NetworkFile, QueueSnapshot};
use mhp_core::pressure::pressure_vectors;

use crate::{stdout_manifest, Ctx};

#[derive(Subcommand)]
pub enum NetCommand {
    /// Checks a network file and prints a summary.
    Validate { file: PathBuf },
    /// Prints the transition matrix, supersink last, as CSV.
    Matrix { file: PathBuf },
}

#[derive(Subcommand)]
pub enum PressureCommand {
    /// Pressure of every link at hop H.
    Compute(ComputeArgs),
}

#[derive(Args)]
pub struct ComputeArgs {
    #[arg(long)]
    net: PathBuf,
    /// CSV with header `link,queue`; links left out have an empty queue.
    #[arg(long)]
    queues: PathBuf,
    #[arg(long)]
    hop: usize,
    /// One column per hop from 0 to H.
    #[arg(long)]
    all_hops: bool,
    /// Divide queues by link length (veh/km).
    #[arg(long)]
    density: bool,
}

fn load(file: &PathBuf) -> Result<ExtendedGraph> {
    let doc = NetworkFile::read(file).with_context(|| format!("reading {}", file.display()))?;
    doc.build().with_context(|| format!("validating {}", file.display()))
}

pub fn run_net(ctx: &Ctx, cmd: NetCommand) -> Result<()> {
    match cmd {
        NetCommand::Validate { file } => {
            let g = load(&file)?;
            let base = g.base();
            let entries = base.links().iter().filter(|l| l.is_entry).count();
            println!("links: {}", g.real_len());
            println!("movements: {}", base.movements().len());
            println!("entries: {entries}");
            println!("exits: {}", base.exits().count());
            match g.longest_path_to_sink() {
                Some(n) => println!("longest path to sink: {n}"),
                None => println!("longest path to sink: unbounded (cycle)"),
            }
            ctx.write_manifest(&ctx.manifest("net validate").input(&file)?, &stdout_manifest())
        }
        NetCommand::Matrix { file } => {
            let g = load(&file)?;
            let names: Vec<String> = g.index_order().map(|l| g.name(l).to_string()).collect();
            let stdout = std::io::stdout();
            g.transition_matrix().write_csv(&names, stdout.lock())?;
            ctx.write_manifest(&ctx.manifest("net matrix").input(&file)?, &stdout_manifest())
        }
    }
}

fn read_queues(g: &ExtendedGraph, path: &PathBuf) -> Result<QueueSnapshot> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut real = vec![0.0; g.real_len()];
    let mut seen = HashMap::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let (Some(name), Some(value)) = (rec.get(0), rec.get(1)) else {
            bail!("{} row {}: expected `link,queue`", path.display(), row + 1);
        };
        let id = g.id(name.trim())?;
        if id == g.supersink() {
            bail!("{} row {}: the supersink carries no queue", path.display(), row + 1);
        }
        let q: f64 = value.trim().parse().with_context(|| format!("{} row {}", path.display(), row + 1))?;
        if let Some(prev) = seen.insert(id, row + 1) {
            bail!("{} rows {prev} and {}: link `{name}` listed twice", path.display(), row + 1);
        }
        real[id.0] = q;
    }
    Ok(QueueSnapshot::from_real(g, &real)?)
}

pub fn run_pressure(ctx: &Ctx, cmd: PressureCommand) -> Result<()> {
    let PressureCommand::Compute(a) = cmd;
    let g = load(&a.net)?;
    let mut q = read_queues(&g, &a.queues)?;
    if a.density {
        q = q.density_normalized(&g);
    }
    let vectors = pressure_vectors(&g.transition_matrix(), &q, a.hop)?;
    let shown = if a.all_hops { &vectors[..] } else { &vectors[a.hop..] };

    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let mut header = vec!["link".to_string()];
    header.extend(shown.iter().map(|v| format!("p{}", v.hop)));
    w.write_record(&header)?;
    for l in g.index_order() {
        let mut rec = vec![g.name(l).to_string()];
        rec.extend(shown.iter().map(|v| v.values[l.0].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    std::io::stdout().flush()?;

    let m = ctx
        .manifest("pressure compute")
        .input(&a.net)?
        .input(&a.queues)?
        .config(&serde_json::json!({ "hop": a.hop, "all_hops": a.all_hops, "density": a.density }))?;
    ctx.write_manifest(&m, &stdout_manifest())
}
