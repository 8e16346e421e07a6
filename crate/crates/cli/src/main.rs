//! `mhp`: network checks, pressure vectors, simulation runs, training, and
//! the experiment table.
//!
//! Exit status is 0 on success, 1 when an input or argument is invalid, and
//! 2 when a requested acceptance assertion does not hold.

mod bench;
mod net;
mod report;
mod rl;
mod sim;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use mhp_core::harness::Manifest;

#[derive(Parser)]
#[command(name = "mhp", version, about = "Multi-hop upstream pressure for traffic signal control")]
struct Cli {
    /// Where to write the run manifest. Commands that write files default
    /// to a manifest beside their output; the others to ./mhp-manifest.json.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Network file checks.
    #[command(subcommand)]
    Net(net::NetCommand),
    /// Pressure vectors for a queue snapshot.
    #[command(subcommand)]
    Pressure(net::PressureCommand),
    /// Simulation runs.
    #[command(subcommand)]
    Sim(sim::SimCommand),
    /// Policy training.
    #[command(subcommand)]
    Rl(rl::RlCommand),
    /// Reproduces the comparison table over the scenario catalog.
    Bench(bench::BenchArgs),
    /// Behavioral reports on trained policies.
    #[command(subcommand)]
    Report(report::ReportCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Webster,
    Maxpressure,
    Greedy,
    Rl,
}

/// An acceptance check that did not hold.
#[derive(Debug)]
pub struct AssertionFailed(pub String);

impl fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

/// Collected assertion outcomes; fails if any did not hold.
#[derive(Default)]
pub struct Checks(Vec<String>);

impl Checks {
    pub fn check(&mut self, ok: bool, what: String) {
        println!("{} {what}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.0.push(what);
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(AssertionFailed(self.0.join("; ")).into())
        }
    }
}

/// Run-wide context handed to every command.
pub struct Ctx {
    manifest_path: Option<PathBuf>,
    threads: Option<usize>,
}

impl Ctx {
    pub fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, std::env::args().skip(1).collect()).threads(self.threads)
    }

    /// Writes the manifest to `--manifest` or, failing that, `default`.
    pub fn write_manifest(&self, m: &Manifest, default: &Path) -> Result<()> {
        let path = self.manifest_path.as_deref().unwrap_or(default);
        m.write(path)?;
        eprintln!("manifest: {}", path.display());
        Ok(())
    }
}

/// `run.csv` -> `run.manifest.json`.
pub fn manifest_beside(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn stdout_manifest() -> PathBuf {
    PathBuf::from("mhp-manifest.json")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let ctx = Ctx { manifest_path: cli.manifest, threads: mhp_core::exec::init_threads_from_env() };
    let result = match cli.command {
        Command::Net(c) => net::run_net(&ctx, c),
        Command::Pressure(c) => net::run_pressure(&ctx, c),
        Command::Sim(c) => sim::run(&ctx, c),
        Command::Rl(c) => rl::run(&ctx, c),
        Command::Bench(a) => bench::run(&ctx, a),
        Command::Report(c) => report::run(&ctx, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<AssertionFailed>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
