use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::control::{Controller, GreedySplitController, MaxPressureController, WebsterController};
use crate::exec::{self, Execution};
use crate::rl::{ActionMode, PolicySet};
use crate::sim::{run_episode, EpisodeOptions, EpisodeSummary, Scenario};

/// Which controller to evaluate.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    Webster,
    MaxPressure { hop: usize },
    Greedy { hop: usize },
    /// Mean-action trained policies.
    Rl(Arc<PolicySet>),
}

impl ControllerSpec {
    pub fn method(&self) -> &'static str {
        match self {
            Self::Webster => "webster",
            Self::MaxPressure { .. } => "maxpressure",
            Self::Greedy { .. } => "greedy",
            Self::Rl(_) => "rl",
        }
    }

    pub fn hop(&self) -> Option<usize> {
        match self {
            Self::Webster => None,
            Self::MaxPressure { hop } | Self::Greedy { hop } => Some(*hop),
            Self::Rl(set) => Some(set.settings.hop),
        }
    }

    /// A fresh controller for one episode.
    pub fn build(&self, scenario: &Scenario) -> Result<Box<dyn Controller>, HarnessError> {
        Ok(match self {
            Self::Webster => Box::new(WebsterController::build(scenario)),
            Self::MaxPressure { hop } => {
                Box::new(MaxPressureController::new(*hop)?.with_period(scenario.timing.control_period_s))
            }
            Self::Greedy { hop } => Box::new(GreedySplitController::new(*hop)?),
            Self::Rl(set) => {
                set.check_compatible(scenario)?;
                Box::new(set.controller(ActionMode::Mean, 0))
            }
        })
    }
}

/// One episode's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub method: String,
    pub hop: Option<usize>,
    pub seed: u64,
    pub tts_h: f64,
    pub queue_h: f64,
    pub virtual_queue_h: f64,
}

/// Mean and sample standard deviation over seeds, in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub hop: Option<usize>,
    pub seeds: usize,
    pub tts_mean_h: f64,
    pub tts_std_h: f64,
    pub queue_mean_h: f64,
    pub queue_std_h: f64,
    pub virtual_queue_mean_h: f64,
    pub virtual_queue_std_h: f64,
}

impl ResultRow {
    pub fn from_seeds(method: &str, hop: Option<usize>, rows: &[SeedRow]) -> Self {
        let col = |f: fn(&SeedRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
        let (tm, ts) = col(|r| r.tts_h);
        let (qm, qs) = col(|r| r.queue_h);
        let (vm, vs) = col(|r| r.virtual_queue_h);
        Self {
            method: method.to_string(),
            hop,
            seeds: rows.len(),
            tts_mean_h: tm,
            tts_std_h: ts,
            queue_mean_h: qm,
            queue_std_h: qs,
            virtual_queue_mean_h: vm,
            virtual_queue_std_h: vs,
        }
    }
}

/// Mean and sample (n − 1) standard deviation; the deviation of a single
/// value is zero.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-seed detail plus its aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub row: ResultRow,
    pub per_seed: Vec<SeedRow>,
    pub summaries: Vec<EpisodeSummary>,
}

/// Runs one episode per seed and aggregates. Any episode error discards the
/// whole evaluation.
pub fn evaluate(
    scenario: &Scenario,
    spec: &ControllerSpec,
    seeds: &[u64],
    execution: Execution,
) -> Result<Evaluation, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Invalid("no seeds to evaluate".into()));
    }
    let results: Vec<Result<EpisodeSummary, HarnessError>> = exec::map(execution, seeds.to_vec(), |seed| {
        let mut c = spec.build(scenario)?;
        Ok(run_episode(scenario, c.as_mut(), seed, EpisodeOptions::default())?.summary())
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let per_seed: Vec<SeedRow> = seeds
        .iter()
        .zip(&summaries)
        .map(|(&seed, s)| SeedRow {
            method: spec.method().to_string(),
            hop: spec.hop(),
            seed,
            tts_h: s.tts_h,
            queue_h: s.queue_h,
            virtual_queue_h: s.virtual_queue_h,
        })
        .collect();
    Ok(Evaluation { row: ResultRow::from_seeds(spec.method(), spec.hop(), &per_seed), per_seed, summaries })
}

/// Rows keyed by (method, hop) for one scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub scenario: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(scenario: &str) -> Self {
        Self { scenario: scenario.to_string(), rows: Vec::new() }
    }

    pub fn row(&self, method: &str, hop: Option<usize>) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.hop == hop)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "method",
            "hop",
            "seeds",
            "tts_mean_h",
            "tts_std_h",
            "queue_mean_h",
            "queue_std_h",
            "virtual_queue_mean_h",
            "virtual_queue_std_h",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.scenario.clone(),
                r.method.clone(),
                r.hop.map(|h| h.to_string()).unwrap_or_default(),
                r.seeds.to_string(),
                r.tts_mean_h.to_string(),
                r.tts_std_h.to_string(),
                r.queue_mean_h.to_string(),
                r.queue_std_h.to_string(),
                r.virtual_queue_mean_h.to_string(),
                r.virtual_queue_std_h.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-seed CSV. Floats are written in shortest round-trip form, so the
    /// table can be rebuilt from it exactly.
    pub fn write_seed_csv<W: Write>(rows: &[SeedRow], out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_seed_csv<R: Read>(input: R) -> Result<Vec<SeedRow>, HarnessError> {
        let mut r = csv::Reader::from_reader(input);
        Ok(r.deserialize().collect::<Result<Vec<SeedRow>, _>>()?)
    }

    /// Aggregates per-seed rows, keeping first-appearance order of
    /// (method, hop).
    pub fn from_seed_rows(scenario: &str, rows: &[SeedRow]) -> Self {
        let mut keys: Vec<(String, Option<usize>)> = Vec::new();
        for r in rows {
            let k = (r.method.clone(), r.hop);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let rows = keys
            .iter()
            .map(|(m, h)| {
                let group: Vec<SeedRow> = rows.iter().filter(|r| &r.method == m && r.hop == *h).cloned().collect();
                ResultRow::from_seeds(m, *h, &group)
            })
            .collect();
        Self { scenario: scenario.to_string(), rows }
    }
}
