use std::io::Write;

use serde::{Deserialize, Serialize};

use super::table::mean_std;
use super::HarnessError;
use crate::exec::Execution;
use crate::rl::{evaluate_policies, PolicySet};
use crate::sim::{MetricsLog, Scenario};

/// Time-weighted mean green share per phase over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub intersection: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub mean_splits: Vec<f64>,
}

impl SplitSummary {
    /// Mean share of phase `a` over mean share of phase `b`.
    pub fn ratio(&self, a: usize, b: usize) -> f64 {
        self.mean_splits[a] / self.mean_splits[b]
    }
}

/// Averages the split history of one intersection over `[start_s, end_s)`,
/// weighting each decision by how long it overlaps the window.
pub fn split_report(
    log: &MetricsLog,
    intersection: usize,
    start_s: f64,
    end_s: f64,
) -> Result<SplitSummary, HarnessError> {
    let empty = || HarnessError::EmptyWindow { intersection, start_s, end_s };
    let mut weight = 0.0;
    let mut acc: Vec<f64> = Vec::new();
    for r in log.splits.iter().filter(|r| r.intersection == intersection) {
        let overlap = (r.start_s + r.duration_s).min(end_s) - r.start_s.max(start_s);
        if overlap <= 0.0 {
            continue;
        }
        if acc.is_empty() {
            acc = vec![0.0; r.splits.len()];
        }
        for (a, s) in acc.iter_mut().zip(&r.splits) {
            *a += overlap * s;
        }
        weight += overlap;
    }
    if weight <= 0.0 {
        return Err(empty());
    }
    Ok(SplitSummary { intersection, start_s, end_s, mean_splits: acc.iter().map(|a| a / weight).collect() })
}

/// Fewest paired samples a correlation is reported for.
pub const MIN_CORRELATION_SAMPLES: usize = 10;

/// Pearson's r.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, HarnessError> {
    if x.len() != y.len() {
        return Err(HarnessError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(HarnessError::TooFewSamples { got: x.len(), need: 2 });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(HarnessError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson's r between per-episode rewards and TTS, requiring at least
/// [`MIN_CORRELATION_SAMPLES`] pairs.
pub fn correlation_report(rewards: &[f64], tts_h: &[f64]) -> Result<f64, HarnessError> {
    if rewards.len() < MIN_CORRELATION_SAMPLES {
        return Err(HarnessError::TooFewSamples { got: rewards.len(), need: MIN_CORRELATION_SAMPLES });
    }
    pearson(rewards, tts_h)
}

pub fn write_scatter_csv<W: Write>(seeds: &[u64], rewards: &[f64], tts_h: &[f64], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "reward", "tts_h"])?;
    for ((s, r), t) in seeds.iter().zip(rewards).zip(tts_h) {
        w.write_record([s.to_string(), r.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub hop: usize,
    pub tts_mean_h: f64,
    pub tts_std_h: f64,
    pub tts_median_h: f64,
    /// TTS per evaluation seed, in seed order.
    pub per_seed_h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<HopRow>,
}

impl HopReport {
    pub fn row(&self, hop: usize) -> Option<&HopRow> {
        self.rows.iter().find(|r| r.hop == hop)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "hop", "tts_mean_h", "tts_std_h", "tts_median_h"])?;
        for r in &self.rows {
            w.write_record([
                self.scenario.clone(),
                r.hop.to_string(),
                r.tts_mean_h.to_string(),
                r.tts_std_h.to_string(),
                r.tts_median_h.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates one trained policy set per hop on the same seeds.
pub fn tts_vs_hop_report(
    scenario: &Scenario,
    policies: &[&PolicySet],
    seeds: &[u64],
    execution: Execution,
) -> Result<HopReport, HarnessError> {
    let mut rows = Vec::with_capacity(policies.len());
    for set in policies {
        let evals = evaluate_policies(scenario, set, seeds, execution)?;
        let per_seed_h: Vec<f64> = evals.iter().map(|e| e.log.total_time_spent_h).collect();
        let (m, s) = mean_std(&per_seed_h);
        rows.push(HopRow {
            hop: set.settings.hop,
            tts_mean_h: m,
            tts_std_h: s,
            tts_median_h: median(&per_seed_h),
            per_seed_h,
        });
    }
    Ok(HopReport { scenario: scenario.name.clone(), seeds: seeds.to_vec(), rows })
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Number of positions where `a` is strictly lower than `b`.
pub fn paired_wins(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x < y).count()
}
