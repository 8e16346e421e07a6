use super::{Scenario, SimError};
use crate::control::{Action, ControlDecision};

/// Slack allowed when checking that splits sum to one and respect floors.
pub const SPLIT_TOLERANCE: f64 = 1e-9;

/// What an intersection's signal is currently running.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalProgram {
    /// Fixed-order cycle. `greens_s[i]` is the displayed green of phase `i`,
    /// whose first `lost_time_s` seconds do not discharge. Greens sum to the
    /// cycle length.
    Cycle { start_s: f64, cycle_s: f64, greens_s: Vec<f64> },
    /// A single phase held until the next decision. Lost time applies after
    /// every switch.
    Activation { phase: usize, green_since_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalState {
    programs: Vec<SignalProgram>,
    lost_time_s: f64,
}

impl SignalState {
    /// Equal splits at every intersection, starting at t = 0.
    pub fn new(scenario: &Scenario) -> Self {
        let cycle_s = scenario.timing.cycle_s;
        let programs = scenario
            .intersections
            .iter()
            .map(|i| SignalProgram::Cycle {
                start_s: 0.0,
                cycle_s,
                greens_s: vec![cycle_s / i.phases.len() as f64; i.phases.len()],
            })
            .collect();
        Self { programs, lost_time_s: scenario.timing.lost_time_s }
    }

    pub fn program(&self, intersection: usize) -> &SignalProgram {
        &self.programs[intersection]
    }

    /// Installs a controller decision taking effect at `now_s`. Returns the
    /// time until that intersection's next decision is due.
    pub fn apply(&mut self, scenario: &Scenario, decision: &ControlDecision, now_s: f64) -> Result<f64, SimError> {
        let ii = decision.intersection;
        let inter = scenario
            .intersections
            .get(ii)
            .ok_or_else(|| SimError::InvalidDecision(format!("unknown intersection {ii}")))?;
        match &decision.action {
            Action::Splits { cycle_s, splits } => {
                check_splits(splits, &inter.min_splits(*cycle_s))?;
                if !(*cycle_s > 0.0) {
                    return Err(SimError::InvalidDecision("cycle must be positive".into()));
                }
                self.programs[ii] = SignalProgram::Cycle {
                    start_s: now_s,
                    cycle_s: *cycle_s,
                    greens_s: splits.iter().map(|s| s * cycle_s).collect(),
                };
                Ok(*cycle_s)
            }
            Action::Activate { phase, period_s } => {
                if *phase >= inter.phases.len() {
                    return Err(SimError::InvalidDecision(format!("phase {phase} out of range at {}", inter.id)));
                }
                let green_since_s = match self.programs[ii] {
                    SignalProgram::Activation { phase: p, green_since_s } if p == *phase => green_since_s,
                    _ => now_s,
                };
                self.programs[ii] = SignalProgram::Activation { phase: *phase, green_since_s };
                Ok(*period_s)
            }
        }
    }

    /// Phase shown at `t` and whether it is past its lost time.
    pub fn active_phase(&self, intersection: usize, t: f64) -> (usize, bool) {
        match &self.programs[intersection] {
            SignalProgram::Cycle { start_s, cycle_s, greens_s } => {
                let elapsed = (t - start_s).rem_euclid(*cycle_s);
                let mut acc = 0.0;
                for (i, g) in greens_s.iter().enumerate() {
                    if elapsed < acc + g {
                        return (i, elapsed - acc >= self.lost_time_s);
                    }
                    acc += g;
                }
                // Rounding can leave `elapsed` a hair past the last boundary.
                let last = greens_s.len() - 1;
                (last, greens_s[last] > self.lost_time_s)
            }
            SignalProgram::Activation { phase, green_since_s } => (*phase, t - green_since_s >= self.lost_time_s),
        }
    }
}

/// Splits must be finite, sum to one, and respect their floors.
pub fn check_splits(splits: &[f64], floors: &[f64]) -> Result<(), SimError> {
    if splits.len() != floors.len() {
        return Err(SimError::InvalidDecision(format!(
            "expected {} splits, got {}",
            floors.len(),
            splits.len()
        )));
    }
    let sum: f64 = splits.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > SPLIT_TOLERANCE {
        return Err(SimError::InvalidDecision(format!("splits sum to {sum}")));
    }
    for (s, f) in splits.iter().zip(floors) {
        if *s < f - SPLIT_TOLERANCE {
            return Err(SimError::InvalidDecision(format!("split {s} below floor {f}")));
        }
    }
    Ok(())
}
