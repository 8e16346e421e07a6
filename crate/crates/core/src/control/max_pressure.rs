use super::{check_hop, phase_pressures, Action, ControlDecision, ControlError, Controller, DecisionContext};

/// Index of the largest pressure; ties go to the lowest index.
pub fn max_pressure_choice(pressures: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in pressures.iter().enumerate().skip(1) {
        if p > pressures[best] {
            best = i;
        }
    }
    best
}

/// Activates the phase with the highest pressure for the next control
/// period. `hop = 0` is classic MaxPressure; larger hops use multi-hop
/// upstream pressure.
#[derive(Debug, Clone)]
pub struct MaxPressureController {
    hop: usize,
    period_s: Option<f64>,
}

impl MaxPressureController {
    pub fn new(hop: usize) -> Result<Self, ControlError> {
        check_hop(hop)?;
        Ok(Self { hop, period_s: None })
    }

    /// Overrides the scenario's control period.
    pub fn with_period(mut self, period_s: f64) -> Self {
        self.period_s = Some(period_s);
        self
    }
}

impl Controller for MaxPressureController {
    fn name(&self) -> String {
        format!("maxpressure-h{}", self.hop)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ControlDecision>, ControlError> {
        let period_s = self.period_s.unwrap_or(ctx.scenario.timing.control_period_s);
        ctx.due
            .iter()
            .map(|&i| {
                let pressures = phase_pressures(ctx.scenario, ctx.queues, i, self.hop)?;
                Ok(ControlDecision {
                    intersection: i,
                    action: Action::Activate { phase: max_pressure_choice(&pressures), period_s },
                })
            })
            .collect()
    }
}
