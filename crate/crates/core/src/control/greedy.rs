use super::{
    check_hop, phase_pressures, project_with_floors, Action, ControlDecision, ControlError, Controller,
    DecisionContext,
};

/// Splits proportional to the positive part of each phase pressure, floored
/// at the minimum greens. All-nonpositive pressures give equal splits.
pub fn greedy_splits(pressures: &[f64], floors: &[f64]) -> Vec<f64> {
    let weights: Vec<f64> = pressures.iter().map(|p| p.max(0.0)).collect();
    project_with_floors(&weights, floors)
}

/// Non-learning analog of the split-setting agents.
#[derive(Debug, Clone)]
pub struct GreedySplitController {
    hop: usize,
}

impl GreedySplitController {
    pub fn new(hop: usize) -> Result<Self, ControlError> {
        check_hop(hop)?;
        Ok(Self { hop })
    }
}

impl Controller for GreedySplitController {
    fn name(&self) -> String {
        format!("greedy-h{}", self.hop)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ControlDecision>, ControlError> {
        let cycle_s = ctx.scenario.timing.cycle_s;
        ctx.due
            .iter()
            .map(|&i| {
                let pressures = phase_pressures(ctx.scenario, ctx.queues, i, self.hop)?;
                let floors = ctx.scenario.intersections[i].min_splits(cycle_s);
                Ok(ControlDecision {
                    intersection: i,
                    action: Action::Splits { cycle_s, splits: greedy_splits(&pressures, &floors) },
                })
            })
            .collect()
    }
}
