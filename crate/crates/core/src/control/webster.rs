use super::{project_with_floors, Action, ControlDecision, ControlError, Controller, DecisionContext};
use crate::sim::Scenario;

pub const MIN_CYCLE_S: f64 = 30.0;
pub const MAX_CYCLE_S: f64 = 180.0;
/// Critical flow ratio sum at which the cycle formula is clamped.
pub const MAX_FLOW_RATIO: f64 = 0.95;

/// A pre-timed plan: cycle length and displayed green per phase. Each
/// displayed green includes its phase's lost time.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPlan {
    pub cycle_s: f64,
    pub greens_s: Vec<f64>,
}

impl FixedPlan {
    pub fn splits(&self) -> Vec<f64> {
        self.greens_s.iter().map(|g| g / self.cycle_s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WebsterPlan {
    pub plan: FixedPlan,
    /// The flow ratio sum reached the clamp; the plan is a best effort.
    pub oversaturated: bool,
}

/// Webster's optimal cycle `C = (1.5 L + 5) / (1 − Y)` with effective greens
/// proportional to the critical flow ratios.
///
/// `lost_time_s` is the total lost time per cycle, shared equally by the
/// phases. `Y` is clamped at 0.95 and `C` to [30, 180] s; greens below
/// `min_green_s` are raised to it and the other phases give up the time.
pub fn webster_plan(critical_flows: &[f64], sat_flow: f64, lost_time_s: f64, min_green_s: f64) -> WebsterPlan {
    let n = critical_flows.len();
    assert!(n > 0 && sat_flow > 0.0);
    let ratios: Vec<f64> = critical_flows.iter().map(|q| q.max(0.0) / sat_flow).collect();
    let y_sum: f64 = ratios.iter().sum();
    let oversaturated = y_sum >= MAX_FLOW_RATIO;
    let y = y_sum.min(MAX_FLOW_RATIO);
    let floor_cycle = (n as f64 * min_green_s.max(lost_time_s / n as f64)).max(MIN_CYCLE_S);
    let cycle_s = ((1.5 * lost_time_s + 5.0) / (1.0 - y)).clamp(floor_cycle, MAX_CYCLE_S.max(floor_cycle));

    let per_phase_lost = lost_time_s / n as f64;
    let effective = cycle_s - lost_time_s;
    let displayed: Vec<f64> = ratios
        .iter()
        .map(|r| {
            let share = if y_sum > 0.0 { r / y_sum } else { 1.0 / n as f64 };
            effective * share + per_phase_lost
        })
        .collect();
    let floors = vec![min_green_s / cycle_s; n];
    let splits = project_with_floors(&displayed, &floors);
    WebsterPlan {
        plan: FixedPlan { cycle_s, greens_s: splits.iter().map(|s| s * cycle_s).collect() },
        oversaturated,
    }
}

/// Runs the same plan every cycle.
#[derive(Debug, Clone)]
pub struct FixedTimeController {
    label: String,
    plans: Vec<FixedPlan>,
}

impl FixedTimeController {
    pub fn new(label: impl Into<String>, plans: Vec<FixedPlan>) -> Self {
        Self { label: label.into(), plans }
    }

    pub fn plans(&self) -> &[FixedPlan] {
        &self.plans
    }
}

impl Controller for FixedTimeController {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<ControlDecision>, ControlError> {
        Ok(ctx
            .due
            .iter()
            .map(|&i| ControlDecision {
                intersection: i,
                action: Action::Splits { cycle_s: self.plans[i].cycle_s, splits: self.plans[i].splits() },
            })
            .collect())
    }
}

/// Pre-timed Webster plans computed from the scenario's mean demand.
///
/// Critical flow per phase is the largest mean arrival rate over the phase's
/// incoming links, propagated from the origins through the turning ratios.
pub struct WebsterController;

impl WebsterController {
    pub fn plans(scenario: &Scenario) -> Vec<WebsterPlan> {
        let flows = scenario.mean_link_flows();
        let links = scenario.graph.base().links();
        scenario
            .intersections
            .iter()
            .map(|inter| {
                let critical: Vec<f64> = inter
                    .phases
                    .iter()
                    .map(|p| p.incoming.iter().map(|l| flows[l.0]).fold(0.0, f64::max))
                    .collect();
                let sat = inter
                    .phases
                    .iter()
                    .flat_map(|p| p.incoming.iter().map(|l| links[l.0].saturation_flow))
                    .fold(f64::INFINITY, f64::min);
                let min_green = inter.phases.iter().map(|p| p.min_green_s).fold(0.0, f64::max);
                let lost = scenario.timing.lost_time_s * inter.phases.len() as f64;
                webster_plan(&critical, sat, lost, min_green)
            })
            .collect()
    }

    pub fn build(scenario: &Scenario) -> FixedTimeController {
        FixedTimeController::new("webster", Self::plans(scenario).into_iter().map(|w| w.plan).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oversaturated_example_clamps() {
        let w = webster_plan(&[900.0, 900.0], 1800.0, 8.0, 10.0);
        assert!(w.oversaturated);
        assert_eq!(w.plan.cycle_s, 180.0);
        assert!((w.plan.greens_s[0] - 90.0).abs() < 1e-9);
        assert!((w.plan.greens_s[1] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn two_to_one_example() {
        // Y = 0.5, C = (1.5*8 + 5) / 0.5 = 34 s, effective green 26 s split 2:1.
        let w = webster_plan(&[600.0, 300.0], 1800.0, 8.0, 10.0);
        assert!(!w.oversaturated);
        assert!((w.plan.cycle_s - 34.0).abs() < 1e-9);
        let eff: Vec<f64> = w.plan.greens_s.iter().map(|g| g - 4.0).collect();
        assert!((eff[0] - 52.0 / 3.0).abs() < 1e-9);
        assert!((eff[0] / eff[1] - 2.0).abs() < 1e-9);
        assert!((w.plan.greens_s.iter().sum::<f64>() - 34.0).abs() < 1e-9);
    }

    #[test]
    fn zero_flow_phase_gets_min_green() {
        let w = webster_plan(&[0.0, 600.0], 1800.0, 8.0, 10.0);
        assert!((w.plan.greens_s[0] - 10.0).abs() < 1e-9);
        assert!((w.plan.greens_s.iter().sum::<f64>() - w.plan.cycle_s).abs() < 1e-9);
    }

    #[test]
    fn permuting_phases_permutes_greens() {
        let a = webster_plan(&[700.0, 200.0, 350.0], 1800.0, 12.0, 10.0);
        let b = webster_plan(&[350.0, 700.0, 200.0], 1800.0, 12.0, 10.0);
        assert_eq!(a.plan.cycle_s, b.plan.cycle_s);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert!((a.plan.greens_s[i] - b.plan.greens_s[j]).abs() < 1e-9);
        }
    }
}
