use super::{MetricsLog, Scenario, SignalState, SimError, SimState, SplitRecord};
use crate::control::{Action, Controller, DecisionContext};

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    /// Keep the measured queue vector after every step.
    pub record_trace: bool,
}

/// Runs one episode from t = 0 to the horizon.
///
/// The controller is consulted whenever an intersection's decision is due:
/// every cycle for split decisions, every control period for phase
/// activation. Vehicles still present at the horizon accrue time up to the
/// horizon only.
pub fn run_episode(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    seed: u64,
    options: EpisodeOptions,
) -> Result<MetricsLog, SimError> {
    let mut state = SimState::init(scenario, seed);
    let mut signals = SignalState::new(scenario);
    let n_int = scenario.intersections.len();
    let mut next_due = vec![0.0_f64; n_int];
    let mut splits = Vec::new();
    let mut max_occupancy = vec![0usize; scenario.graph.real_len()];
    let mut trace = options.record_trace.then(Vec::new);
    let dt = scenario.timing.dt_s;

    for _ in 0..scenario.timing.steps() {
        let now = state.clock_s();
        let due: Vec<usize> = (0..n_int).filter(|&i| next_due[i] <= now + 1e-9 * dt).collect();
        if !due.is_empty() {
            let queues = state.measure_queues(scenario);
            let ctx = DecisionContext { time_s: now, scenario, queues: &queues, due: &due };
            let decisions = controller.decide(&ctx)?;
            for &i in &due {
                if !decisions.iter().any(|d| d.intersection == i) {
                    return Err(SimError::InvalidDecision(format!(
                        "controller `{}` gave no decision for due intersection {i}",
                        controller.name()
                    )));
                }
            }
            for d in decisions.iter().filter(|d| due.contains(&d.intersection)) {
                let period = signals.apply(scenario, d, now)?;
                next_due[d.intersection] = now + period;
                let shares = match &d.action {
                    Action::Splits { splits, .. } => splits.clone(),
                    Action::Activate { phase, .. } => {
                        let mut one_hot = vec![0.0; scenario.intersections[d.intersection].phases.len()];
                        one_hot[*phase] = 1.0;
                        one_hot
                    }
                };
                splits.push(SplitRecord { intersection: d.intersection, start_s: now, duration_s: period, splits: shares });
            }
        }

        state.step(scenario, &signals)?;
        for (li, m) in max_occupancy.iter_mut().enumerate() {
            *m = (*m).max(state.occupancy(crate::network::LinkId(li)));
        }
        if let Some(t) = trace.as_mut() {
            t.push(state.measure_queues(scenario).values().to_vec());
        }
    }

    let queues = state.measure_queues(scenario);
    let all: Vec<usize> = (0..n_int).collect();
    controller.finish(&DecisionContext { time_s: state.clock_s(), scenario, queues: &queues, due: &all })?;

    let totals = state.totals();
    Ok(MetricsLog {
        total_time_spent_h: totals.time_spent_s / 3600.0,
        total_queue_time_h: (totals.stopline_queue_s + totals.virtual_queue_s) / 3600.0,
        total_virtual_queue_time_h: totals.virtual_queue_s / 3600.0,
        generated: state.generated(),
        exited: state.exited(),
        remaining: state.generated() - state.exited(),
        max_occupancy,
        queue_trace: trace,
        splits,
        state_digest: state.digest(),
    })
}
