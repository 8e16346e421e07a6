//! End-to-end acceptance run. Built without the libtest harness so every
//! criterion prints one verdict line; exits nonzero if any criterion fails.
//!
//! Criteria 6 to 8 share one set of trained agents, which takes several
//! minutes on a single core.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mhp_core::control::{Controller, DecisionContext, MaxPressureController};
use mhp_core::exec::{self, Execution};
use mhp_core::harness::{
    correlation_report, default_seeds, experiment_config, load_scenario, median, paired_wins, split_report,
    train_selected, tts_vs_hop_report, ControllerSpec, HopReport, SelectedRun, SELECTION_SEEDS,
};
use mhp_core::network::{ExtendedGraph, QueueSnapshot, TransitionMatrix};
use mhp_core::pressure::{pressure_vector_unrolled, pressure_vectors};
use mhp_core::rl::{evaluate_policies, GaussianPolicy, ObservationMode, PolicyShape, PpoConfig, RewardMode, RlSettings};
use mhp_core::sim::{run_episode, EpisodeOptions, Scenario, SignalState, SimState};
use nalgebra::DMatrix;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: u8, name: &'static str, failures: Vec<String>, notes: Vec<String>) -> Verdict {
    let pass = failures.is_empty();
    let detail = if pass { notes.join("; ") } else { failures.join("; ") };
    let v = Verdict { id, name, pass, detail };
    println!("criterion {} {:<28} {}  {}", v.id, v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Toy edges with exact ratios, exits wired to the supersink at index 8.
fn toy_edges() -> Vec<(usize, usize, Rational64)> {
    vec![
        (0, 4, r(1, 1)),
        (1, 2, r(1, 3)),
        (1, 3, r(2, 3)),
        (2, 4, r(1, 1)),
        (3, 7, r(1, 1)),
        (4, 5, r(3, 4)),
        (4, 6, r(1, 4)),
        (6, 7, r(1, 1)),
        (5, 8, r(1, 1)),
        (7, 8, r(1, 1)),
        (8, 8, r(1, 1)),
    ]
}

/// Exact weight of all walks of `h` edges from `j` ending at `l`.
fn exact_walks(edges: &[(usize, usize, Rational64)], j: usize, l: usize, h: usize) -> Rational64 {
    if h == 0 {
        return if j == l { r(1, 1) } else { r(0, 1) };
    }
    edges.iter().filter(|e| e.0 == j).map(|e| e.2 * exact_walks(edges, e.1, l, h - 1)).sum()
}

/// Exact pressure at every hop up to `h_max` by path enumeration.
fn exact_pressures(h_max: usize) -> Vec<Vec<Rational64>> {
    let edges = toy_edges();
    let q: Vec<Rational64> = common::TOY_Q.iter().map(|&x| r(x as i64, 1)).collect();
    let n = q.len();
    let mut out = Vec::new();
    let mut current: Vec<Rational64> = (0..n)
        .map(|l| q[l] - (0..n).map(|k| exact_walks(&edges, l, k, 1) * q[k]).sum::<Rational64>())
        .collect();
    out.push(current.clone());
    for h in 1..=h_max {
        for (l, c) in current.iter_mut().enumerate() {
            *c += (0..n).map(|j| exact_walks(&edges, j, l, h) * q[j]).sum::<Rational64>();
        }
        out.push(current.clone());
    }
    out
}

fn to_f64(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn toy_pressures(h_max: usize) -> (ExtendedGraph, Vec<Vec<f64>>) {
    let g = common::toy();
    let q = QueueSnapshot::from_extended(common::TOY_Q.to_vec()).unwrap();
    let p = g.transition_matrix();
    let v = pressure_vectors(&p, &q, h_max).unwrap().into_iter().map(|x| x.values).collect();
    (g, v)
}

fn golden_pressures() -> Verdict {
    let printed: [[Rational64; 9]; 5] = [
        [r(0, 1), r(0, 1), r(0, 1), r(1, 1), r(3, 4), r(0, 1), r(1, 1), r(0, 1), r(0, 1)],
        [r(0, 1), r(0, 1), r(1, 3), r(5, 3), r(11, 4), r(3, 4), r(5, 4), r(2, 1), r(0, 1)],
        [r(0, 1), r(0, 1), r(1, 3), r(5, 3), r(37, 12), r(9, 4), r(7, 4), r(35, 12), r(11, 4)],
        [r(0, 1), r(0, 1), r(1, 3), r(1, 5), r(37, 12), r(5, 2), r(11, 6), r(41, 12), r(95, 12)],
        [r(0, 1), r(0, 1), r(1, 3), r(1, 5), r(37, 12), r(5, 2), r(11, 6), r(7, 2), r(83, 6)],
    ];
    let exact = exact_pressures(4);
    let (_, got) = toy_pressures(4);
    let mut failures = Vec::new();
    let mut overridden = 0;
    for h in 0..=4 {
        for l in 0..9 {
            let x = got[h][l];
            if (x - to_f64(exact[h][l])).abs() > 1e-12 {
                failures.push(format!("p({h})[{l}] = {x}, enumeration gives {}", exact[h][l]));
            }
            // The printed 1/5 for link 3 from hop 3 on disagrees with the
            // enumeration (5/3); the enumeration wins there.
            if h >= 3 && l == 3 {
                if exact[h][l] != r(5, 3) {
                    failures.push(format!("enumeration gives {} for p({h})[3], expected 5/3", exact[h][l]));
                }
                overridden += 1;
                continue;
            }
            if (x - to_f64(printed[h][l])).abs() > 1e-12 {
                failures.push(format!("p({h})[{l}] = {x}, printed {}", printed[h][l]));
            }
        }
    }
    verdict(1, "golden pressure vectors", failures, vec![format!("45 entries exact to 1e-12; {overridden} link-3 entries follow enumeration (5/3)")])
}

fn random_absorbing(n: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>) {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            if rng.random_bool(0.3) {
                m[(i, j)] = rng.random::<f64>();
            }
        }
        m[(i, n - 1)] = rng.random_range(0.05..1.0);
        let s: f64 = m.row(i).sum();
        for j in 0..n {
            m[(i, j)] /= s;
        }
    }
    m[(n - 1, n - 1)] = 1.0;
    let mut q: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..40.0)).collect();
    q.push(0.0);
    (m, q)
}

fn recursive_equals_unrolled() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let h = rng.random_range(0..=10);
        let (m, q) = random_absorbing(n, &mut rng);
        let p = TransitionMatrix::try_from_dense(m).unwrap();
        let q = QueueSnapshot::from_extended(q).unwrap();
        let a = pressure_vectors(&p, &q, h).unwrap().pop().unwrap();
        let b = pressure_vector_unrolled(&p, &q, h).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            worst = worst.max((x - y).abs());
        }
    }
    if worst > 1e-9 {
        failures.push(format!("max abs difference {worst:e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    if secs >= 5.0 {
        failures.push(format!("took {secs:.2} s"));
    }
    verdict(2, "recursive = unrolled", failures, vec![format!("200 systems, max abs diff {worst:.1e}, {secs:.2} s")])
}

fn stabilization() -> Verdict {
    let (g, v) = toy_pressures(20);
    let real = g.real_len();
    let total_q: f64 = common::TOY_Q.iter().sum();
    let mut failures = Vec::new();
    for h in 4..=20 {
        for l in 0..real {
            if (v[h][l] - v[4][l]).abs() > 1e-12 {
                failures.push(format!("p({h})[{l}] = {} differs from p(4)", v[h][l]));
            }
        }
    }
    // Every vehicle has reached the supersink after the longest path (5).
    for h in 5..=20 {
        let inc: Vec<f64> = v[h].iter().zip(&v[h - 1]).map(|(a, b)| a - b).collect();
        if inc[..real].iter().any(|x| x.abs() > 1e-12) || (inc[real] - total_q).abs() > 1e-12 {
            failures.push(format!("increment at hop {h} is {inc:?}"));
        }
    }
    let moving = (0..real).any(|l| (v[3][l] - v[4][l]).abs() > 1e-12);
    verdict(
        3,
        "stabilization",
        failures,
        vec![format!("real links fixed for h = 4..20 (p(3) differs: {moving}); supersink gains {total_q} per hop from h = 5")],
    )
}

/// Steps an episode by hand, asking the controller whenever a decision is
/// due, and checks the vehicle balance after every step. Returns the final
/// state digest and total time spent in seconds.
fn stepwise(s: &Scenario, c: &mut dyn Controller, seed: u64) -> Result<(String, f64), String> {
    let mut state = SimState::init(s, seed);
    let mut signals = SignalState::new(s);
    let mut next_due = vec![0.0; s.intersections.len()];
    for step in 0..s.timing.steps() {
        let now = state.clock_s();
        let due: Vec<usize> = (0..next_due.len()).filter(|&i| next_due[i] <= now + 1e-9).collect();
        if !due.is_empty() {
            let q = state.measure_queues(s);
            let ctx = DecisionContext { time_s: now, scenario: s, queues: &q, due: &due };
            for d in c.decide(&ctx).map_err(|e| e.to_string())? {
                next_due[d.intersection] = now + signals.apply(s, &d, now).map_err(|e| e.to_string())?;
            }
        }
        state.step(s, &signals).map_err(|e| format!("step {step}: {e}"))?;
        let accounted = state.in_network() + state.exited() + state.in_virtual_queues();
        if accounted != state.generated() {
            return Err(format!("step {step}: generated {} but accounted {accounted}", state.generated()));
        }
    }
    Ok((state.digest(), state.totals().time_spent_s))
}

fn conservation() -> Verdict {
    let mut failures = Vec::new();
    let mut episodes = 0;
    let t = Instant::now();
    for name in ["net1x2-heavy", "net1x3-heavy", "net1x3sb-heavy", "net1x2-under"] {
        let s = load_scenario(name).unwrap();
        for spec in [ControllerSpec::Webster, ControllerSpec::MaxPressure { hop: 1 }, ControllerSpec::Greedy { hop: 2 }] {
            let label = spec.method();
            let make = || spec.build(&s).unwrap();
            for seed in [0, 7, 42] {
                let a = stepwise(&s, make().as_mut(), seed);
                let b = stepwise(&s, make().as_mut(), seed);
                episodes += 2;
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        if a != b {
                            failures.push(format!("{name}/{label}/{seed}: replay differs"));
                        }
                        let log = run_episode(&s, make().as_mut(), seed, EpisodeOptions::default()).unwrap();
                        let again = run_episode(&s, make().as_mut(), seed, EpisodeOptions::default()).unwrap();
                        episodes += 2;
                        if log != again || log.state_digest != a.0 || (log.total_time_spent_h * 3600.0 - a.1).abs() > 1e-6 {
                            failures.push(format!("{name}/{label}/{seed}: episode runner disagrees with stepping"));
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => failures.push(format!("{name}/{label}/{seed}: {e}")),
                }
            }
        }
    }
    let per = t.elapsed() / episodes;
    if per > Duration::from_secs(10) {
        failures.push(format!("{per:?} per episode"));
    }
    verdict(4, "simulator conservation", failures, vec![format!("{episodes} two-hour episodes balanced every step, replays identical, {per:.1?} per episode")])
}

fn max_pressure_stability() -> Verdict {
    let s = load_scenario("net1x2-under").unwrap();
    let links = s.graph.base().links();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let log = run_episode(&s, &mut MaxPressureController::new(0).unwrap(), seed, EpisodeOptions::default()).unwrap();
        for (l, &m) in log.max_occupancy.iter().enumerate() {
            let cap = links[l].storage_capacity as usize;
            worst = worst.max(m as f64 / cap as f64);
            if m >= cap {
                failures.push(format!("seed {seed}: link {} reached {m}/{cap}", links[l].name));
            }
        }
        if log.total_virtual_queue_time_h > 0.0 {
            failures.push(format!("seed {seed}: entry blocked for {:.3} h", log.total_virtual_queue_time_h));
        }
    }
    verdict(5, "max-pressure stability", failures, vec![format!("5 seeds, peak occupancy {:.0}% of storage", 100.0 * worst)])
}

/// Best-of-seeds agents for every scenario and hop the later criteria use.
struct Trained {
    runs: Vec<(&'static str, usize, SelectedRun)>,
    elapsed: Duration,
}

impl Trained {
    fn run() -> Self {
        let plan: [(&str, &[usize]); 4] = [
            ("net1x2-heavy", &[0, 1]),
            ("net1x3-heavy", &[0, 1, 2]),
            ("net1x2-under", &[0, 1]),
            ("net1x3-under", &[0, 2]),
        ];
        let t = Instant::now();
        let mut runs = Vec::new();
        for (name, hops) in plan {
            let s = load_scenario(name).unwrap();
            for &hop in hops {
                let settings = RlSettings { hop, reward: RewardMode::Potential, observation: ObservationMode::AtHop };
                let run = train_selected(&s, &SELECTION_SEEDS, |seed| experiment_config(settings, seed), Execution::Parallel)
                    .unwrap();
                println!(
                    "  trained {name} H={hop}: seed {} kept, eval TTS {:.1} h at iteration {}, plateau {:?}, candidates {:?}",
                    run.seed,
                    run.outcome.best_eval_tts_h,
                    run.outcome.best_iteration,
                    run.outcome.plateau_iteration(5, 0.05),
                    run.candidates.iter().map(|(s, t)| (*s, (t * 10.0).round() / 10.0)).collect::<Vec<_>>()
                );
                runs.push((name, hop, run));
            }
        }
        Self { runs, elapsed: t.elapsed() }
    }

    fn get(&self, name: &str, hop: usize) -> &SelectedRun {
        &self.runs.iter().find(|r| r.0 == name && r.1 == hop).unwrap().2
    }

    fn report(&self, name: &str, hops: &[usize]) -> HopReport {
        let s = load_scenario(name).unwrap();
        let sets: Vec<_> = hops.iter().map(|&h| &self.get(name, h).outcome.best).collect();
        let report = tts_vs_hop_report(&s, &sets, &default_seeds(), Execution::Parallel).unwrap();
        for row in &report.rows {
            println!(
                "  {name} H={}: TTS mean {:.2} h, median {:.2} h, std {:.2} h",
                row.hop, row.tts_mean_h, row.tts_median_h, row.tts_std_h
            );
        }
        report
    }
}

fn hop_ordering(t: &Trained) -> Verdict {
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    let heavy2 = t.report("net1x2-heavy", &[0, 1]);
    let wins = paired_wins(&heavy2.row(1).unwrap().per_seed_h, &heavy2.row(0).unwrap().per_seed_h);
    notes.push(format!("net1x2-heavy H1 wins {wins}/10"));
    if wins < 8 {
        failures.push(format!("net1x2-heavy: H1 beats H0 on {wins}/10 seeds"));
    }

    let heavy3 = t.report("net1x3-heavy", &[0, 1, 2]);
    let m: Vec<f64> = (0..3).map(|h| median(&heavy3.row(h).unwrap().per_seed_h)).collect();
    notes.push(format!("net1x3-heavy medians {:.1} > {:.1} > {:.1}", m[0], m[1], m[2]));
    if !(m[2] < m[1] && m[1] < m[0]) {
        failures.push(format!("net1x3-heavy medians H0 {:.2}, H1 {:.2}, H2 {:.2}", m[0], m[1], m[2]));
    }

    for (name, h_max) in [("net1x2-under", 1), ("net1x3-under", 2)] {
        let rep = t.report(name, &[0, h_max]);
        let base = rep.row(0).unwrap().tts_mean_h;
        let gap = (rep.row(h_max).unwrap().tts_mean_h - base).abs() / base;
        notes.push(format!("{name} gap {:.2}%", 100.0 * gap));
        if gap > 0.05 {
            failures.push(format!("{name}: H{h_max} differs from H0 by {:.1}%", 100.0 * gap));
        }
    }

    notes.push(format!("training {:.0} s", t.elapsed.as_secs_f64()));
    if t.elapsed > Duration::from_secs(2 * 3600) {
        failures.push(format!("training took {:.0} s", t.elapsed.as_secs_f64()));
    }
    verdict(6, "hop ordering", failures, notes)
}

fn split_behavior(t: &Trained) -> Verdict {
    let s = load_scenario("net1x2-heavy").unwrap();
    let cycle = s.timing.cycle_s;
    let horizon = s.timing.horizon_s;
    let left_max = 1.0 - s.intersections[0].min_splits(cycle)[1];
    let mut failures = Vec::new();
    let evals =
        evaluate_policies(&s, &t.get("net1x2-heavy", 1).outcome.best, &default_seeds(), Execution::Parallel).unwrap();
    let n = evals.len() as f64;
    let right: f64 = evals.iter().map(|e| split_report(&e.log, 1, 0.0, 1800.0).unwrap().ratio(0, 1)).sum::<f64>() / n;
    let left: f64 = evals.iter().map(|e| split_report(&e.log, 0, 0.0, horizon).unwrap().mean_splits[0]).sum::<f64>() / n;
    if right < 1.5 {
        failures.push(format!("right intersection EB:SB {right:.2}:1"));
    }
    if left < left_max - 0.01 {
        failures.push(format!("left EB split {left:.3}, maximum {left_max:.3}"));
    }
    let note = format!("H1 right EB:SB {right:.2}:1 in the first 30 min, left EB {left:.3} of max {left_max:.3}");
    verdict(7, "split behavior", failures, vec![note])
}

fn reward_correlation(t: &Trained) -> Verdict {
    let s = load_scenario("net1x2-heavy").unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let evals = evaluate_policies(&s, &t.get("net1x2-heavy", 1).outcome.best, &seeds, Execution::Parallel).unwrap();
    let rewards: Vec<f64> = evals.iter().map(|e| e.reward).collect();
    let tts: Vec<f64> = evals.iter().map(|e| e.log.total_time_spent_h).collect();
    let mut failures = Vec::new();
    let rho = match correlation_report(&rewards, &tts) {
        Ok(rho) => rho,
        Err(e) => {
            failures.push(e.to_string());
            f64::NAN
        }
    };
    if !(rho <= -0.9) {
        failures.push(format!("r = {rho:.3}"));
    }
    verdict(8, "reward-TTS correlation", failures, vec![format!("r = {rho:.4} over {} episodes", seeds.len())])
}

fn ppo_correctness() -> Verdict {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let shapes = [
        (PolicyShape { obs_dim: 3, act_dim: 2, hidden: vec![], init_log_std: -0.3, critic_extra: 0 }, PpoConfig::default()),
        (
            PolicyShape { obs_dim: 2, act_dim: 3, hidden: vec![5, 4], init_log_std: 0.1, critic_extra: 1 },
            PpoConfig { entropy_coef: 0.05, value_coef: 0.7, ..PpoConfig::default() },
        ),
    ];
    for (shape, cfg) in &shapes {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let mut policy = GaussianPolicy::new(shape, &mut rng);
            let mut theta = policy.flat_params();
            for x in &mut theta {
                *x += rng.random_range(-0.4..0.4);
            }
            policy.set_flat_params(&theta);
            let batch = common::ppo::random_batch(&policy, 12, &mut rng);
            worst = worst.max(common::ppo::gradient_gap(&policy, &batch, cfg));
        }
    }
    if worst >= 1e-4 {
        failures.push(format!("gradient relative gap {worst:e}"));
    }
    let splits: Vec<f64> = (0..3).map(common::ppo::bandit_split).collect();
    for (seed, got) in splits.iter().enumerate() {
        if (got - 0.75).abs() > 0.05 {
            failures.push(format!("bandit seed {seed} settled at {got:.3}"));
        }
    }
    verdict(
        9,
        "PPO correctness",
        failures,
        vec![format!("40 instances, worst gradient gap {worst:.1e}; bandit splits {splits:.3?} (optimum 0.75)")],
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    exec::init_threads_from_env();
    let t = Instant::now();
    let mut verdicts = vec![
        golden_pressures(),
        recursive_equals_unrolled(),
        stabilization(),
        conservation(),
        max_pressure_stability(),
    ];
    let trained = Trained::run();
    verdicts.push(hop_ordering(&trained));
    verdicts.push(split_behavior(&trained));
    verdicts.push(reward_correlation(&trained));
    verdicts.push(ppo_correctness());

    let failed: Vec<_> = verdicts.iter().filter(|v| !v.pass).collect();
    println!();
    for v in &verdicts {
        println!("{} criterion {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.id, v.name);
    }
    println!("{}/{} criteria passed in {:.0} s", verdicts.len() - failed.len(), verdicts.len(), t.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
