use mhp_core::control::{Action, ControlDecision, FixedPlan, FixedTimeController, MaxPressureController, WebsterController};
use mhp_core::harness::{catalog_file, compile_catalog_file, load_scenario};
use mhp_core::network::{LinkId, LinkSpec, MovementSpec, NetworkFile};
use mhp_core::sim::{
    run_episode, DemandInterval, DemandSpec, EpisodeOptions, IntersectionSpec, NetworkRef, PhaseSpec, Scenario,
    ScenarioFile, SignalState, SimState,
};

fn scenario_file(network: NetworkFile, phases: Vec<Vec<&str>>, demand: Vec<(&str, f64, f64)>) -> ScenarioFile {
    let intersections = if phases.is_empty() {
        Vec::new()
    } else {
        vec![IntersectionSpec {
            id: "I".into(),
            phases: phases
                .into_iter()
                .enumerate()
                .map(|(k, inc)| PhaseSpec {
                    label: format!("P{k}"),
                    incoming: inc.into_iter().map(String::from).collect(),
                    min_green_s: None,
                })
                .collect(),
        }]
    };
    let json = serde_json::json!({
        "name": "t",
        "network": network,
        "horizon_s": 600,
        "intersections": intersections,
        "demand": demand.iter().map(|(o, end, rate)| DemandSpec {
            origin: o.to_string(),
            profile: vec![DemandInterval { start_s: 0.0, end_s: *end, rate_vph: *rate }],
        }).collect::<Vec<_>>(),
    });
    serde_json::from_value(json).unwrap()
}

fn link(id: &str, capacity: u32, ff: f64) -> LinkSpec {
    LinkSpec { capacity_veh: capacity, ff_time_s: ff, ..LinkSpec::named(id) }
}

fn compile(file: &ScenarioFile) -> Scenario {
    Scenario::compile(file, |_| unreachable!("networks are inline")).unwrap()
}

fn activate(signals: &mut SignalState, scenario: &Scenario, intersection: usize, phase: usize) {
    let d = ControlDecision { intersection, action: Action::Activate { phase, period_s: 1e9 } };
    signals.apply(scenario, &d, 0.0).unwrap();
}

#[test]
fn replay_is_bit_identical() {
    let s = load_scenario("net1x2-heavy").unwrap();
    let a = run_episode(&s, &mut WebsterController::build(&s), 7, EpisodeOptions::default()).unwrap();
    let b = run_episode(&s, &mut WebsterController::build(&s), 7, EpisodeOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(SimState::init(&s, 7).digest(), SimState::init(&s, 7).digest());
    let c = run_episode(&s, &mut WebsterController::build(&s), 8, EpisodeOptions::default()).unwrap();
    assert_ne!(a.state_digest, c.state_digest);
}

#[test]
fn zero_demand_gives_zero_metrics() {
    let mut f = catalog_file("net1x3-heavy").unwrap();
    f.demand_scale = 0.0;
    let s = compile_catalog_file(&f).unwrap();
    let log = run_episode(&s, &mut MaxPressureController::new(1).unwrap(), 3, EpisodeOptions::default()).unwrap();
    assert_eq!((log.total_time_spent_h, log.total_queue_time_h, log.total_virtual_queue_time_h), (0.0, 0.0, 0.0));
    assert_eq!((log.generated, log.exited, log.remaining), (0, 0, 0));
}

#[test]
fn vehicles_are_conserved_every_step() {
    for name in ["net1x2-heavy", "net1x3sb-heavy"] {
        let s = load_scenario(name).unwrap();
        let mut state = SimState::init(&s, 11);
        let signals = SignalState::new(&s);
        for _ in 0..s.timing.steps() {
            state.step(&s, &signals).unwrap();
            assert_eq!(state.generated(), state.in_network() + state.exited() + state.in_virtual_queues());
            for l in 0..s.graph.real_len() {
                assert!(state.occupancy(LinkId(l)) <= s.graph.base().links()[l].storage_capacity as usize);
            }
        }
        assert!(state.in_virtual_queues() > 0 || state.exited() > 0);
    }
}

#[test]
fn saturation_discharge_is_half_a_vehicle_per_second() {
    // One unsignalized exit link fed far above its 1800 vph saturation flow.
    let net = NetworkFile { links: vec![link("a", 500, 1.0)], movements: vec![] };
    let s = compile(&scenario_file(net, vec![], vec![("a", 300.0, 7200.0)]));
    let mut state = SimState::init(&s, 5);
    let signals = SignalState::new(&s);
    for _ in 0..60 {
        state.step(&s, &signals).unwrap();
    }
    assert!(state.queued(LinkId(0)) > 20);
    let start = state.exited();
    for _ in 0..200 {
        let before = state.exited();
        state.step(&s, &signals).unwrap();
        assert!(state.exited() - before <= 1);
        assert!(state.queued(LinkId(0)) > 0);
    }
    assert_eq!(state.exited() - start, 100);
}

#[test]
fn red_link_holds_and_accrues_queue_time() {
    let net = NetworkFile {
        links: vec![link("a", 100, 1.0), link("c", 100, 1.0)],
        movements: vec![],
    };
    let s = compile(&scenario_file(net, vec![vec!["a"], vec!["c"]], vec![("a", 600.0, 1800.0)]));
    let mut state = SimState::init(&s, 2);
    let mut signals = SignalState::new(&s);
    activate(&mut signals, &s, 0, 1);
    let mut expected = 0.0;
    for _ in 0..300 {
        let queued = state.queued(LinkId(0));
        let before = state.totals().stopline_queue_s;
        state.step(&s, &signals).unwrap();
        assert_eq!(state.totals().stopline_queue_s - before, queued as f64);
        expected += queued as f64;
    }
    assert_eq!(state.exited(), 0);
    assert!(expected > 0.0);
    assert_eq!(state.totals().stopline_queue_s, expected);
}

#[test]
fn full_downstream_link_blocks_discharge() {
    let net = NetworkFile {
        links: vec![link("a", 100, 1.0), link("b", 2, 1.0), link("c", 5, 1.0)],
        movements: vec![MovementSpec::new("a", "b", 1.0)],
    };
    let s = compile(&scenario_file(net, vec![vec!["b"], vec!["c"]], vec![("a", 600.0, 1800.0)]));
    let mut state = SimState::init(&s, 4);
    let mut signals = SignalState::new(&s);
    activate(&mut signals, &s, 0, 1);
    for _ in 0..400 {
        state.step(&s, &signals).unwrap();
        assert!(state.occupancy(LinkId(1)) <= 2);
    }
    assert_eq!(state.occupancy(LinkId(1)), 2);
    let held = state.occupancy(LinkId(0));
    assert!(held > 10);
    assert_eq!(state.queued(LinkId(0)), held);
}

#[test]
fn blocked_arterial_link_fills_to_capacity() {
    let s = load_scenario("net1x2-heavy").unwrap();
    let eb1 = s.graph.id("EB1").unwrap();
    let mut state = SimState::init(&s, 1);
    let mut signals = SignalState::new(&s);
    activate(&mut signals, &s, 0, 0);
    activate(&mut signals, &s, 1, 1);
    for _ in 0..900 {
        state.step(&s, &signals).unwrap();
    }
    let capacity = s.graph.base().links()[eb1.0].storage_capacity as f64;
    assert_eq!(state.measure_queues(&s).get(eb1.0), capacity);
    let q = state.measure_queues(&s);
    assert_eq!(q.len(), s.graph.len());
    assert_eq!(q.get(s.graph.supersink().0), 0.0);
}

#[test]
fn empty_network_measures_zero() {
    let s = load_scenario("net1x3-heavy").unwrap();
    let q = SimState::init(&s, 0).measure_queues(&s);
    assert_eq!(q.len(), s.graph.len());
    assert!(q.values().iter().all(|&v| v == 0.0));
}

#[test]
fn time_spent_is_the_sum_over_vehicles() {
    let s = load_scenario("net1x2-heavy").unwrap();
    let mut state = SimState::init(&s, 9);
    let signals = SignalState::new(&s);
    for _ in 0..s.timing.steps() {
        state.step(&s, &signals).unwrap();
    }
    let horizon = s.timing.horizon_s;
    let t = state.totals();
    let tts: f64 = state.records().map(|r| r.time_spent(horizon)).sum();
    let virt: f64 = state.records().map(|r| r.virtual_time(horizon)).sum();
    let queued: f64 = state.records().map(|r| r.queued_s).sum();
    assert!((tts - t.time_spent_s).abs() < 1e-6);
    assert!((virt - t.virtual_queue_s).abs() < 1e-6);
    assert!((queued - t.stopline_queue_s).abs() < 1e-6);
    assert!(t.virtual_queue_s > 0.0);
    assert!(t.time_spent_s >= t.stopline_queue_s + t.virtual_queue_s);
}

#[test]
fn metrics_are_ordered() {
    for name in ["net1x2-heavy", "net1x3-slight", "net1x2-under"] {
        let s = load_scenario(name).unwrap();
        let log = run_episode(&s, &mut WebsterController::build(&s), 0, EpisodeOptions::default()).unwrap();
        assert!(log.total_time_spent_h >= log.total_queue_time_h);
        assert!(log.total_queue_time_h >= log.total_virtual_queue_time_h);
        assert!(log.total_virtual_queue_time_h >= 0.0);
    }
}

fn doubled(name: &str) -> Scenario {
    let mut f = catalog_file(name).unwrap();
    let NetworkRef::Path(rel) = &f.network else { panic!("catalog uses network paths") };
    let path = format!("{}/scenarios/{rel}", env!("CARGO_MANIFEST_DIR"));
    let mut net = NetworkFile::read(path).unwrap();
    for l in &mut net.links {
        l.capacity_veh *= 2;
        l.sat_flow_vph *= 2.0;
    }
    f.network = NetworkRef::Inline(net);
    compile_catalog_file(&f).unwrap()
}

#[test]
fn more_capacity_never_costs_time() {
    for name in ["net1x2-heavy", "net1x3-heavy"] {
        let base = load_scenario(name).unwrap();
        let big = doubled(name);
        let plan = |s: &Scenario| {
            let plans = s
                .intersections
                .iter()
                .map(|i| FixedPlan { cycle_s: 90.0, greens_s: vec![90.0 / i.phases.len() as f64; i.phases.len()] })
                .collect();
            FixedTimeController::new("even", plans)
        };
        for seed in 0..3 {
            let a = run_episode(&base, &mut plan(&base), seed, EpisodeOptions::default()).unwrap();
            let b = run_episode(&big, &mut plan(&big), seed, EpisodeOptions::default()).unwrap();
            assert_eq!(a.generated, b.generated);
            assert!(b.total_time_spent_h <= a.total_time_spent_h, "{name} seed {seed}");
        }
    }
}

#[test]
fn starving_the_side_street_builds_a_virtual_queue() {
    let s = load_scenario("net1x2-heavy").unwrap();
    let plans = vec![FixedPlan { cycle_s: 90.0, greens_s: vec![80.0, 10.0] }; 2];
    let log = run_episode(&s, &mut FixedTimeController::new("eb", plans), 0, EpisodeOptions::default()).unwrap();
    assert!(log.total_virtual_queue_time_h > 0.0);
}

#[test]
fn arterial_entry_links() {
    let s = load_scenario("net1x3-heavy").unwrap();
    let names: Vec<&str> = s.entry_links().into_iter().map(|l| s.graph.name(l)).collect();
    assert_eq!(names, vec!["EB0", "SB1_in", "SB2_in", "SB3_in"]);
    // Side-street demand enters only at the rightmost intersection by default.
    assert_eq!(s.demands.len(), 2);
    let sb = load_scenario("net1x3sb-heavy").unwrap();
    assert_eq!(sb.demands.len(), 4);
    let state = SimState::init(&s, 1);
    assert_eq!(state.in_network(), 0);
}

#[test]
fn trace_has_one_row_per_step() {
    let s = load_scenario("net1x2-under").unwrap();
    let log = run_episode(&s, &mut WebsterController::build(&s), 0, EpisodeOptions { record_trace: true }).unwrap();
    let trace = log.queue_trace.unwrap();
    assert_eq!(trace.len(), s.timing.steps());
    assert!(trace.iter().all(|row| row.len() == s.graph.len()));
}
