use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use sha2::{Digest, Sha256};

use super::{Scenario, SignalState, SimError};
use crate::network::{LinkId, QueueSnapshot};

const ARRIVAL_STREAM: u64 = 0;
const ROUTING_STREAM: u64 = 1;
const MAX_ROUTE_LEN: usize = 100_000;

/// Per-vehicle time ledger. All times are seconds since the episode start.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub origin: LinkId,
    pub created_s: f64,
    pub entered_s: Option<f64>,
    pub exited_s: Option<f64>,
    /// Seconds spent waiting at a stop line, virtual queue excluded.
    pub queued_s: f64,
}

impl VehicleRecord {
    /// Time from generation to exit, or to `horizon_s` if still present.
    pub fn time_spent(&self, horizon_s: f64) -> f64 {
        self.exited_s.unwrap_or(horizon_s) - self.created_s
    }

    /// Time before entering the network.
    pub fn virtual_time(&self, horizon_s: f64) -> f64 {
        self.entered_s.unwrap_or(horizon_s) - self.created_s
    }
}

#[derive(Debug, Clone)]
struct Vehicle {
    record: VehicleRecord,
    /// Links after the origin, pre-sampled from the turning ratios.
    route: Vec<LinkId>,
    next_hop: usize,
}

#[derive(Debug, Clone, Copy)]
struct OnLink {
    vehicle: u32,
    ready_at: f64,
}

#[derive(Debug, Clone, Default)]
struct LinkState {
    /// FIFO in entry order; `ready_at` is nondecreasing.
    vehicles: VecDeque<OnLink>,
    /// Fractional saturation-flow credit carried across steps.
    credit: f64,
}

impl LinkState {
    fn queued_at(&self, t: f64) -> usize {
        self.vehicles.partition_point(|v| v.ready_at <= t)
    }
}

/// Running totals, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Totals {
    pub time_spent_s: f64,
    /// Stop-line waiting only.
    pub stopline_queue_s: f64,
    pub virtual_queue_s: f64,
}

/// Mesoscopic network state for one episode.
#[derive(Debug, Clone)]
pub struct SimState {
    clock_s: f64,
    steps: usize,
    links: Vec<LinkState>,
    virtual_queues: Vec<VecDeque<u32>>,
    vehicles: Vec<Vehicle>,
    exited: usize,
    totals: Totals,
    arrivals: ChaCha8Rng,
    routing: ChaCha8Rng,
}

impl SimState {
    /// Empty network and zeroed ledgers. Arrival and routing draws come from
    /// separate streams of one seed, so the vehicle population and routes
    /// depend on the seed only, not on the controller.
    pub fn init(scenario: &Scenario, seed: u64) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Self {
            clock_s: 0.0,
            steps: 0,
            links: vec![LinkState::default(); scenario.graph.real_len()],
            virtual_queues: vec![VecDeque::new(); scenario.demands.len()],
            vehicles: Vec::new(),
            exited: 0,
            totals: Totals::default(),
            arrivals: stream(ARRIVAL_STREAM),
            routing: stream(ROUTING_STREAM),
        }
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_s
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn generated(&self) -> usize {
        self.vehicles.len()
    }

    pub fn exited(&self) -> usize {
        self.exited
    }

    pub fn in_network(&self) -> usize {
        self.links.iter().map(|l| l.vehicles.len()).sum()
    }

    pub fn in_virtual_queues(&self) -> usize {
        self.virtual_queues.iter().map(VecDeque::len).sum()
    }

    pub fn virtual_queue(&self, demand: usize) -> usize {
        self.virtual_queues[demand].len()
    }

    /// Vehicles on a link, moving or queued.
    pub fn occupancy(&self, link: LinkId) -> usize {
        self.links[link.0].vehicles.len()
    }

    /// Vehicles waiting at a link's stop line.
    pub fn queued(&self, link: LinkId) -> usize {
        self.links[link.0].queued_at(self.clock_s)
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn records(&self) -> impl Iterator<Item = &VehicleRecord> {
        self.vehicles.iter().map(|v| &v.record)
    }

    /// Queue vector aligned to the extended index order; Ω is zero.
    pub fn measure_queues(&self, scenario: &Scenario) -> QueueSnapshot {
        let n = scenario.graph.len();
        let mut values = vec![0.0; n];
        for (v, link) in values.iter_mut().zip(&self.links) {
            *v = link.queued_at(self.clock_s) as f64;
        }
        if scenario.virtual_queue_in_origin {
            for (d, vq) in scenario.demands.iter().zip(&self.virtual_queues) {
                values[d.origin.0] += vq.len() as f64;
            }
        }
        let q = QueueSnapshot::from_extended(values).expect("counts are nonnegative and Ω is zero");
        if scenario.density_queues {
            q.density_normalized(&scenario.graph)
        } else {
            q
        }
    }

    /// Advances the clock by one `dt`.
    ///
    /// Order within a step: demand arrivals join their origin's virtual
    /// queue; green stop lines discharge against the space each downstream
    /// link had at the start of the step; moved vehicles join their new
    /// link; waiting vehicles fill origin links; ledgers are updated.
    pub fn step(&mut self, scenario: &Scenario, signals: &SignalState) -> Result<(), SimError> {
        let dt = scenario.timing.dt_s;
        let t0 = self.clock_s;
        let t1 = t0 + dt;
        let graph = &scenario.graph;
        let links = graph.base().links();

        let in_system = (self.vehicles.len() - self.exited) as f64;
        self.totals.time_spent_s += in_system * dt;
        self.totals.virtual_queue_s += self.in_virtual_queues() as f64 * dt;

        for (di, demand) in scenario.demands.iter().enumerate() {
            let rate = demand.rate_at(t0);
            if rate <= 0.0 {
                continue;
            }
            let lambda = rate * dt / 3600.0;
            let count = Poisson::new(lambda)
                .map_err(|e| SimError::InvalidScenario(format!("demand rate: {e}")))?
                .sample(&mut self.arrivals) as usize;
            for _ in 0..count {
                let route = sample_route(scenario, demand.origin, &mut self.routing)?;
                let id = u32::try_from(self.vehicles.len()).expect("vehicle ids fit in u32");
                self.vehicles.push(Vehicle {
                    record: VehicleRecord {
                        origin: demand.origin,
                        created_s: t1,
                        entered_s: None,
                        exited_s: None,
                        queued_s: 0.0,
                    },
                    route,
                    next_hop: 0,
                });
                self.virtual_queues[di].push_back(id);
            }
        }

        let mut space: Vec<i64> = links
            .iter()
            .zip(&self.links)
            .map(|(l, s)| i64::from(l.storage_capacity) - s.vehicles.len() as i64)
            .collect();
        let active: Vec<(usize, bool)> =
            (0..scenario.intersections.len()).map(|i| signals.active_phase(i, t0)).collect();
        let mut moved: Vec<(LinkId, u32)> = Vec::new();

        for (li, link) in links.iter().enumerate() {
            let green = match scenario.signal_of[li] {
                None => true,
                Some((ii, pi)) => active[ii] == (pi, true),
            };
            let state = &mut self.links[li];
            if !green {
                state.credit = 0.0;
                continue;
            }
            state.credit += link.saturation_flow * dt / 3600.0;
            while state.credit >= 1.0 - 1e-12 {
                let Some(&head) = state.vehicles.front() else { break };
                if head.ready_at > t1 {
                    break;
                }
                let vehicle = &mut self.vehicles[head.vehicle as usize];
                match vehicle.route.get(vehicle.next_hop).copied() {
                    None => {
                        vehicle.record.exited_s = Some(t1);
                        self.exited += 1;
                    }
                    Some(next) => {
                        if space[next.0] < 1 {
                            break;
                        }
                        space[next.0] -= 1;
                        vehicle.next_hop += 1;
                        moved.push((next, head.vehicle));
                    }
                }
                state.vehicles.pop_front();
                state.credit -= 1.0;
            }
            state.credit = state.credit.min(1.0);
        }

        for (next, vid) in moved {
            let ready_at = t1 + links[next.0].free_flow_time;
            self.links[next.0].vehicles.push_back(OnLink { vehicle: vid, ready_at });
        }

        for (di, demand) in scenario.demands.iter().enumerate() {
            let o = demand.origin.0;
            while space[o] >= 1 {
                let Some(vid) = self.virtual_queues[di].pop_front() else { break };
                space[o] -= 1;
                self.vehicles[vid as usize].record.entered_s = Some(t1);
                let ready_at = t1 + links[o].free_flow_time;
                self.links[o].vehicles.push_back(OnLink { vehicle: vid, ready_at });
            }
        }

        // Vehicles that were already at the stop line when the step began
        // and are still there waited the whole step.
        for state in &self.links {
            for v in state.vehicles.iter().take_while(|v| v.ready_at <= t0) {
                self.vehicles[v.vehicle as usize].record.queued_s += dt;
                self.totals.stopline_queue_s += dt;
            }
        }

        self.steps += 1;
        self.clock_s = self.steps as f64 * dt;
        self.check_invariants(scenario)
    }

    fn check_invariants(&self, scenario: &Scenario) -> Result<(), SimError> {
        for (li, (link, state)) in scenario.graph.base().links().iter().zip(&self.links).enumerate() {
            if state.vehicles.len() > link.storage_capacity as usize {
                return Err(SimError::CapacityViolation {
                    link: link.name.clone(),
                    vehicles: state.vehicles.len(),
                    capacity: link.storage_capacity,
                    index: li,
                });
            }
        }
        let accounted = self.in_network() + self.exited + self.in_virtual_queues();
        if accounted != self.generated() {
            return Err(SimError::ConservationViolation { generated: self.generated(), accounted });
        }
        Ok(())
    }

    /// Hex SHA-256 over the complete dynamic state.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.clock_s.to_bits().to_le_bytes());
        h.update((self.exited as u64).to_le_bytes());
        for link in &self.links {
            h.update((link.vehicles.len() as u64).to_le_bytes());
            h.update(link.credit.to_bits().to_le_bytes());
            for v in &link.vehicles {
                h.update(v.vehicle.to_le_bytes());
                h.update(v.ready_at.to_bits().to_le_bytes());
            }
        }
        for vq in &self.virtual_queues {
            h.update((vq.len() as u64).to_le_bytes());
            for id in vq {
                h.update(id.to_le_bytes());
            }
        }
        for v in &self.vehicles {
            let r = &v.record;
            h.update(r.origin.0.to_le_bytes());
            h.update(r.created_s.to_bits().to_le_bytes());
            h.update(r.entered_s.unwrap_or(-1.0).to_bits().to_le_bytes());
            h.update(r.exited_s.unwrap_or(-1.0).to_bits().to_le_bytes());
            h.update(r.queued_s.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn sample_route(scenario: &Scenario, origin: LinkId, rng: &mut ChaCha8Rng) -> Result<Vec<LinkId>, SimError> {
    let graph = &scenario.graph;
    let sink = graph.supersink();
    let mut route = Vec::new();
    let mut current = origin;
    loop {
        let succ = graph.successors(current);
        if succ.first().is_some_and(|&(to, _)| to == sink) {
            return Ok(route);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = succ[succ.len() - 1].0;
        for &(to, r) in succ {
            acc += r;
            if u < acc {
                next = to;
                break;
            }
        }
        route.push(next);
        current = next;
        if route.len() > MAX_ROUTE_LEN {
            return Err(SimError::InvalidScenario(format!(
                "route from `{}` did not reach an exit",
                graph.name(origin)
            )));
        }
    }
}
