use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::network::{ExtendedGraph, LinkId, NetworkFile};
use crate::pressure::{MatrixPowers, Phase};

/// Largest hop count served from the cached matrix powers.
pub const MAX_HOP: usize = 10;

/// Scenario document. `network` is either a path relative to the scenario
/// file or an inline network object.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioFile {
    pub name: String,
    pub network: NetworkRef,
    #[serde(default = "defaults::horizon")]
    pub horizon_s: f64,
    #[serde(default = "defaults::dt")]
    pub dt_s: f64,
    #[serde(default = "defaults::cycle")]
    pub cycle_s: f64,
    #[serde(default = "defaults::lost_time")]
    pub lost_time_s: f64,
    #[serde(default = "defaults::min_green")]
    pub min_green_s: f64,
    /// MaxPressure control period.
    #[serde(default = "defaults::control_period")]
    pub control_period_s: f64,
    /// Multiplies every demand rate (0.5 undersaturated, 0.75 slightly saturated).
    #[serde(default = "defaults::one")]
    pub demand_scale: f64,
    /// Counts an origin's waiting vehicles in that origin link's measured queue.
    #[serde(default = "defaults::yes")]
    pub virtual_queue_in_origin: bool,
    /// Measures queues in veh/km instead of vehicles.
    #[serde(default)]
    pub density_queues: bool,
    pub intersections: Vec<IntersectionSpec>,
    #[serde(default)]
    pub demand: Vec<DemandSpec>,
}

mod defaults {
    pub fn horizon() -> f64 {
        7200.0
    }
    pub fn dt() -> f64 {
        1.0
    }
    pub fn cycle() -> f64 {
        90.0
    }
    pub fn lost_time() -> f64 {
        4.0
    }
    pub fn min_green() -> f64 {
        10.0
    }
    pub fn control_period() -> f64 {
        10.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn yes() -> bool {
        true
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum NetworkRef {
    Path(String),
    Inline(NetworkFile),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IntersectionSpec {
    pub id: String,
    pub phases: Vec<PhaseSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PhaseSpec {
    pub label: String,
    pub incoming: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_green_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DemandSpec {
    pub origin: String,
    pub profile: Vec<DemandInterval>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DemandInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub rate_vph: f64,
}

/// Piecewise-constant arrival rate at one origin link.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub origin: LinkId,
    pub intervals: Vec<DemandInterval>,
}

impl DemandProfile {
    pub fn rate_at(&self, t: f64) -> f64 {
        self.intervals
            .iter()
            .find(|iv| iv.start_s <= t && t < iv.end_s)
            .map_or(0.0, |iv| iv.rate_vph)
    }

    /// Vehicles expected over `[0, horizon)`.
    pub fn expected_vehicles(&self, horizon_s: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| (iv.end_s.min(horizon_s) - iv.start_s).max(0.0) * iv.rate_vph / 3600.0)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub id: String,
    pub phases: Vec<Phase>,
}

impl Intersection {
    pub fn incoming_links(&self) -> Vec<LinkId> {
        self.phases.iter().flat_map(|p| p.incoming.iter().copied()).collect()
    }

    pub fn min_splits(&self, cycle_s: f64) -> Vec<f64> {
        self.phases.iter().map(|p| p.min_green_s / cycle_s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub horizon_s: f64,
    pub dt_s: f64,
    pub cycle_s: f64,
    pub lost_time_s: f64,
    pub control_period_s: f64,
}

impl Timing {
    pub fn steps(&self) -> usize {
        (self.horizon_s / self.dt_s).round() as usize
    }
}

/// A validated scenario: network, matrix powers, signals, and demand.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: Arc<ExtendedGraph>,
    pub powers: Arc<MatrixPowers>,
    pub intersections: Vec<Intersection>,
    pub demands: Vec<DemandProfile>,
    pub timing: Timing,
    pub virtual_queue_in_origin: bool,
    pub density_queues: bool,
    /// (intersection, phase) controlling each real link, if signalized.
    pub(crate) signal_of: Vec<Option<(usize, usize)>>,
    fingerprint: String,
}

impl Scenario {
    /// Reads a scenario file, resolving a relative network path against the
    /// file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: ScenarioFile = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::compile(&file, |rel| Ok(NetworkFile::read(base.join(rel))?))
    }

    /// Validates a scenario document. `resolve` loads path-referenced networks.
    pub fn compile<F>(file: &ScenarioFile, resolve: F) -> Result<Self, SimError>
    where
        F: FnOnce(&str) -> Result<NetworkFile, SimError>,
    {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        let network = match &file.network {
            NetworkRef::Path(p) => resolve(p)?,
            NetworkRef::Inline(n) => n.clone(),
        };
        let graph = network.build()?;

        for (what, v) in [
            ("horizon_s", file.horizon_s),
            ("dt_s", file.dt_s),
            ("cycle_s", file.cycle_s),
            ("control_period_s", file.control_period_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{what} must be positive"));
            }
        }
        if !(file.lost_time_s >= 0.0) || !(file.min_green_s >= 0.0) {
            return invalid("lost time and min green must be nonnegative".into());
        }
        if !(file.demand_scale >= 0.0) {
            return invalid("demand_scale must be nonnegative".into());
        }

        let mut signal_of = vec![None; graph.real_len()];
        let mut intersections = Vec::with_capacity(file.intersections.len());
        let mut seen_ids = HashSet::new();
        for (ii, spec) in file.intersections.iter().enumerate() {
            if !seen_ids.insert(spec.id.clone()) {
                return invalid(format!("duplicate intersection `{}`", spec.id));
            }
            if spec.phases.is_empty() {
                return invalid(format!("intersection `{}` has no phases", spec.id));
            }
            let mut phases = Vec::with_capacity(spec.phases.len());
            for (pi, ps) in spec.phases.iter().enumerate() {
                if ps.incoming.is_empty() {
                    return invalid(format!("phase `{}` of `{}` has no incoming links", ps.label, spec.id));
                }
                let mut incoming = Vec::with_capacity(ps.incoming.len());
                for name in &ps.incoming {
                    let id = graph.id(name)?;
                    if id == graph.supersink() {
                        return invalid("the supersink cannot be signalized".into());
                    }
                    if signal_of[id.0].is_some() {
                        return invalid(format!("link `{name}` belongs to more than one phase"));
                    }
                    signal_of[id.0] = Some((ii, pi));
                    incoming.push(id);
                }
                let min_green_s = ps.min_green_s.unwrap_or(file.min_green_s);
                phases.push(Phase {
                    intersection: spec.id.clone(),
                    label: ps.label.clone(),
                    incoming,
                    min_green_s,
                });
            }
            let floor: f64 = phases.iter().map(|p| p.min_green_s.max(file.lost_time_s)).sum();
            if floor > file.cycle_s + 1e-9 {
                return invalid(format!("minimum greens of `{}` exceed the cycle", spec.id));
            }
            intersections.push(Intersection { id: spec.id.clone(), phases });
        }

        let mut demands = Vec::with_capacity(file.demand.len());
        let mut origins = HashSet::new();
        for d in &file.demand {
            let origin = graph.id(&d.origin)?;
            let link = graph
                .link(origin)
                .ok_or_else(|| SimError::InvalidScenario("supersink cannot be an origin".into()))?;
            if !link.is_entry {
                return invalid(format!("demand origin `{}` is not an entry link", d.origin));
            }
            if !origins.insert(origin) {
                return invalid(format!("origin `{}` has more than one profile", d.origin));
            }
            let mut last_end = f64::NEG_INFINITY;
            let mut intervals = Vec::with_capacity(d.profile.len());
            for iv in &d.profile {
                if !(iv.end_s > iv.start_s) || iv.start_s < last_end {
                    return invalid(format!("demand intervals of `{}` overlap or are unordered", d.origin));
                }
                if !(iv.rate_vph >= 0.0) {
                    return invalid(format!("negative demand rate at `{}`", d.origin));
                }
                last_end = iv.end_s;
                intervals.push(DemandInterval { rate_vph: iv.rate_vph * file.demand_scale, ..*iv });
            }
            demands.push(DemandProfile { origin, intervals });
        }

        let fingerprint = {
            let mut h = Sha256::new();
            h.update(serde_json::to_vec(file)?);
            h.update(serde_json::to_vec(&network)?);
            h.finalize().iter().map(|b| format!("{b:02x}")).collect()
        };
        let powers = Arc::new(MatrixPowers::new(graph.transition_matrix(), MAX_HOP));
        Ok(Self {
            name: file.name.clone(),
            graph: Arc::new(graph),
            powers,
            intersections,
            demands,
            timing: Timing {
                horizon_s: file.horizon_s,
                dt_s: file.dt_s,
                cycle_s: file.cycle_s,
                lost_time_s: file.lost_time_s,
                control_period_s: file.control_period_s,
            },
            virtual_queue_in_origin: file.virtual_queue_in_origin,
            density_queues: file.density_queues,
            signal_of,
            fingerprint,
        })
    }

    /// SHA-256 over the scenario and network documents.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn entry_links(&self) -> Vec<LinkId> {
        self.graph
            .base()
            .links()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_entry)
            .map(|(i, _)| LinkId(i))
            .collect()
    }

    /// Expected hourly arrival rate at every extended link, averaged over the
    /// loaded part of the horizon, from expected visit counts of the chain.
    pub fn mean_link_flows(&self) -> Vec<f64> {
        let n = self.graph.len();
        let mut flows = vec![0.0; n];
        let p = self.powers.matrix();
        for d in &self.demands {
            let loaded: f64 = d.intervals.iter().filter(|iv| iv.rate_vph > 0.0).map(|iv| iv.end_s - iv.start_s).sum();
            if loaded <= 0.0 {
                continue;
            }
            let mean_rate = d.expected_vehicles(self.timing.horizon_s) * 3600.0 / loaded;
            // Visit mass propagates until it is absorbed in Ω.
            let mut mass = vec![0.0; n];
            mass[d.origin.0] = mean_rate;
            for _ in 0..4 * n + 16 {
                for (f, m) in flows.iter_mut().zip(&mass).take(n - 1) {
                    *f += m;
                }
                mass = p.tmul_vec(&mass);
                mass[n - 1] = 0.0;
                if mass.iter().all(|&m| m < 1e-12) {
                    break;
                }
            }
        }
        flows
    }
}
