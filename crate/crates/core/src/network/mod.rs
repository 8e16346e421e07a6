//! Link-level road graphs, the supersink closure, and h-hop neighbor queries.
//!
//! Vertices are links (directed road segments). Edges are permitted turning
//! movements weighted by turning ratios. Extending a graph with the supersink
//! turns the weighted adjacency matrix into an absorbing Markov transition
//! matrix, see [`TransitionMatrix`].

mod file;
mod matrix;
mod queue;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use file::{LinkSpec, MovementSpec, NetworkFile};
pub use matrix::{TransitionMatrix, DENSE_LIMIT};
pub use queue::QueueSnapshot;

/// Tolerance applied to per-link turning-ratio sums before renormalization.
pub const RATIO_SUM_TOLERANCE: f64 = 1e-9;

/// Display name of the supersink vertex.
pub const SUPERSINK_NAME: &str = "Ω";

/// Dense 0-based index of a link in the canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl LinkId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("movement {from} -> {to} references an unknown link")]
    DanglingMovement { from: String, to: String },
    #[error("turning ratios out of link `{link}` sum to {sum}, expected 1")]
    RatioSumViolation { link: String, sum: f64 },
    #[error("turning ratio {ratio} for movement {from} -> {to} is outside [0, 1]")]
    InvalidRatio { from: String, to: String, ratio: f64 },
    #[error("link `{link}`: {reason}")]
    InvalidLink { link: String, reason: String },
    #[error("link `{link}` is declared exit={declared} but its movements say otherwise")]
    ExitMismatch { link: String, declared: bool },
    #[error("link `{link}` cannot reach the supersink; the network is not absorbing")]
    NoExitLink { link: String },
    #[error("network has no links")]
    Empty,
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("matrix is {rows}x{cols}, expected square and nonempty")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {row} is not stochastic (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },
    #[error("last row is not an absorbing supersink")]
    NotAbsorbing,
    #[error("queue vector: {0}")]
    InvalidQueue(String),
    #[error("failed to read network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed network file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A directed road segment. Physical fields are used by the simulator only.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub length_m: f64,
    /// Maximum number of vehicles the link can hold.
    pub storage_capacity: u32,
    /// Discharge rate under green, vehicles per hour.
    pub saturation_flow: f64,
    pub free_flow_time: f64,
    pub is_entry: bool,
    pub is_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Movement {
    pub from: LinkId,
    pub to: LinkId,
    pub turning_ratio: f64,
}

/// Validated road graph without the supersink.
#[derive(Debug, Clone)]
pub struct LinkGraph {
    links: Vec<Link>,
    movements: Vec<Movement>,
    by_name: HashMap<String, LinkId>,
}

impl LinkGraph {
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<LinkId, NetworkError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| NetworkError::UnknownLink(name.to_string()))
    }

    pub fn exits(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_exit)
            .map(|(i, _)| LinkId(i))
    }
}

/// Validates links and movements and assigns indices in input order.
///
/// Exit status is inferred from topology (no outgoing movements). An explicit
/// `exit` declaration is accepted only when it agrees. Turning ratios must sum
/// to one per source link within [`RATIO_SUM_TOLERANCE`] and are renormalized
/// exactly afterwards. Zero-ratio movements are dropped.
pub fn build_graph(links: &[LinkSpec], movements: &[MovementSpec]) -> Result<LinkGraph, NetworkError> {
    if links.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut by_name = HashMap::with_capacity(links.len());
    for (i, spec) in links.iter().enumerate() {
        if by_name.insert(spec.id.clone(), LinkId(i)).is_some() {
            return Err(NetworkError::DuplicateLink(spec.id.clone()));
        }
    }

    let mut outgoing: Vec<Vec<(LinkId, f64)>> = vec![Vec::new(); links.len()];
    let mut has_incoming = vec![false; links.len()];
    for m in movements {
        let (from, to) = match (by_name.get(&m.from), by_name.get(&m.to)) {
            (Some(&f), Some(&t)) => (f, t),
            _ => {
                return Err(NetworkError::DanglingMovement {
                    from: m.from.clone(),
                    to: m.to.clone(),
                })
            }
        };
        if !(0.0..=1.0).contains(&m.ratio) {
            return Err(NetworkError::InvalidRatio {
                from: m.from.clone(),
                to: m.to.clone(),
                ratio: m.ratio,
            });
        }
        outgoing[from.0].push((to, m.ratio));
        if m.ratio > 0.0 {
            has_incoming[to.0] = true;
        }
    }

    let mut built = Vec::with_capacity(links.len());
    let mut kept = Vec::with_capacity(movements.len());
    for (i, spec) in links.iter().enumerate() {
        let inferred_exit = outgoing[i].is_empty();
        if let Some(declared) = spec.exit {
            if declared != inferred_exit {
                return Err(NetworkError::ExitMismatch { link: spec.id.clone(), declared });
            }
        }
        if !inferred_exit {
            let sum: f64 = outgoing[i].iter().map(|&(_, r)| r).sum();
            if (sum - 1.0).abs() > RATIO_SUM_TOLERANCE {
                return Err(NetworkError::RatioSumViolation { link: spec.id.clone(), sum });
            }
            for &(to, r) in &outgoing[i] {
                if r > 0.0 {
                    kept.push(Movement { from: LinkId(i), to, turning_ratio: r / sum });
                }
            }
        }
        let link = Link {
            name: spec.id.clone(),
            length_m: spec.length_m,
            storage_capacity: spec.capacity_veh,
            saturation_flow: spec.sat_flow_vph,
            free_flow_time: spec.ff_time_s,
            is_entry: spec.entry.unwrap_or(!has_incoming[i]),
            is_exit: inferred_exit,
        };
        validate_link(&link)?;
        built.push(link);
    }

    Ok(LinkGraph { links: built, movements: kept, by_name })
}

fn validate_link(link: &Link) -> Result<(), NetworkError> {
    let bad = |reason: &str| {
        Err(NetworkError::InvalidLink { link: link.name.clone(), reason: reason.to_string() })
    };
    if !(link.length_m > 0.0) {
        return bad("length must be positive");
    }
    if link.storage_capacity < 1 {
        return bad("storage capacity must be at least one vehicle");
    }
    if !(link.saturation_flow > 0.0) {
        return bad("saturation flow must be positive");
    }
    if !(link.free_flow_time > 0.0) {
        return bad("free-flow time must be positive");
    }
    Ok(())
}

/// A link graph closed by the supersink Ω, which always takes the last index.
#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    graph: LinkGraph,
    successors: Vec<Vec<(LinkId, f64)>>,
    predecessors: Vec<Vec<(LinkId, f64)>>,
}

/// Adds Ω, an edge of ratio 1 from every exit link to Ω, and Ω's self-loop.
///
/// Fails with [`NetworkError::NoExitLink`] naming the first link from which
/// Ω is unreachable.
pub fn extend_with_supersink(graph: LinkGraph) -> Result<ExtendedGraph, NetworkError> {
    let n = graph.len();
    let sink = LinkId(n);
    let mut successors: Vec<Vec<(LinkId, f64)>> = vec![Vec::new(); n + 1];
    for m in &graph.movements {
        successors[m.from.0].push((m.to, m.turning_ratio));
    }
    for exit in graph.exits() {
        successors[exit.0].push((sink, 1.0));
    }
    successors[n].push((sink, 1.0));

    let mut predecessors: Vec<Vec<(LinkId, f64)>> = vec![Vec::new(); n + 1];
    for (from, outs) in successors.iter().enumerate() {
        for &(to, r) in outs {
            predecessors[to.0].push((LinkId(from), r));
        }
    }

    // Reverse reachability from Ω.
    let mut reaches = vec![false; n + 1];
    let mut stack = vec![sink];
    reaches[n] = true;
    while let Some(v) = stack.pop() {
        for &(u, _) in &predecessors[v.0] {
            if !reaches[u.0] {
                reaches[u.0] = true;
                stack.push(u);
            }
        }
    }
    if let Some(i) = reaches.iter().position(|r| !r) {
        return Err(NetworkError::NoExitLink { link: graph.links[i].name.clone() });
    }

    Ok(ExtendedGraph { graph, successors, predecessors })
}

impl ExtendedGraph {
    /// Reads, validates, and extends a JSON network file.
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, NetworkError> {
        NetworkFile::read(path)?.build()
    }

    /// Number of vertices including Ω.
    pub fn len(&self) -> usize {
        self.successors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of real links.
    pub fn real_len(&self) -> usize {
        self.graph.len()
    }

    pub fn supersink(&self) -> LinkId {
        LinkId(self.graph.len())
    }

    pub fn base(&self) -> &LinkGraph {
        &self.graph
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.graph.links.get(id.0)
    }

    pub fn name(&self, id: LinkId) -> &str {
        if id == self.supersink() {
            SUPERSINK_NAME
        } else {
            &self.graph.links[id.0].name
        }
    }

    /// Resolves an external link name. `Ω` and `omega` name the supersink.
    pub fn id(&self, name: &str) -> Result<LinkId, NetworkError> {
        if name == SUPERSINK_NAME || name.eq_ignore_ascii_case("omega") {
            return Ok(self.supersink());
        }
        self.graph.id(name)
    }

    pub fn check(&self, id: LinkId) -> Result<LinkId, NetworkError> {
        if id.0 < self.len() {
            Ok(id)
        } else {
            Err(NetworkError::UnknownLink(id.to_string()))
        }
    }

    /// Outgoing edges with turning ratios, Ω edges included.
    pub fn successors(&self, id: LinkId) -> &[(LinkId, f64)] {
        &self.successors[id.0]
    }

    pub fn predecessors(&self, id: LinkId) -> &[(LinkId, f64)] {
        &self.predecessors[id.0]
    }

    pub fn index_order(&self) -> impl Iterator<Item = LinkId> {
        (0..self.len()).map(LinkId)
    }

    /// Links `j` with a directed walk of exactly `h` edges from `j` to `l`.
    pub fn upstream_neighbors(&self, l: LinkId, h: usize) -> Result<BTreeSet<LinkId>, NetworkError> {
        self.check(l)?;
        Ok(self.walk(l, h, &self.predecessors))
    }

    /// Links reachable from `l` by a walk of exactly `h` edges.
    pub fn downstream_neighbors(&self, l: LinkId, h: usize) -> Result<BTreeSet<LinkId>, NetworkError> {
        self.check(l)?;
        Ok(self.walk(l, h, &self.successors))
    }

    fn walk(&self, start: LinkId, h: usize, adj: &[Vec<(LinkId, f64)>]) -> BTreeSet<LinkId> {
        let mut frontier = BTreeSet::from([start]);
        for _ in 0..h {
            if frontier.is_empty() {
                break;
            }
            frontier = frontier
                .iter()
                .flat_map(|v| adj[v.0].iter().map(|&(u, _)| u))
                .collect();
        }
        frontier
    }

    /// Length of the longest walk from any real link to Ω, or `None` if
    /// a cycle among real links makes it unbounded.
    pub fn longest_path_to_sink(&self) -> Option<usize> {
        let n = self.real_len();
        // Longest path in a DAG via memoized DFS; a grey mark means a cycle.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Done(usize),
        }
        fn visit(g: &ExtendedGraph, v: usize, marks: &mut [Mark]) -> Option<usize> {
            match marks[v] {
                Mark::Done(d) => return Some(d),
                Mark::Grey => return None,
                Mark::White => {}
            }
            marks[v] = Mark::Grey;
            let mut best = 0;
            for &(u, _) in &g.successors[v] {
                let d = if u == g.supersink() { 1 } else { 1 + visit(g, u.0, marks)? };
                best = best.max(d);
            }
            marks[v] = Mark::Done(best);
            Some(best)
        }
        let mut marks = vec![Mark::White; n];
        let mut longest = 0;
        for v in 0..n {
            longest = longest.max(visit(self, v, &mut marks)?);
        }
        Some(longest)
    }

    pub fn transition_matrix(&self) -> TransitionMatrix {
        TransitionMatrix::from_graph(self)
    }
}
