#![allow(dead_code)]

pub mod ppo;

use mhp_core::network::{build_graph, extend_with_supersink, ExtendedGraph, LinkId, LinkSpec, MovementSpec};
use proptest::prelude::*;

/// Edges as (from, to, weight) over `n` links named by index. Every link but
/// the last has a forward edge, so all of them drain into the last one,
/// which is the only exit. `back` adds edges to lower indices.
pub fn random_network(n: usize, back: bool) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    let rows = (0..n.saturating_sub(1))
        .map(move |i| {
            let fwd = (i + 1..n, 0.1f64..1.0);
            let extra = prop::collection::vec((0..n, 0.1f64..1.0), 0..3);
            (fwd, extra).prop_map(move |(f, extra)| {
                let mut out = vec![(i, f.0, f.1)];
                for (to, w) in extra {
                    if to == i || (!back && to < i) || out.iter().any(|e| e.1 == to) {
                        continue;
                    }
                    out.push((i, to, w));
                }
                out
            })
        })
        .collect::<Vec<_>>();
    rows.prop_map(move |rows| (n, rows.into_iter().flatten().collect()))
}

pub fn build(n: usize, edges: &[(usize, usize, f64)]) -> ExtendedGraph {
    let links: Vec<LinkSpec> = (0..n).map(|i| LinkSpec::named(&i.to_string())).collect();
    let mut movements = Vec::new();
    for from in 0..n {
        let out: Vec<_> = edges.iter().filter(|e| e.0 == from).collect();
        let total: f64 = out.iter().map(|e| e.2).sum();
        for e in out {
            movements.push(MovementSpec::new(&e.0.to_string(), &e.1.to_string(), e.2 / total));
        }
    }
    extend_with_supersink(build_graph(&links, &movements).unwrap()).unwrap()
}

/// Sum over every walk of exactly `h` edges from `j` to `l` of the product
/// of its turning ratios, by depth-first enumeration.
pub fn walk_weight(g: &ExtendedGraph, j: LinkId, l: LinkId, h: usize) -> f64 {
    if h == 0 {
        return if j == l { 1.0 } else { 0.0 };
    }
    g.successors(j).iter().map(|&(k, r)| r * walk_weight(g, k, l, h - 1)).sum()
}

/// Whether any walk of exactly `h` edges joins `j` to `l`.
pub fn has_walk(g: &ExtendedGraph, j: LinkId, l: LinkId, h: usize) -> bool {
    if h == 0 {
        return j == l;
    }
    g.successors(j).iter().any(|&(k, _)| has_walk(g, k, l, h - 1))
}

/// The 8-link toy network: 0→4, 1→2 (1/3), 1→3 (2/3), 2→4, 3→7,
/// 4→5 (3/4), 4→6 (1/4), 6→7. Links 5 and 7 exit.
pub fn toy() -> ExtendedGraph {
    let links: Vec<LinkSpec> = (0..8).map(|i| LinkSpec::named(&i.to_string())).collect();
    let mv = |f: u32, t: u32, r: f64| MovementSpec::new(&f.to_string(), &t.to_string(), r);
    let movements = vec![
        mv(0, 4, 1.0),
        mv(1, 2, 1.0 / 3.0),
        mv(1, 3, 2.0 / 3.0),
        mv(2, 4, 1.0),
        mv(3, 7, 1.0),
        mv(4, 5, 0.75),
        mv(4, 6, 0.25),
        mv(6, 7, 1.0),
    ];
    extend_with_supersink(build_graph(&links, &movements).unwrap()).unwrap()
}

/// Queues of the worked example, Ω last.
pub const TOY_Q: [f64; 9] = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0];
