//! Whole-network topology summary.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graph::{DirectedGraph, NodeId};

/// Undefined quantities (no reachable pairs, zero degree variance) are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub avg_shortest_path: Option<f64>,
    pub assortativity: Option<f64>,
    pub n_components: usize,
    pub avg_clustering: f64,
    pub n_nodes: usize,
    pub n_edges: usize,
}

pub fn topology_report(g: &DirectedGraph) -> TopologyReport {
    TopologyReport {
        avg_shortest_path: avg_shortest_path(g),
        assortativity: assortativity(g),
        n_components: weak_components(g),
        avg_clustering: avg_clustering(g),
        n_nodes: g.node_count(),
        n_edges: g.edge_count(),
    }
}

/// Mean directed BFS distance over ordered pairs `(s, t)`, `s != t`, with `t` reachable.
fn avg_shortest_path(g: &DirectedGraph) -> Option<f64> {
    let n = g.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let (mut total, mut pairs) = (0u64, 0u64);
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(NodeId::from(s));
        while let Some(x) = queue.pop_front() {
            for &y in g.out_neighbors(x) {
                if dist[y.index()] == usize::MAX {
                    dist[y.index()] = dist[x.index()] + 1;
                    total += dist[y.index()] as u64;
                    pairs += 1;
                    queue.push_back(y);
                }
            }
        }
    }
    (pairs > 0).then(|| total as f64 / pairs as f64)
}

/// Pearson correlation of (out-degree of source, in-degree of target) over edges.
fn assortativity(g: &DirectedGraph) -> Option<f64> {
    let m = g.edge_count();
    if m == 0 {
        return None;
    }
    let pairs: Vec<(f64, f64)> =
        g.edges().map(|(u, v)| (g.out_degree(u) as f64, g.in_degree(v) as f64)).collect();
    let mf = m as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / mf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn undirected_neighbors(g: &DirectedGraph, v: NodeId) -> Vec<NodeId> {
    let mut nb: Vec<NodeId> = g.out_neighbors(v).iter().chain(g.in_neighbors(v)).copied().collect();
    nb.sort_unstable();
    nb.dedup();
    nb
}

fn weak_components(g: &DirectedGraph) -> usize {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        stack.push(NodeId::from(s));
        while let Some(x) = stack.pop() {
            for &y in g.out_neighbors(x).iter().chain(g.in_neighbors(x)) {
                if !seen[y.index()] {
                    seen[y.index()] = true;
                    stack.push(y);
                }
            }
        }
    }
    components
}

/// Mean local clustering of the undirected projection; nodes of degree < 2 contribute 0.
fn avg_clustering(g: &DirectedGraph) -> f64 {
    let n = g.node_count();
    if n == 0 {
        return 0.0;
    }
    let nbrs: Vec<Vec<NodeId>> = (0..n).map(|v| undirected_neighbors(g, NodeId::from(v))).collect();
    let linked = |a: NodeId, b: NodeId| nbrs[a.index()].binary_search(&b).is_ok();
    let total: f64 = nbrs
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut closed = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                closed += nb[i + 1..].iter().filter(|&&b| linked(a, b)).count();
            }
            closed as f64 / (k * (k - 1) / 2) as f64
        })
        .sum();
    total / n as f64
}
