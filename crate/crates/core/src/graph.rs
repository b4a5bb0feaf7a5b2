//! Directed graphs over a fixed node universe and their temporal sequences.
//!
//! Both out- and in-neighbour lists are kept sorted so that the triadic
//! change statistics can intersect neighbourhoods without a transpose scan.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node identifier, contiguous in `0..n` within a universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    #[inline]
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An ordered node pair `(u, v)` with `u != v`.
pub type Dyad = (NodeId, NodeId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    User,
    Repo,
}

/// Per-node attributes used by the influencer terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeCovariates {
    pub is_influencer: bool,
    pub follower_count: u64,
    pub kind: NodeKind,
}

impl NodeCovariates {
    pub fn user(follower_count: u64, is_influencer: bool) -> Self {
        NodeCovariates { is_influencer, follower_count, kind: NodeKind::User }
    }

    pub fn repo() -> Self {
        NodeCovariates { is_influencer: false, follower_count: 0, kind: NodeKind::Repo }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == NodeKind::Repo && (self.is_influencer || self.follower_count != 0) {
            return Err(Error::Data("repository nodes cannot be influencers or have followers".into()));
        }
        Ok(())
    }
}

/// Covariate table indexed by [`NodeId`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Covariates {
    nodes: Vec<NodeCovariates>,
}

impl Covariates {
    pub fn new(nodes: Vec<NodeCovariates>) -> Result<Self> {
        for c in &nodes {
            c.validate()?;
        }
        Ok(Covariates { nodes })
    }

    /// `n` plain users, none of them influencers.
    pub fn plain(n: usize) -> Self {
        Covariates { nodes: vec![NodeCovariates::user(0, false); n] }
    }

    /// `n` users where the listed nodes are influencers.
    pub fn with_influencers(n: usize, influencers: &[usize]) -> Self {
        let mut nodes = vec![NodeCovariates::user(0, false); n];
        for &i in influencers {
            nodes[i].is_influencer = true;
        }
        Covariates { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn get(&self, v: NodeId) -> &NodeCovariates {
        &self.nodes[v.index()]
    }

    #[inline]
    pub fn is_influencer(&self, v: NodeId) -> bool {
        self.nodes[v.index()].is_influencer
    }

    pub fn as_slice(&self) -> &[NodeCovariates] {
        &self.nodes
    }

    pub fn influencers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_influencer)
            .map(|(i, _)| NodeId::from(i))
    }

    /// Reorders the table so that new node `i` carries the attributes of old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Covariates { nodes: perm.iter().map(|&old| self.nodes[old]).collect() }
    }
}

/// Outcome of [`DirectedGraph::toggle_edge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToggleReport {
    pub was_present: bool,
}

/// Simple directed graph: no self-loops, no parallel edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirectedGraph {
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl DirectedGraph {
    pub fn empty(n: usize) -> Self {
        DirectedGraph { out_adj: vec![Vec::new(); n], in_adj: vec![Vec::new(); n], edge_count: 0 }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = DirectedGraph::empty(n);
        for (u, v) in dyads(n) {
            g.insert_unchecked(u, v);
        }
        g
    }

    /// Builds a graph from an edge list, rejecting loops and out-of-range nodes.
    /// Duplicate edges are collapsed.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = DirectedGraph::empty(n);
        for (u, v) in edges {
            g.add_edge(NodeId::from(u), NodeId::from(v))?;
        }
        Ok(g)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of ordered dyads, `n(n-1)`.
    pub fn dyad_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1)
    }

    pub fn density(&self) -> f64 {
        match self.dyad_count() {
            0 => 0.0,
            d => self.edge_count as f64 / d as f64,
        }
    }

    #[inline]
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_adj[v.index()]
    }

    #[inline]
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v.index()]
    }

    #[inline]
    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_adj[v.index()].len()
    }

    #[inline]
    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_adj[v.index()].len()
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out_adj[u.index()].binary_search(&v).is_ok()
    }

    fn check_dyad(&self, u: NodeId, v: NodeId) -> Result<()> {
        let n = self.node_count();
        for w in [u, v] {
            if w.index() >= n {
                return Err(Error::NodeOutOfRange { node: w, n });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        Ok(())
    }

    /// Flips the state of dyad `(u, v)`.
    pub fn toggle_edge(&mut self, u: NodeId, v: NodeId) -> Result<ToggleReport> {
        self.check_dyad(u, v)?;
        let was_present = self.has_edge(u, v);
        self.set_unchecked(u, v, !was_present);
        Ok(ToggleReport { was_present })
    }

    /// Inserts `(u, v)`; returns whether the edge was newly added.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_dyad(u, v)?;
        Ok(self.insert_unchecked(u, v))
    }

    /// Removes `(u, v)`; returns whether an edge was removed.
    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_dyad(u, v)?;
        Ok(self.remove_unchecked(u, v))
    }

    /// Sets the dyad state; returns the previous state.
    pub fn set_edge(&mut self, u: NodeId, v: NodeId, present: bool) -> Result<bool> {
        self.check_dyad(u, v)?;
        let was = self.has_edge(u, v);
        if was != present {
            self.set_unchecked(u, v, present);
        }
        Ok(was)
    }

    /// Sets a dyad already known to be valid. Callers in the sampler loop use this.
    #[inline]
    pub(crate) fn set_unchecked(&mut self, u: NodeId, v: NodeId, present: bool) {
        if present {
            self.insert_unchecked(u, v);
        } else {
            self.remove_unchecked(u, v);
        }
    }

    fn insert_unchecked(&mut self, u: NodeId, v: NodeId) -> bool {
        let out = &mut self.out_adj[u.index()];
        match out.binary_search(&v) {
            Ok(_) => false,
            Err(pos) => {
                out.insert(pos, v);
                let inn = &mut self.in_adj[v.index()];
                let pos = inn.binary_search(&u).unwrap_err();
                inn.insert(pos, u);
                self.edge_count += 1;
                true
            }
        }
    }

    fn remove_unchecked(&mut self, u: NodeId, v: NodeId) -> bool {
        let out = &mut self.out_adj[u.index()];
        match out.binary_search(&v) {
            Ok(pos) => {
                out.remove(pos);
                let inn = &mut self.in_adj[v.index()];
                let pos = inn.binary_search(&u).expect("in/out adjacency out of sync");
                inn.remove(pos);
                self.edge_count -= 1;
                true
            }
            Err(_) => false,
        }
    }

    pub fn clear(&mut self) {
        for l in self.out_adj.iter_mut().chain(self.in_adj.iter_mut()) {
            l.clear();
        }
        self.edge_count = 0;
    }

    /// All edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Dyad> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, outs)| outs.iter().map(move |&v| (NodeId::from(u), v)))
    }

    /// All `n(n-1)` ordered dyads in lexicographic order.
    pub fn dyad_iter(&self) -> impl Iterator<Item = Dyad> {
        dyads(self.node_count())
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut g = DirectedGraph::empty(n);
        for (u, v) in self.edges() {
            g.insert_unchecked(NodeId::from(inverse[u.index()]), NodeId::from(inverse[v.index()]));
        }
        g
    }

    /// Subgraph induced by `keep`, relabelled densely in the given order.
    pub fn induced(&self, keep: &[NodeId]) -> Self {
        let mut map = vec![None; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            map[old.index()] = Some(NodeId::from(new));
        }
        let mut g = DirectedGraph::empty(keep.len());
        for (u, v) in self.edges() {
            if let (Some(a), Some(b)) = (map[u.index()], map[v.index()]) {
                g.insert_unchecked(a, b);
            }
        }
        g
    }

    /// Recounts edges from the adjacency lists and checks in/out consistency.
    pub fn check_invariants(&self) -> bool {
        let out_total: usize = self.out_adj.iter().map(Vec::len).sum();
        let in_total: usize = self.in_adj.iter().map(Vec::len).sum();
        if out_total != self.edge_count || in_total != self.edge_count {
            return false;
        }
        self.out_adj.iter().enumerate().all(|(u, outs)| {
            outs.windows(2).all(|w| w[0] < w[1])
                && outs.iter().all(|&v| {
                    v.index() != u && self.in_adj[v.index()].binary_search(&NodeId::from(u)).is_ok()
                })
        })
    }
}

/// Lexicographic ordered dyads of an `n`-node universe.
pub fn dyads(n: usize) -> impl Iterator<Item = Dyad> {
    (0..n).flat_map(move |u| {
        (0..n).filter(move |&v| v != u).map(move |v| (NodeId::from(u), NodeId::from(v)))
    })
}

/// Edge formation and elimination between two snapshots of the same universe.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SnapshotDiff {
    pub added: BTreeSet<Dyad>,
    pub removed: BTreeSet<Dyad>,
}

pub fn snapshot_diff(a: &DirectedGraph, b: &DirectedGraph) -> Result<SnapshotDiff> {
    if a.node_count() != b.node_count() {
        return Err(Error::UniverseMismatch { left: a.node_count(), right: b.node_count() });
    }
    let added = b.edges().filter(|&(u, v)| !a.has_edge(u, v)).collect();
    let removed = a.edges().filter(|&(u, v)| !b.has_edge(u, v)).collect();
    Ok(SnapshotDiff { added, removed })
}

/// One observed time slice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub label: String,
    pub graph: DirectedGraph,
}

impl Snapshot {
    pub fn new(label: impl Into<String>, graph: DirectedGraph) -> Self {
        Snapshot { label: label.into(), graph }
    }
}

/// Ordered snapshots over a shared node universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalNetwork {
    covariates: Covariates,
    snapshots: Vec<Snapshot>,
}

impl TemporalNetwork {
    pub fn new(covariates: Covariates, snapshots: Vec<Snapshot>) -> Result<Self> {
        let n = covariates.len();
        for s in &snapshots {
            if s.graph.node_count() != n {
                return Err(Error::UniverseMismatch { left: n, right: s.graph.node_count() });
            }
        }
        for w in snapshots.windows(2) {
            if w[0].label >= w[1].label {
                return Err(Error::Data(format!(
                    "snapshot labels must strictly increase: {:?} then {:?}",
                    w[0].label, w[1].label
                )));
            }
        }
        Ok(TemporalNetwork { covariates, snapshots })
    }

    pub fn node_count(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.snapshots.iter().map(|s| s.label.as_str())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Consecutive `(previous, current)` pairs.
    pub fn transitions(&self) -> impl Iterator<Item = (&DirectedGraph, &DirectedGraph)> {
        self.snapshots.windows(2).map(|w| (&w[0].graph, &w[1].graph))
    }

    pub fn transition_count(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.snapshots.iter().position(|s| s.label == label)
    }

    /// Keeps the snapshots in `range`, sharing the universe.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        TemporalNetwork { covariates: self.covariates.clone(), snapshots: self.snapshots[range].to_vec() }
    }

    /// Restricts the network to user nodes, dropping repositories and their edges.
    pub fn user_projection(&self) -> (Self, Vec<NodeId>) {
        let keep: Vec<NodeId> = (0..self.node_count())
            .map(NodeId::from)
            .filter(|&v| self.covariates.get(v).kind == NodeKind::User)
            .collect();
        let covariates = Covariates { nodes: keep.iter().map(|&v| *self.covariates.get(v)).collect() };
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| Snapshot::new(s.label.clone(), s.graph.induced(&keep)))
            .collect();
        (TemporalNetwork { covariates, snapshots }, keep)
    }

    pub fn has_repo_nodes(&self) -> bool {
        self.covariates.nodes.iter().any(|c| c.kind == NodeKind::Repo)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        TemporalNetwork {
            covariates: self.covariates.permuted(perm),
            snapshots: self
                .snapshots
                .iter()
                .map(|s| Snapshot::new(s.label.clone(), s.graph.permuted(perm)))
                .collect(),
        }
    }
}

/// Counts common elements of two sorted slices.
#[inline]
pub(crate) fn sorted_intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
