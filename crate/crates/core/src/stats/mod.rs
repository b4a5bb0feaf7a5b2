//! Sufficient statistics and change statistics for every model term.
//!
//! Counting conventions: every count is over ordered tuples of distinct
//! nodes, with no division by automorphisms, except `Mutual`, which counts
//! unordered reciprocated pairs.

mod topology;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sorted_intersection_count, Covariates, DirectedGraph, Dyad, NodeId};

pub use topology::{topology_report, TopologyReport};

/// A single model term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatisticTerm {
    Edges,
    Mutual,
    TransitiveTriads,
    TwoStarsOut,
    TwoStarsIn,
    HomophilyInfluencer,
    Stability,
    TriadicDirectLinks,
    TriadicPath2,
    TriadicPath3,
    InfluencerTriangle,
}

impl StatisticTerm {
    pub const ALL: [StatisticTerm; 11] = [
        StatisticTerm::Edges,
        StatisticTerm::Mutual,
        StatisticTerm::TransitiveTriads,
        StatisticTerm::TwoStarsOut,
        StatisticTerm::TwoStarsIn,
        StatisticTerm::HomophilyInfluencer,
        StatisticTerm::Stability,
        StatisticTerm::TriadicDirectLinks,
        StatisticTerm::TriadicPath2,
        StatisticTerm::TriadicPath3,
        StatisticTerm::InfluencerTriangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticTerm::Edges => "Edges",
            StatisticTerm::Mutual => "Mutual",
            StatisticTerm::TransitiveTriads => "TransitiveTriads",
            StatisticTerm::TwoStarsOut => "TwoStarsOut",
            StatisticTerm::TwoStarsIn => "TwoStarsIn",
            StatisticTerm::HomophilyInfluencer => "HomophilyInfluencer",
            StatisticTerm::Stability => "Stability",
            StatisticTerm::TriadicDirectLinks => "TriadicDirectLinks",
            StatisticTerm::TriadicPath2 => "TriadicPath2",
            StatisticTerm::TriadicPath3 => "TriadicPath3",
            StatisticTerm::InfluencerTriangle => "InfluencerTriangle",
        }
    }

    /// Whether the term depends on the previous snapshot.
    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            StatisticTerm::Stability
                | StatisticTerm::TriadicDirectLinks
                | StatisticTerm::TriadicPath2
                | StatisticTerm::TriadicPath3
                | StatisticTerm::InfluencerTriangle
        )
    }

    /// Terms whose change statistic does not depend on the rest of the current graph.
    pub fn is_dyad_independent(self) -> bool {
        matches!(
            self,
            StatisticTerm::Edges
                | StatisticTerm::HomophilyInfluencer
                | StatisticTerm::Stability
                | StatisticTerm::TriadicDirectLinks
        )
    }
}

impl fmt::Display for StatisticTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticTerm::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown statistic term {s:?}")))
    }
}

/// Ordered terms and their coefficients (log-odds per unit statistic).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub terms: Vec<StatisticTerm>,
    pub theta: Vec<f64>,
}

impl ModelSpec {
    pub fn new(terms: Vec<StatisticTerm>, theta: Vec<f64>) -> Result<Self> {
        let spec = ModelSpec { terms, theta };
        spec.validate()?;
        Ok(spec)
    }

    /// Terms with all coefficients zero.
    pub fn zeros(terms: Vec<StatisticTerm>) -> Self {
        let theta = vec![0.0; terms.len()];
        ModelSpec { terms, theta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.len() != self.theta.len() {
            return Err(Error::Config(format!(
                "{} terms but {} coefficients",
                self.terms.len(),
                self.theta.len()
            )));
        }
        if let Some(i) = self.theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::Config(format!("coefficient for {} is not finite", self.terms[i])));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(t) = self.terms.iter().find(|t| !seen.insert(**t)) {
            return Err(Error::Config(format!("term {t} listed twice")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn requires_prev(&self) -> bool {
        self.terms.iter().any(|t| t.is_temporal())
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.terms.iter().all(|t| t.is_dyad_independent())
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        ModelSpec::new(self.terms.clone(), theta)
    }

    pub fn term_names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|t| t.name()).collect()
    }

    pub fn index_of(&self, term: StatisticTerm) -> Option<usize> {
        self.terms.iter().position(|&t| t == term)
    }
}

/// Statistic values aligned with a [`ModelSpec`]'s term order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatisticVector(pub Vec<f64>);

impl StatisticVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, theta: &[f64]) -> f64 {
        dot(&self.0, theta)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks that `spec` can be evaluated on the given graphs.
pub fn check_inputs(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    terms: &[StatisticTerm],
) -> Result<()> {
    let n = current.node_count();
    if cov.len() != n {
        return Err(Error::UniverseMismatch { left: n, right: cov.len() });
    }
    if let Some(p) = prev {
        if p.node_count() != n {
            return Err(Error::UniverseMismatch { left: n, right: p.node_count() });
        }
    } else if let Some(t) = terms.iter().find(|t| t.is_temporal()) {
        return Err(Error::Config(format!("term {t} requires a previous snapshot")));
    }
    Ok(())
}

/// Full statistics `g(current, prev)` for the spec's terms.
pub fn compute_statistics(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    spec: &ModelSpec,
) -> Result<StatisticVector> {
    compute_terms(current, prev, cov, &spec.terms)
}

pub fn compute_terms(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    terms: &[StatisticTerm],
) -> Result<StatisticVector> {
    check_inputs(current, prev, cov, terms)?;
    Ok(StatisticVector(terms.iter().map(|&t| term_value(current, prev, cov, t)).collect()))
}

fn term_value(g: &DirectedGraph, prev: Option<&DirectedGraph>, cov: &Covariates, term: StatisticTerm) -> f64 {
    let n = g.node_count();
    let nodes = || (0..n).map(NodeId::from);
    let infl = |v: NodeId| cov.is_influencer(v);
    let count = match term {
        StatisticTerm::Edges => g.edge_count(),
        StatisticTerm::Mutual => g.edges().filter(|&(u, v)| u < v && g.has_edge(v, u)).count(),
        StatisticTerm::TransitiveTriads => g
            .edges()
            .map(|(i, j)| sorted_intersection_count(g.out_neighbors(i), g.out_neighbors(j)))
            .sum(),
        StatisticTerm::TwoStarsOut => nodes().map(|v| choose2(g.out_degree(v))).sum(),
        StatisticTerm::TwoStarsIn => nodes().map(|v| choose2(g.in_degree(v))).sum(),
        StatisticTerm::HomophilyInfluencer => g.edges().filter(|&(u, v)| infl(u) == infl(v)).count(),
        StatisticTerm::Stability => {
            let p = prev.expect("checked");
            let disagreements = g.edges().filter(|&(u, v)| !p.has_edge(u, v)).count()
                + p.edges().filter(|&(u, v)| !g.has_edge(u, v)).count();
            g.dyad_count() - disagreements
        }
        StatisticTerm::TriadicDirectLinks => g.edges().filter(|&(u, v)| infl(u) && !infl(v)).count(),
        StatisticTerm::TriadicPath2 => nodes().filter(|&r| infl(r)).map(|r| paths2_from(g, cov, r)).sum(),
        StatisticTerm::TriadicPath3 => nodes().filter(|&r| infl(r)).map(|r| paths3_from(g, cov, r)).sum(),
        StatisticTerm::InfluencerTriangle => {
            let p = prev.expect("checked");
            nodes().filter(|&r| infl(r)).map(|r| triangles_from(g, p, r)).sum()
        }
    };
    count as f64
}

/// Edges from `r` to non-influencers.
pub(crate) fn direct_links_from(g: &DirectedGraph, cov: &Covariates, r: NodeId) -> usize {
    g.out_neighbors(r).iter().filter(|&&v| !cov.is_influencer(v)).count()
}

/// Paths r -> a -> b ending at a non-influencer.
pub(crate) fn paths2_from(g: &DirectedGraph, cov: &Covariates, r: NodeId) -> usize {
    g.out_neighbors(r)
        .iter()
        .map(|&a| g.out_neighbors(a).iter().filter(|&&b| !cov.is_influencer(b)).count())
        .sum()
}

/// Paths r -> a -> b -> c with distinct nodes, ending at a non-influencer.
pub(crate) fn paths3_from(g: &DirectedGraph, cov: &Covariates, r: NodeId) -> usize {
    let mut paths = 0;
    for &a in g.out_neighbors(r) {
        for &b in g.out_neighbors(a).iter().filter(|&&b| b != r) {
            paths += g.out_neighbors(b).iter().filter(|&&c| c != a && !cov.is_influencer(c)).count();
        }
    }
    paths
}

/// Pairs (f, x) with r -> f, f -> x and r -> x, where r -> x already held in `prev`.
pub(crate) fn triangles_from(g: &DirectedGraph, prev: &DirectedGraph, r: NodeId) -> usize {
    let held: Vec<NodeId> = g.out_neighbors(r).iter().copied().filter(|&x| prev.has_edge(r, x)).collect();
    g.out_neighbors(r).iter().map(|&f| sorted_intersection_count(g.out_neighbors(f), &held)).sum()
}

#[inline]
fn choose2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// `g(current + (u,v)) - g(current - (u,v))` for the spec's terms.
pub fn change_statistics(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    spec: &ModelSpec,
    dyad: Dyad,
) -> Result<StatisticVector> {
    check_inputs(current, prev, cov, &spec.terms)?;
    let (u, v) = dyad;
    let n = current.node_count();
    if u.index() >= n || v.index() >= n {
        return Err(Error::NodeOutOfRange { node: if u.index() >= n { u } else { v }, n });
    }
    if u == v {
        return Err(Error::SelfLoop(u));
    }
    let mut out = vec![0.0; spec.len()];
    change_statistics_into(current, prev, cov, &spec.terms, dyad, &mut out);
    Ok(StatisticVector(out))
}

/// Unchecked change statistics, written into `out`. Inputs must already have
/// passed [`check_inputs`] and the dyad must be valid.
pub(crate) fn change_statistics_into(
    g: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    terms: &[StatisticTerm],
    (u, v): Dyad,
    out: &mut [f64],
) {
    let infl = |w: NodeId| cov.is_influencer(w);
    for (slot, &term) in out.iter_mut().zip(terms) {
        let delta: i64 = match term {
            StatisticTerm::Edges => 1,
            StatisticTerm::Mutual => g.has_edge(v, u) as i64,
            StatisticTerm::TransitiveTriads => {
                // (u,v) as i->j, as j->k, and as i->k.
                (sorted_intersection_count(g.out_neighbors(u), g.out_neighbors(v))
                    + sorted_intersection_count(g.in_neighbors(u), g.in_neighbors(v))
                    + sorted_intersection_count(g.out_neighbors(u), g.in_neighbors(v))) as i64
            }
            StatisticTerm::TwoStarsOut => (g.out_degree(u) - g.has_edge(u, v) as usize) as i64,
            StatisticTerm::TwoStarsIn => (g.in_degree(v) - g.has_edge(u, v) as usize) as i64,
            StatisticTerm::HomophilyInfluencer => (infl(u) == infl(v)) as i64,
            StatisticTerm::Stability => {
                if prev.expect("checked").has_edge(u, v) {
                    1
                } else {
                    -1
                }
            }
            StatisticTerm::TriadicDirectLinks => (infl(u) && !infl(v)) as i64,
            StatisticTerm::TriadicPath2 => {
                let mut d = 0;
                if infl(u) {
                    d += g.out_neighbors(v).iter().filter(|&&b| !infl(b)).count();
                }
                if !infl(v) {
                    d += g.in_neighbors(u).iter().filter(|&&r| infl(r)).count();
                }
                d as i64
            }
            StatisticTerm::TriadicPath3 => path3_change(g, cov, u, v) as i64,
            StatisticTerm::InfluencerTriangle => {
                let p = prev.expect("checked");
                let mut d = 0;
                if infl(u) {
                    // (u,v) as r->f: x with v->x and u->x held since prev.
                    d += g
                        .out_neighbors(v)
                        .iter()
                        .filter(|&&x| x != u && g.has_edge(u, x) && p.has_edge(u, x))
                        .count();
                    // (u,v) as r->x, only if that edge was already in prev.
                    if p.has_edge(u, v) {
                        d += sorted_intersection_count(g.out_neighbors(u), g.in_neighbors(v));
                    }
                }
                // (u,v) as f->x: influencers r with r->u and r->v held since prev.
                d += g
                    .in_neighbors(u)
                    .iter()
                    .filter(|&&r| r != v && infl(r) && g.has_edge(r, v) && p.has_edge(r, v))
                    .count();
                d as i64
            }
        };
        *slot = delta as f64;
    }
}

fn path3_change(g: &DirectedGraph, cov: &Covariates, u: NodeId, v: NodeId) -> usize {
    let infl = |w: NodeId| cov.is_influencer(w);
    let mut d = 0;
    // (u,v) as r->a: paths v->b->c.
    if infl(u) {
        for &b in g.out_neighbors(v).iter().filter(|&&b| b != u) {
            d += g.out_neighbors(b).iter().filter(|&&c| c != v && !infl(c)).count();
        }
    }
    // (u,v) as a->b: r->u and v->c.
    let sources = g.in_neighbors(u).iter().filter(|&&r| r != v && infl(r)).count();
    if sources > 0 {
        let sinks = g.out_neighbors(v).iter().filter(|&&c| c != u && !infl(c)).count();
        d += sources * sinks;
    }
    // (u,v) as b->c: paths r->a->u.
    if !infl(v) {
        for &a in g.in_neighbors(u).iter().filter(|&&a| a != v) {
            d += g.in_neighbors(a).iter().filter(|&&r| r != u && infl(r)).count();
        }
    }
    d
}
