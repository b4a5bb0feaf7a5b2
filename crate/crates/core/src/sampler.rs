//! MCMC sampling from `P(N^t | N^{t-1}; theta)`, normaliser-ratio estimation
//! and generative simulation of snapshot sequences.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Covariates, DirectedGraph, Dyad, NodeId, Snapshot, TemporalNetwork};
use crate::month::successor_label;
use crate::rng::{chain_rng, ChainRng};
use crate::stats::{change_statistics_into, check_inputs, compute_terms, dot, ModelSpec, StatisticTerm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposal {
    #[default]
    GibbsSweep,
    RandomToggle,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub burn_in_sweeps: usize,
    pub sample_interval_sweeps: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub proposal: Proposal,
    /// Keep the sampled graphs, not only their statistics.
    #[serde(default = "default_true")]
    pub store_graphs: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in_sweeps: 20,
            sample_interval_sweeps: 1,
            n_samples: 200,
            seed: 0,
            proposal: Proposal::GibbsSweep,
            store_graphs: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in_sweeps == 0 || self.sample_interval_sweeps == 0 || self.n_samples == 0 {
            return Err(Error::Config("MCMC sweep and sample counts must all be at least 1".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Full conditional probability that `dyad` is present given the rest of the graph.
pub fn conditional_edge_probability(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    spec: &ModelSpec,
    dyad: Dyad,
) -> Result<f64> {
    let delta = crate::stats::change_statistics(current, prev, cov, spec, dyad)?;
    let eta = delta.dot(&spec.theta);
    if !eta.is_finite() {
        return Err(Error::Degenerate(format!("non-finite linear predictor at dyad {dyad:?}")));
    }
    Ok(logistic(eta))
}

/// A single Markov chain over graphs, tracking its statistic vector incrementally.
pub struct Chain<'a> {
    graph: DirectedGraph,
    prev: Option<&'a DirectedGraph>,
    cov: &'a Covariates,
    terms: &'a [StatisticTerm],
    theta: &'a [f64],
    stats: Vec<f64>,
    delta: Vec<f64>,
    rng: ChainRng,
    proposal: Proposal,
    proposals: u64,
    accepted: u64,
    sweeps: u64,
    extreme_sweeps: u64,
}

impl<'a> Chain<'a> {
    pub fn new(
        start: DirectedGraph,
        prev: Option<&'a DirectedGraph>,
        cov: &'a Covariates,
        spec: &'a ModelSpec,
        proposal: Proposal,
        rng: ChainRng,
    ) -> Result<Self> {
        spec.validate()?;
        check_inputs(&start, prev, cov, &spec.terms)?;
        let stats = compute_terms(&start, prev, cov, &spec.terms)?.0;
        Ok(Chain {
            graph: start,
            prev,
            cov,
            terms: &spec.terms,
            theta: &spec.theta,
            delta: vec![0.0; spec.len()],
            stats,
            rng,
            proposal,
            proposals: 0,
            accepted: 0,
            sweeps: 0,
            extreme_sweeps: 0,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn into_graph(self) -> DirectedGraph {
        self.graph
    }

    /// Statistics of the current state.
    pub fn statistics(&self) -> &[f64] {
        &self.stats
    }

    /// Gibbs: fraction of dyad updates that changed state. Metropolis: acceptance fraction.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Fraction of completed sweeps that ended on the empty or complete graph.
    pub fn extreme_fraction(&self) -> f64 {
        if self.sweeps == 0 {
            0.0
        } else {
            self.extreme_sweeps as f64 / self.sweeps as f64
        }
    }

    fn apply(&mut self, u: NodeId, v: NodeId, present: bool) {
        self.graph.set_unchecked(u, v, present);
        let sign = if present { 1.0 } else { -1.0 };
        for (s, d) in self.stats.iter_mut().zip(&self.delta) {
            *s += sign * d;
        }
    }

    fn eta(&mut self, u: NodeId, v: NodeId) -> Result<f64> {
        change_statistics_into(&self.graph, self.prev, self.cov, self.terms, (u, v), &mut self.delta);
        let eta = dot(&self.delta, self.theta);
        if !eta.is_finite() {
            return Err(Error::Degenerate(format!("non-finite linear predictor at dyad ({u}, {v})")));
        }
        Ok(eta)
    }

    /// One sweep: `n(n-1)` dyad updates.
    pub fn sweep(&mut self) -> Result<()> {
        let n = self.graph.node_count();
        match self.proposal {
            Proposal::GibbsSweep => {
                for u in 0..n {
                    for v in 0..n {
                        if u == v {
                            continue;
                        }
                        let (u, v) = (NodeId::from(u), NodeId::from(v));
                        let p = logistic(self.eta(u, v)?);
                        let present = self.rng.random::<f64>() < p;
                        self.proposals += 1;
                        if present != self.graph.has_edge(u, v) {
                            self.accepted += 1;
                            self.apply(u, v, present);
                        }
                    }
                }
            }
            Proposal::RandomToggle => {
                if n >= 2 {
                    for _ in 0..n * (n - 1) {
                        let u = self.rng.random_range(0..n);
                        let mut v = self.rng.random_range(0..n - 1);
                        if v >= u {
                            v += 1;
                        }
                        let (u, v) = (NodeId::from(u), NodeId::from(v));
                        let eta = self.eta(u, v)?;
                        let present = self.graph.has_edge(u, v);
                        let log_ratio = if present { -eta } else { eta };
                        self.proposals += 1;
                        if log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio {
                            self.accepted += 1;
                            self.apply(u, v, !present);
                        }
                    }
                }
            }
        }
        self.sweeps += 1;
        let m = self.graph.edge_count();
        if m == 0 || m == self.graph.dyad_count() {
            self.extreme_sweeps += 1;
        }
        Ok(())
    }
}

/// Draws from one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub terms: Vec<StatisticTerm>,
    /// Empty when the config asked not to store graphs.
    pub graphs: Vec<DirectedGraph>,
    /// Row `i` holds the statistics of sample `i`.
    pub statistics: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    /// Chain sat on the empty or complete graph for more than half its sweeps.
    pub degenerate: bool,
    /// Final chain state (always kept).
    pub final_state: DirectedGraph,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.statistics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statistics.is_empty()
    }

    pub fn mean_statistics(&self) -> Vec<f64> {
        let m = self.statistics.len().max(1) as f64;
        let mut mean = vec![0.0; self.terms.len()];
        for row in &self.statistics {
            for (a, x) in mean.iter_mut().zip(row) {
                *a += x;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        mean
    }

    /// Statistics matrix as CSV with a term-name header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(self.terms.iter().map(|t| t.name()))?;
        for row in &self.statistics {
            wtr.write_record(row.iter().map(|x| x.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> BatchSidecar {
        BatchSidecar {
            terms: self.terms.clone(),
            n_samples: self.len(),
            acceptance_rate: self.acceptance_rate,
            degenerate: self.degenerate,
        }
    }
}

/// JSON metadata written next to a batch's CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub terms: Vec<StatisticTerm>,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub degenerate: bool,
}

/// Samples `N^t` given `N^{t-1} = prev`, starting the chain at `prev`.
pub fn sample_networks(
    prev: &DirectedGraph,
    cov: &Covariates,
    spec: &ModelSpec,
    config: &McmcConfig,
) -> Result<SampleBatch> {
    sample_chain(prev.clone(), Some(prev), cov, spec, config, 0)
}

/// General form: explicit start state, optional conditioning snapshot and chain index.
pub fn sample_chain(
    start: DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    spec: &ModelSpec,
    config: &McmcConfig,
    chain_index: u64,
) -> Result<SampleBatch> {
    config.validate()?;
    let mut chain = Chain::new(start, prev, cov, spec, config.proposal, chain_rng(config.seed, chain_index))?;
    for _ in 0..config.burn_in_sweeps {
        chain.sweep()?;
    }
    let mut graphs = Vec::with_capacity(if config.store_graphs { config.n_samples } else { 0 });
    let mut statistics = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        for _ in 0..config.sample_interval_sweeps {
            chain.sweep()?;
        }
        statistics.push(chain.statistics().to_vec());
        if config.store_graphs {
            graphs.push(chain.graph().clone());
        }
    }
    let degenerate = chain.extreme_fraction() > 0.5;
    let acceptance_rate = chain.acceptance_rate();
    Ok(SampleBatch {
        terms: spec.terms.clone(),
        graphs,
        statistics,
        acceptance_rate,
        degenerate,
        final_state: chain.into_graph(),
    })
}

/// One batch per conditioning snapshot, run concurrently with chain index = position.
pub fn sample_per_transition(
    prevs: &[&DirectedGraph],
    cov: &Covariates,
    spec: &ModelSpec,
    config: &McmcConfig,
) -> Result<Vec<SampleBatch>> {
    prevs
        .par_iter()
        .enumerate()
        .map(|(t, prev)| sample_chain((*prev).clone(), Some(prev), cov, spec, config, t as u64))
        .collect()
}

/// A simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSequence {
    /// Initial snapshot followed by `horizon` generated snapshots.
    pub network: TemporalNetwork,
    /// Steps (1-based) whose chain was flagged degenerate.
    pub degenerate_steps: Vec<usize>,
}

/// Simulates `horizon` steps forward from `initial`, carrying the final chain
/// state of each step forward as the next conditioning snapshot.
pub fn generate_sequence(
    initial: &Snapshot,
    cov: &Covariates,
    spec: &ModelSpec,
    horizon: usize,
    config: &McmcConfig,
) -> Result<GeneratedSequence> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut step_config = config.clone();
    step_config.store_graphs = false;
    let mut snapshots = vec![initial.clone()];
    let mut degenerate_steps = Vec::new();
    for step in 1..=horizon {
        let prev = &snapshots[step - 1].graph;
        let batch = sample_chain(prev.clone(), Some(prev), cov, spec, &step_config, step as u64)?;
        if batch.degenerate {
            degenerate_steps.push(step);
        }
        snapshots.push(Snapshot::new(successor_label(&initial.label, step), batch.final_state));
    }
    Ok(GeneratedSequence { network: TemporalNetwork::new(cov.clone(), snapshots)?, degenerate_steps })
}

/// Importance-sampling estimate of `log(Z(theta_new) / Z(theta_ref))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerRatio {
    pub log_ratio: f64,
    pub effective_sample_size: f64,
    /// Effective sample size below 5% of the batch.
    pub low_ess: bool,
}

pub fn estimate_log_normalizer_ratio(
    theta_new: &[f64],
    theta_ref: &[f64],
    batch_at_ref: &SampleBatch,
) -> Result<NormalizerRatio> {
    if theta_new.len() != batch_at_ref.terms.len() || theta_ref.len() != batch_at_ref.terms.len() {
        return Err(Error::Config("coefficient vector length does not match the batch terms".into()));
    }
    if batch_at_ref.is_empty() {
        return Err(Error::Data("empty sample batch".into()));
    }
    let shift: Vec<f64> = theta_new.iter().zip(theta_ref).map(|(a, b)| a - b).collect();
    Ok(log_mean_exp_weights(&shift, &batch_at_ref.statistics))
}

pub(crate) fn log_mean_exp_weights(shift: &[f64], rows: &[Vec<f64>]) -> NormalizerRatio {
    let a: Vec<f64> = rows.iter().map(|g| dot(shift, g)).collect();
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for x in &a {
        let w = (x - max).exp();
        sum += w;
        sum_sq += w * w;
    }
    let m = a.len() as f64;
    let ess = sum * sum / sum_sq;
    NormalizerRatio { log_ratio: max + (sum / m).ln(), effective_sample_size: ess, low_ess: ess < 0.05 * m }
}
