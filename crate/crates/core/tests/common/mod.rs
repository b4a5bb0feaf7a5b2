#![allow(dead_code)]

use ttergm::graph::{Covariates, DirectedGraph, Snapshot, TemporalNetwork};
use ttergm::sampler::{generate_sequence, McmcConfig};
use ttergm::stats::{ModelSpec, StatisticTerm};

/// Trajectory of `transitions` steps from an empty graph.
pub fn simulate(spec: &ModelSpec, cov: &Covariates, transitions: usize, seed: u64) -> TemporalNetwork {
    let config = McmcConfig { burn_in_sweeps: 30, n_samples: 1, seed, store_graphs: false, ..McmcConfig::default() };
    let initial = Snapshot::new("2015-01", DirectedGraph::empty(cov.len()));
    generate_sequence(&initial, cov, spec, transitions, &config).unwrap().network
}

pub fn spec(terms: &[StatisticTerm], theta: &[f64]) -> ModelSpec {
    ModelSpec::new(terms.to_vec(), theta.to_vec()).unwrap()
}

pub fn mean_abs_error(estimates: &[Vec<f64>], truth: &[f64]) -> Vec<f64> {
    (0..truth.len())
        .map(|j| estimates.iter().map(|e| (e[j] - truth[j]).abs()).sum::<f64>() / estimates.len() as f64)
        .collect()
}
