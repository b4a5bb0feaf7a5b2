use rayon::prelude::*;

use super::logistic::{fit_logistic, LogisticDesign, NewtonOptions};
use super::{EstimationResult, Method};
use crate::error::{Error, Result};
use crate::graph::{Covariates, DirectedGraph, TemporalNetwork};
use crate::stats::{change_statistics_into, check_inputs, StatisticTerm};

/// Pseudolikelihood design for one target snapshot: every dyad's change
/// statistics, response = dyad state in `current`.
pub fn build_design(
    current: &DirectedGraph,
    prev: Option<&DirectedGraph>,
    cov: &Covariates,
    terms: &[StatisticTerm],
) -> Result<LogisticDesign> {
    check_inputs(current, prev, cov, terms)?;
    let mut design = LogisticDesign::new(terms.len());
    let mut delta = vec![0.0; terms.len()];
    for (u, v) in current.dyad_iter() {
        change_statistics_into(current, prev, cov, terms, (u, v), &mut delta);
        design.push(&delta, current.has_edge(u, v));
    }
    Ok(design)
}

/// MPLE over the transitions of `data`. A single-snapshot network with a
/// purely static spec is fitted on that snapshot alone.
pub fn mple(data: &TemporalNetwork, terms: &[StatisticTerm]) -> Result<EstimationResult> {
    mple_with(data, terms, &NewtonOptions::default())
}

pub fn mple_with(data: &TemporalNetwork, terms: &[StatisticTerm], opts: &NewtonOptions) -> Result<EstimationResult> {
    let cov = data.covariates();
    if data.transition_count() == 0 {
        let needs_prev = terms.iter().any(|t| t.is_temporal());
        return match data.snapshots().first() {
            Some(s) if !needs_prev => {
                let design = build_design(&s.graph, None, cov, terms)?;
                Ok(from_fit(terms, fit_logistic(&design, opts)))
            }
            _ => Err(Error::Config("pseudolikelihood needs at least one transition".into())),
        };
    }
    let pairs: Vec<(&DirectedGraph, &DirectedGraph)> = data.transitions().collect();
    mple_transitions(&pairs, cov, terms, opts)
}

/// MPLE over an explicit list of `(prev, current)` transitions.
pub fn mple_transitions(
    pairs: &[(&DirectedGraph, &DirectedGraph)],
    cov: &Covariates,
    terms: &[StatisticTerm],
    opts: &NewtonOptions,
) -> Result<EstimationResult> {
    if pairs.is_empty() {
        return Err(Error::Config("pseudolikelihood needs at least one transition".into()));
    }
    let designs: Vec<LogisticDesign> = pairs
        .par_iter()
        .map(|(prev, cur)| build_design(cur, Some(prev), cov, terms))
        .collect::<Result<_>>()?;
    let mut design = LogisticDesign::new(terms.len());
    for d in designs {
        design.merge(d);
    }
    Ok(from_fit(terms, fit_logistic(&design, opts)))
}

fn from_fit(terms: &[StatisticTerm], fit: super::LogisticFit) -> EstimationResult {
    EstimationResult {
        method: Method::Mple,
        terms: terms.to_vec(),
        theta_hat: fit.theta,
        std_errors: fit.std_errors,
        log_likelihood_path: fit.log_likelihood_path,
        converged: fit.converged,
        iterations: fit.iterations,
        final_gradient_norm: fit.gradient_norm,
        ridge_used: fit.ridge_used,
        diagnostics: fit.diagnostics,
    }
}
