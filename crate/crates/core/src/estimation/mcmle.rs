use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::logistic::solve_information;
use super::{mple, EstimationResult, Method};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, TemporalNetwork};
use crate::rng::derive_seed;
use crate::sampler::{log_mean_exp_weights, sample_per_transition, McmcConfig, SampleBatch};
use crate::stats::{compute_terms, ModelSpec, StatisticTerm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmleOptions {
    pub mcmc: McmcConfig,
    pub max_outer: usize,
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_step_tol() -> f64 {
    1e-3
}
fn default_halvings() -> usize {
    10
}
fn default_ridge() -> f64 {
    1e-6
}

impl McmleOptions {
    pub fn new(mcmc: McmcConfig, max_outer: usize) -> Self {
        McmleOptions { mcmc, max_outer, step_tol: 1e-3, max_halvings: 10, ridge: 1e-6 }
    }
}

/// Monte Carlo MLE initialised at the MPLE.
pub fn mcmle(data: &TemporalNetwork, terms: &[StatisticTerm], opts: &McmleOptions) -> Result<EstimationResult> {
    let start = mple(data, terms)?;
    let mut result = mcmle_from(data, terms, &start.theta_hat, opts)?;
    if !start.converged {
        result.diagnostics.insert(0, format!("MPLE start did not converge: {}", start.diagnostics.join("; ")));
    }
    Ok(result)
}

/// Per-transition sampled statistics at the reference point of one outer iteration.
struct Approximation<'a> {
    observed: &'a [Vec<f64>],
    batches: &'a [SampleBatch],
}

impl Approximation<'_> {
    /// Geyer-Thompson log-likelihood of `theta_ref + shift` minus that of `theta_ref`,
    /// plus the smallest effective-sample fraction across transitions.
    fn gain(&self, shift: &[f64]) -> (f64, f64) {
        let mut total = 0.0;
        let mut min_ess = f64::INFINITY;
        for (obs, batch) in self.observed.iter().zip(self.batches) {
            let r = log_mean_exp_weights(shift, &batch.statistics);
            total += crate::stats::dot(shift, obs) - r.log_ratio;
            min_ess = min_ess.min(r.effective_sample_size / batch.len() as f64);
        }
        (total, min_ess)
    }

    /// Score and information at the reference point.
    fn score_and_information(&self, p: usize) -> (DVector<f64>, DMatrix<f64>) {
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for (obs, batch) in self.observed.iter().zip(self.batches) {
            let mean = batch.mean_statistics();
            let m = batch.len() as f64;
            for j in 0..p {
                grad[j] += obs[j] - mean[j];
            }
            for row in &batch.statistics {
                for a in 0..p {
                    let da = row[a] - mean[a];
                    for b in 0..=a {
                        info[(a, b)] += da * (row[b] - mean[b]) / m;
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        (grad, info)
    }
}

/// Monte Carlo MLE from an explicit starting point.
///
/// Each outer iteration draws a batch per transition, conditioned on that
/// transition's previous snapshot, at the current estimate, then takes one
/// Newton step on the importance-sampling approximation of the summed
/// per-transition log-likelihood. The step is halved until the approximation
/// improves and no transition's effective sample size falls below 5%.
pub fn mcmle_from(
    data: &TemporalNetwork,
    terms: &[StatisticTerm],
    theta0: &[f64],
    opts: &McmleOptions,
) -> Result<EstimationResult> {
    opts.mcmc.validate()?;
    if opts.max_outer == 0 {
        return Err(Error::Config("max_outer must be at least 1".into()));
    }
    if data.transition_count() == 0 {
        return Err(Error::Config("Monte Carlo MLE needs at least one transition".into()));
    }
    let cov = data.covariates();
    let p = terms.len();
    let pairs: Vec<(&DirectedGraph, &DirectedGraph)> = data.transitions().collect();
    let prevs: Vec<&DirectedGraph> = pairs.iter().map(|(prev, _)| *prev).collect();
    let observed: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(prev, cur)| compute_terms(cur, Some(prev), cov, terms).map(|s| s.0))
        .collect::<Result<_>>()?;

    let mut theta = theta0.to_vec();
    let mut path = vec![0.0];
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut ridge_used = false;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut std_errors = vec![f64::NAN; p];

    for outer in 0..opts.max_outer {
        iterations = outer + 1;
        let spec = ModelSpec::new(terms.to_vec(), theta.clone())
            .map_err(|e| Error::Estimation(format!("iterate left the valid region: {e}")))?;
        let mut mcmc = opts.mcmc.clone();
        mcmc.seed = derive_seed(opts.mcmc.seed, "mcmle", outer as u64);
        mcmc.store_graphs = false;
        let batches = sample_per_transition(&prevs, cov, &spec, &mcmc)?;
        let degenerate = batches.iter().filter(|b| b.degenerate).count();
        if degenerate > 0 {
            diagnostics.push(format!("iteration {iterations}: {degenerate} degenerate chains"));
        }
        let approx = Approximation { observed: &observed, batches: &batches };
        let (grad, info) = approx.score_and_information(p);
        let Some((direction, inverse, ridged)) = solve_information(&info, &grad, opts.ridge) else {
            diagnostics.push(format!("iteration {iterations}: information not invertible"));
            break;
        };
        if ridged && !ridge_used {
            ridge_used = true;
            diagnostics.push(format!("singular information; ridge {} applied", opts.ridge));
        }
        std_errors = (0..p).map(|j| inverse[(j, j)].max(0.0).sqrt()).collect();

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut low_ess_seen = false;
        for _ in 0..=opts.max_halvings {
            let shift: Vec<f64> = direction.iter().map(|d| alpha * d).collect();
            let (gain, ess) = approx.gain(&shift);
            low_ess_seen |= ess < 0.05;
            if gain.is_finite() && gain >= 0.0 && ess >= 0.05 {
                accepted = Some((shift, gain));
                break;
            }
            alpha *= 0.5;
        }
        if low_ess_seen {
            diagnostics.push(format!("iteration {iterations}: low effective sample size; step shortened"));
        }
        let Some((shift, gain)) = accepted else {
            diagnostics.push(format!(
                "iteration {iterations}: no improving step after {} halvings",
                opts.max_halvings
            ));
            break;
        };
        for (t, s) in theta.iter_mut().zip(&shift) {
            *t += s;
        }
        path.push(path.last().copied().unwrap_or(0.0) + gain);
        last_step = shift.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if last_step < opts.step_tol {
            converged = true;
            break;
        }
    }
    if !converged && iterations == opts.max_outer {
        diagnostics.push(format!("outer iteration limit {} reached", opts.max_outer));
    }
    Ok(EstimationResult {
        method: Method::Mcmle,
        terms: terms.to_vec(),
        theta_hat: theta,
        std_errors,
        log_likelihood_path: path,
        converged,
        iterations,
        final_gradient_norm: last_step,
        ridge_used,
        diagnostics,
    })
}
