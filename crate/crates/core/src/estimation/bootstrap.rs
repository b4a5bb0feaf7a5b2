use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::NewtonOptions;
use super::mple_transitions;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, TemporalNetwork};
use crate::rng::derive_seed;
use crate::stats::StatisticTerm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub std_errors: Vec<f64>,
    pub replicates: usize,
    pub dropped: usize,
}

/// Nonparametric bootstrap over transitions, refitting the MPLE per replicate.
pub fn bootstrap_std_errors(
    data: &TemporalNetwork,
    terms: &[StatisticTerm],
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if n_boot == 0 {
        return Err(Error::Config("n_boot must be at least 1".into()));
    }
    let pairs: Vec<(&DirectedGraph, &DirectedGraph)> = data.transitions().collect();
    if pairs.len() < 2 {
        return Err(Error::Config("bootstrap needs at least two transitions".into()));
    }
    let opts = NewtonOptions::default();
    let fits: Vec<Option<Vec<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "bootstrap", b as u64));
            let sample: Vec<_> = (0..pairs.len()).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
            mple_transitions(&sample, data.covariates(), terms, &opts)
                .map(|fit| fit.converged.then_some(fit.theta_hat))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<Vec<f64>> = fits.into_iter().flatten().collect();
    let dropped = n_boot - kept.len();
    if dropped * 2 > n_boot {
        return Err(Error::Estimation(format!("{dropped} of {n_boot} bootstrap replicates failed to converge")));
    }
    let k = kept.len();
    let std_errors = (0..terms.len())
        .map(|j| {
            if k < 2 {
                return 0.0;
            }
            let mean = kept.iter().map(|t| t[j]).sum::<f64>() / k as f64;
            let var = kept.iter().map(|t| (t[j] - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            var.sqrt()
        })
        .collect();
    Ok(BootstrapResult { std_errors, replicates: k, dropped })
}
