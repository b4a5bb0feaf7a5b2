//! Parameter estimation: pseudolikelihood, Monte Carlo maximum likelihood and
//! bootstrap standard errors.

mod bootstrap;
mod logistic;
mod mcmle;
mod mple;

use serde::{Deserialize, Serialize};

use crate::stats::{ModelSpec, StatisticTerm};

pub use bootstrap::{bootstrap_std_errors, BootstrapResult};
pub use logistic::{fit_logistic, LogisticDesign, LogisticFit, NewtonOptions};
pub use mcmle::{mcmle, mcmle_from, McmleOptions};
pub use mple::{build_design, mple, mple_transitions, mple_with};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MPLE")]
    Mple,
    #[serde(rename = "MCMLE")]
    Mcmle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub terms: Vec<StatisticTerm>,
    pub theta_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// MPLE: log-pseudolikelihood per Newton iterate. MCMLE: approximate
    /// log-likelihood gain relative to the starting point, per outer iteration,
    /// summed over transitions.
    pub log_likelihood_path: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// MPLE: final score sup-norm. MCMLE: sup-norm of the last accepted step.
    pub final_gradient_norm: f64,
    pub ridge_used: bool,
    pub diagnostics: Vec<String>,
}

impl EstimationResult {
    /// The fitted model.
    pub fn spec(&self) -> crate::Result<ModelSpec> {
        ModelSpec::new(self.terms.clone(), self.theta_hat.clone())
    }
}
