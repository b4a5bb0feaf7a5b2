//! Weighted logistic regression by damped Newton-Raphson.
//!
//! Rows with identical covariates are pooled into one weighted row; the pool
//! is ordered, so fits are bit-reproducible regardless of input order.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::sampler::logistic;

/// Pooled design: each distinct covariate row with its trial and success counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogisticDesign {
    width: usize,
    cells: BTreeMap<Vec<i64>, (f64, f64)>,
}

impl LogisticDesign {
    pub fn new(width: usize) -> Self {
        LogisticDesign { width, cells: BTreeMap::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Adds one observation. Covariates must be integral (change statistics are counts).
    pub fn push(&mut self, x: &[f64], y: bool) {
        debug_assert_eq!(x.len(), self.width);
        let key: Vec<i64> = x.iter().map(|&v| v as i64).collect();
        let cell = self.cells.entry(key).or_insert((0.0, 0.0));
        cell.0 += 1.0;
        if y {
            cell.1 += 1.0;
        }
    }

    pub fn push_weighted(&mut self, x: &[i64], trials: f64, successes: f64) {
        let cell = self.cells.entry(x.to_vec()).or_insert((0.0, 0.0));
        cell.0 += trials;
        cell.1 += successes;
    }

    pub fn merge(&mut self, other: LogisticDesign) {
        for (k, (n, s)) in other.cells {
            let cell = self.cells.entry(k).or_insert((0.0, 0.0));
            cell.0 += n;
            cell.1 += s;
        }
    }

    /// Scales covariate column `j` by an integer factor.
    pub fn scale_column(&self, j: usize, factor: i64) -> Self {
        let mut out = LogisticDesign::new(self.width);
        for (k, &(n, s)) in &self.cells {
            let mut k = k.clone();
            k[j] *= factor;
            out.push_weighted(&k, n, s);
        }
        out
    }

    pub fn observations(&self) -> f64 {
        self.cells.values().map(|c| c.0).sum()
    }

    pub fn successes(&self) -> f64 {
        self.cells.values().map(|c| c.1).sum()
    }

    pub fn distinct_rows(&self) -> usize {
        self.cells.len()
    }

    /// Log-likelihood, score and observed information at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.width;
        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for (k, &(n, s)) in &self.cells {
            let eta: f64 = k.iter().zip(theta).map(|(&x, t)| x as f64 * t).sum();
            ll += s * eta - n * log1p_exp(eta);
            let mu = logistic(eta);
            let resid = s - n * mu;
            let w = n * mu * (1.0 - mu);
            for a in 0..p {
                let xa = k[a] as f64;
                grad[a] += resid * xa;
                for b in 0..=a {
                    info[(a, b)] += w * xa * k[b] as f64;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        (ll, grad, info)
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.cells
            .iter()
            .map(|(k, &(n, s))| {
                let eta: f64 = k.iter().zip(theta).map(|(&x, t)| x as f64 * t).sum();
                s * eta - n * log1p_exp(eta)
            })
            .sum()
    }
}

#[inline]
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOptions {
    pub gradient_tol: f64,
    pub max_iter: usize,
    pub ridge: f64,
    /// Any |coefficient| above this is treated as divergence to infinity.
    pub separation_bound: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { gradient_tol: 1e-8, max_iter: 100, ridge: 1e-6, separation_bound: 15.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub theta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub log_likelihood_path: Vec<f64>,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub ridge_used: bool,
    pub diagnostics: Vec<String>,
}

/// Solves `info * x = rhs`, falling back to `info + ridge * I` when the
/// information matrix is not positive definite.
pub(crate) fn solve_information(
    info: &DMatrix<f64>,
    rhs: &DVector<f64>,
    ridge: f64,
) -> Option<(DVector<f64>, DMatrix<f64>, bool)> {
    if let Some(ch) = info.clone().cholesky() {
        return Some((ch.solve(rhs), ch.inverse(), false));
    }
    let p = info.nrows();
    let ridged = info + DMatrix::identity(p, p) * ridge;
    ridged.cholesky().map(|ch| (ch.solve(rhs), ch.inverse(), true))
}

pub fn fit_logistic(design: &LogisticDesign, opts: &NewtonOptions) -> LogisticFit {
    let p = design.width();
    let mut theta = vec![0.0; p];
    let mut path = Vec::new();
    let mut diagnostics = Vec::new();
    let mut ridge_used = false;
    let mut converged = false;
    let mut iterations = 0;

    let n = design.observations();
    let s = design.successes();
    if n == 0.0 {
        diagnostics.push("no observations".to_string());
    } else if s == 0.0 || s == n {
        diagnostics.push("complete separation: every response is identical".to_string());
    }
    let separated_upfront = !diagnostics.is_empty();

    let (mut ll, mut grad, mut info) = design.evaluate(&theta);
    path.push(ll);
    if !separated_upfront {
        loop {
            let gnorm = grad.amax();
            if gnorm < opts.gradient_tol {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                diagnostics.push(format!("iteration limit {} reached", opts.max_iter));
                break;
            }
            let Some((step, _, ridged)) = solve_information(&info, &grad, opts.ridge) else {
                diagnostics.push("information matrix not invertible even with ridge".to_string());
                break;
            };
            if ridged && !ridge_used {
                ridge_used = true;
                diagnostics.push(format!("singular information; ridge {} applied", opts.ridge));
            }
            iterations += 1;
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + alpha * d).collect();
                let cand_ll = design.log_likelihood(&cand);
                if cand_ll.is_finite() && cand_ll >= ll {
                    accepted = Some(cand);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(next) = accepted else {
                // no ascent possible at machine precision: stationary point
                converged = grad.amax() < opts.gradient_tol.sqrt();
                if !converged {
                    diagnostics.push("line search failed to improve the likelihood".to_string());
                }
                break;
            };
            theta = next;
            (ll, grad, info) = design.evaluate(&theta);
            path.push(ll);
            if theta.iter().any(|t| t.abs() > opts.separation_bound) {
                diagnostics.push("coefficients diverging: complete or quasi-complete separation".to_string());
                break;
            }
        }
    }
    let gradient_norm = grad.amax();
    let std_errors = match solve_information(&info, &DVector::zeros(p), opts.ridge) {
        Some((_, inv, ridged)) => {
            if ridged && !ridge_used {
                ridge_used = true;
                diagnostics.push(format!("singular information; ridge {} applied", opts.ridge));
            }
            (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect()
        }
        None => vec![f64::NAN; p],
    };
    LogisticFit { theta, std_errors, log_likelihood_path: path, gradient_norm, converged, iterations, ridge_used, diagnostics }
}
