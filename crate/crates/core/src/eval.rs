//! Out-of-sample evaluation: degree-error metric, repeated holdout runs and
//! pairwise Welch tests between models.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{fit_block_model, sample_block_model, BlockModel};
use crate::error::{Error, Result};
use crate::estimation::{mcmle, mple, McmleOptions};
use crate::graph::{Covariates, DirectedGraph, NodeId, Snapshot, TemporalNetwork};
use crate::rng::derive_seed;
use crate::sampler::{generate_sequence, McmcConfig};
use crate::stats::{ModelSpec, StatisticTerm};

/// Absolute errors of the predicted mean average in-/out-degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeError {
    pub in_err: f64,
    pub out_err: f64,
}

fn mean_degrees(g: &DirectedGraph, nodes: &[NodeId]) -> (f64, f64) {
    let k = nodes.len() as f64;
    let ins: usize = nodes.iter().map(|&v| g.in_degree(v)).sum();
    let outs: usize = nodes.iter().map(|&v| g.out_degree(v)).sum();
    (ins as f64 / k, outs as f64 / k)
}

fn degree_error_over(predicted: &[DirectedGraph], observed: &DirectedGraph, nodes: &[NodeId]) -> Result<DegreeError> {
    if predicted.is_empty() {
        return Err(Error::Data("no predicted graphs".into()));
    }
    if nodes.is_empty() {
        return Err(Error::Data("no nodes to average over".into()));
    }
    if let Some(g) = predicted.iter().find(|g| g.node_count() != observed.node_count()) {
        return Err(Error::UniverseMismatch { left: g.node_count(), right: observed.node_count() });
    }
    let (mut pin, mut pout) = (0.0, 0.0);
    for g in predicted {
        let (i, o) = mean_degrees(g, nodes);
        pin += i;
        pout += o;
    }
    let m = predicted.len() as f64;
    let (oin, oout) = mean_degrees(observed, nodes);
    Ok(DegreeError { in_err: (pin / m - oin).abs(), out_err: (pout / m - oout).abs() })
}

/// Whole-network degree error. For a single graph the mean in- and
/// out-degree coincide, so `in_err == out_err` for one-sample predictions.
pub fn degree_error(predicted: &[DirectedGraph], observed: &DirectedGraph) -> Result<DegreeError> {
    let nodes: Vec<NodeId> = (0..observed.node_count()).map(NodeId::from).collect();
    degree_error_over(predicted, observed, &nodes)
}

/// Degree error restricted to influencer nodes.
pub fn influencer_degree_error(
    predicted: &[DirectedGraph],
    observed: &DirectedGraph,
    cov: &Covariates,
) -> Result<DegreeError> {
    let nodes: Vec<NodeId> = cov.influencers().collect();
    degree_error_over(predicted, observed, &nodes)
}

/// Two-sided Welch two-sample t-test.
pub fn significance_test(errors_a: &[f64], errors_b: &[f64]) -> Result<f64> {
    if errors_a.len() < 2 || errors_b.len() < 2 {
        return Err(Error::Data("significance test needs at least two runs per model".into()));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = moments(errors_a);
    let (nb, mb, vb) = moments(errors_b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Data(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0))
}

/// A fitted model able to forecast the snapshots after `last`.
pub trait Predictor: Send + Sync {
    /// One graph per step in `1..=horizon`.
    fn predict(&self, last: &Snapshot, cov: &Covariates, horizon: usize, seed: u64) -> Result<Vec<DirectedGraph>>;
}

/// A model family that can be fitted to training snapshots.
pub trait Candidate: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, train: &TemporalNetwork) -> Result<Box<dyn Predictor>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitMethod {
    Mple,
    Mcmle(McmleOptions),
}

/// TERGM-family candidate: fit, then forecast with [`generate_sequence`].
#[derive(Clone, Debug)]
pub struct TemporalCandidate {
    pub name: String,
    pub terms: Vec<StatisticTerm>,
    pub method: FitMethod,
    pub simulation: McmcConfig,
}

pub struct TemporalPredictor {
    pub spec: ModelSpec,
    pub simulation: McmcConfig,
}

impl Predictor for TemporalPredictor {
    fn predict(&self, last: &Snapshot, cov: &Covariates, horizon: usize, seed: u64) -> Result<Vec<DirectedGraph>> {
        let config = McmcConfig { seed, n_samples: 1, ..self.simulation.clone() };
        let seq = generate_sequence(last, cov, &self.spec, horizon, &config)?;
        Ok(seq.network.snapshots()[1..].iter().map(|s| s.graph.clone()).collect())
    }
}

impl Candidate for TemporalCandidate {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, train: &TemporalNetwork) -> Result<Box<dyn Predictor>> {
        let result = match &self.method {
            FitMethod::Mple => mple(train, &self.terms)?,
            FitMethod::Mcmle(opts) => mcmle(train, &self.terms, opts)?,
        };
        if result.theta_hat.iter().any(|t| !t.is_finite()) {
            return Err(Error::Estimation(format!("{}: non-finite estimate", self.name)));
        }
        if result.diagnostics.iter().any(|d| d.contains("separation")) {
            return Err(Error::Estimation(format!("{}: {}", self.name, result.diagnostics.join("; "))));
        }
        Ok(Box::new(TemporalPredictor { spec: result.spec()?, simulation: self.simulation.clone() }))
    }
}

/// Two-block influencer SBM candidate; each step is an independent draw.
#[derive(Clone, Debug)]
pub struct BlockCandidate {
    pub name: String,
}

impl Default for BlockCandidate {
    fn default() -> Self {
        BlockCandidate { name: "Block Model".to_string() }
    }
}

impl Predictor for BlockModel {
    fn predict(&self, _last: &Snapshot, _cov: &Covariates, horizon: usize, seed: u64) -> Result<Vec<DirectedGraph>> {
        sample_block_model(self, horizon, seed)
    }
}

impl Candidate for BlockCandidate {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, train: &TemporalNetwork) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_block_model(train)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "in_deg")]
    InDegree,
    #[serde(rename = "out_deg")]
    OutDegree,
    #[serde(rename = "influencer_in_deg")]
    InfluencerInDegree,
    #[serde(rename = "influencer_out_deg")]
    InfluencerOutDegree,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::InDegree => "in_deg",
            Metric::OutDegree => "out_deg",
            Metric::InfluencerInDegree => "influencer_in_deg",
            Metric::InfluencerOutDegree => "influencer_out_deg",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub holdout: Vec<String>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// Forecast trajectories averaged within one run.
    #[serde(default = "default_trajectories")]
    pub trajectories_per_run: usize,
    pub seed: u64,
}

fn default_runs() -> usize {
    30
}
fn default_trajectories() -> usize {
    1
}

impl EvalConfig {
    pub fn new(holdout: Vec<String>, seed: u64) -> Self {
        EvalConfig { holdout, n_runs: 30, trajectories_per_run: 1, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub model: String,
    pub month: String,
    pub metric: Metric,
    pub mean_error: f64,
    /// Per-run errors in run order.
    pub runs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub model_a: String,
    pub model_b: String,
    pub month: String,
    pub metric: Metric,
    /// `None` when there are fewer than two runs.
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsentModel {
    pub model: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<String>,
    pub absent: Vec<AbsentModel>,
    pub holdout: Vec<String>,
    pub metrics: Vec<Metric>,
    pub n_runs: usize,
    pub seed: u64,
    pub cells: Vec<ErrorCell>,
    pub p_values: Vec<PairwiseTest>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn cell(&self, model: &str, month: &str, metric: Metric) -> Option<&ErrorCell> {
        self.cells.iter().find(|c| c.model == model && c.month == month && c.metric == metric)
    }

    pub fn p_value(&self, a: &str, b: &str, month: &str, metric: Metric) -> Option<f64> {
        self.p_values
            .iter()
            .find(|t| {
                t.month == month
                    && t.metric == metric
                    && ((t.model_a == a && t.model_b == b) || (t.model_a == b && t.model_b == a))
            })
            .and_then(|t| t.p_value)
    }

    /// One row per model x month x metric.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["model", "month", "metric", "mean_error", "n_runs"])?;
        for c in &self.cells {
            wtr.write_record([
                c.model.clone(),
                c.month.clone(),
                c.metric.name().to_string(),
                format!("{}", c.mean_error),
                c.runs.len().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fits every candidate on the snapshots before the holdout months and scores
/// `n_runs` independent forecasts of the holdout months.
pub fn run_holdout(data: &TemporalNetwork, candidates: &[&dyn Candidate], config: &EvalConfig) -> Result<EvalReport> {
    if config.holdout.is_empty() {
        return Err(Error::Config("no holdout months given".into()));
    }
    if config.n_runs == 0 || config.trajectories_per_run == 0 {
        return Err(Error::Config("n_runs and trajectories_per_run must be at least 1".into()));
    }
    let first = data
        .position(&config.holdout[0])
        .ok_or_else(|| Error::Config(format!("holdout month {:?} not in the data", config.holdout[0])))?;
    let tail: Vec<&str> = data.labels().skip(first).collect();
    if tail != config.holdout.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Config("holdout months must be the final snapshots, in order".into()));
    }
    if first == 0 {
        return Err(Error::Config("no training snapshots before the holdout".into()));
    }
    let train = data.slice(0..first);
    let last = train.last().expect("non-empty training slice").clone();
    let observed: Vec<&DirectedGraph> = data.snapshots()[first..].iter().map(|s| &s.graph).collect();
    let cov = data.covariates();
    let horizon = observed.len();

    let mut metrics = vec![Metric::InDegree, Metric::OutDegree];
    let has_influencers = cov.influencers().next().is_some();
    if has_influencers {
        metrics.extend([Metric::InfluencerInDegree, Metric::InfluencerOutDegree]);
    }

    let mut fitted: Vec<(String, Box<dyn Predictor>)> = Vec::new();
    let mut absent = Vec::new();
    for c in candidates {
        match c.fit(&train) {
            Ok(p) => fitted.push((c.name().to_string(), p)),
            Err(e) => {
                log::warn!("model {} dropped from evaluation: {e}", c.name());
                absent.push(AbsentModel { model: c.name().to_string(), reason: e.to_string() });
            }
        }
    }

    // errors[run][model][month][metric]
    let errors: Vec<Vec<Vec<Vec<f64>>>> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| {
            fitted
                .iter()
                .enumerate()
                .map(|(mi, (_, model))| {
                    let mut per_month: Vec<Vec<DirectedGraph>> = vec![Vec::new(); horizon];
                    for traj in 0..config.trajectories_per_run {
                        let seed = derive_seed(
                            derive_seed(config.seed, "run", run as u64),
                            "model-trajectory",
                            (mi * config.trajectories_per_run + traj) as u64,
                        );
                        let graphs = model.predict(&last, cov, horizon, seed)?;
                        if graphs.len() != horizon {
                            return Err(Error::Data("predictor returned the wrong number of steps".into()));
                        }
                        for (slot, g) in per_month.iter_mut().zip(graphs) {
                            slot.push(g);
                        }
                    }
                    per_month
                        .iter()
                        .zip(&observed)
                        .map(|(pred, obs)| {
                            let all = degree_error(pred, obs)?;
                            let mut row = vec![all.in_err, all.out_err];
                            if has_influencers {
                                let inf = influencer_degree_error(pred, obs, cov)?;
                                row.extend([inf.in_err, inf.out_err]);
                            }
                            Ok(row)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (mi, (name, _)) in fitted.iter().enumerate() {
        for (ti, month) in config.holdout.iter().enumerate() {
            for (ki, &metric) in metrics.iter().enumerate() {
                let runs: Vec<f64> = errors.iter().map(|r| r[mi][ti][ki]).collect();
                let mean_error = runs.iter().sum::<f64>() / runs.len() as f64;
                cells.push(ErrorCell { model: name.clone(), month: month.clone(), metric, mean_error, runs });
            }
        }
    }

    let mut notes = Vec::new();
    if config.n_runs < 2 {
        notes.push("fewer than two runs: p-values not computed".to_string());
    }
    let mut p_values = Vec::new();
    for a in 0..fitted.len() {
        for b in a + 1..fitted.len() {
            for month in &config.holdout {
                for &metric in &metrics {
                    let ca = cells.iter().find(|c| c.model == fitted[a].0 && &c.month == month && c.metric == metric);
                    let cb = cells.iter().find(|c| c.model == fitted[b].0 && &c.month == month && c.metric == metric);
                    let p_value = match (ca, cb) {
                        (Some(ca), Some(cb)) if config.n_runs >= 2 => Some(significance_test(&ca.runs, &cb.runs)?),
                        _ => None,
                    };
                    p_values.push(PairwiseTest {
                        model_a: fitted[a].0.clone(),
                        model_b: fitted[b].0.clone(),
                        month: month.clone(),
                        metric,
                        p_value,
                    });
                }
            }
        }
    }

    Ok(EvalReport {
        models: fitted.into_iter().map(|(n, _)| n).collect(),
        absent,
        holdout: config.holdout.clone(),
        metrics,
        n_runs: config.n_runs,
        seed: config.seed,
        cells,
        p_values,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn graph_with_in_degrees(n: usize, edges: usize) -> DirectedGraph {
        // `edges` arcs spread round-robin; the average in-degree is edges / n.
        let mut g = DirectedGraph::empty(n);
        let mut placed = 0;
        'outer: for step in 1..n {
            for u in 0..n {
                if placed == edges {
                    break 'outer;
                }
                g.add_edge(NodeId::from(u), NodeId::from((u + step) % n)).unwrap();
                placed += 1;
            }
        }
        g
    }

    #[test]
    fn degree_error_examples() {
        let observed = graph_with_in_degrees(4, 16 / 4 * 4 - 4); // avg 3.0
        let predicted = graph_with_in_degrees(4, 12); // avg 3.0
        assert_eq!(degree_error(&[predicted.clone()], &observed).unwrap(), DegreeError { in_err: 0.0, out_err: 0.0 });

        let n = 10;
        let observed = graph_with_in_degrees(n, 40); // avg 4.0
        let predicted = graph_with_in_degrees(n, 30); // avg 3.0
        let e = degree_error(&[predicted], &observed).unwrap();
        assert!((e.in_err - 1.0).abs() < 1e-12);
        assert_eq!(e.in_err, e.out_err);

        let observed = graph_with_in_degrees(n, 25); // avg 2.5
        let two = [graph_with_in_degrees(n, 20), graph_with_in_degrees(n, 40)]; // 2.0 and 4.0
        assert!((degree_error(&two, &observed).unwrap().in_err - 0.5).abs() < 1e-12);

        assert!(degree_error(&[], &observed).is_err());
    }

    #[test]
    fn welch_identical_and_separated() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        assert_eq!(significance_test(&a, &a).unwrap(), 1.0);
        let zeros: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1e-6 } else { 0.0 }).collect();
        let ones: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 + 1e-6 } else { 1.0 }).collect();
        assert!(significance_test(&zeros, &ones).unwrap() < 1e-10);
        assert!(significance_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn welch_matches_reference_value() {
        // scipy.stats.ttest_ind([1,2,3,4,5], [2,4,6,8,10], equal_var=False) -> p = 0.107531194...
        let p = significance_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        assert!((p - 0.107_531_194_930_627).abs() < 1e-9, "{p}");
    }

    #[test]
    fn welch_is_calibrated_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rejections = 0;
        for _ in 0..1000 {
            let a: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
            if significance_test(&a, &b).unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 1000.0;
        assert!((rate - 0.05).abs() <= 0.02, "{rate}");
    }
}
