use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use ttergm::baselines::{classic_tergm_spec, ttergm_spec};
use ttergm::estimation::{bootstrap_std_errors, mcmle_from, mple, BootstrapResult, EstimationResult};
use ttergm::eval::{run_holdout, BlockCandidate, Candidate, EvalConfig, FitMethod, TemporalCandidate};
use ttergm::estimation::McmleOptions;
use ttergm::graph::{NodeId, TemporalNetwork};
use ttergm::ingest::{
    build_influence_network, extract_connection_features, parse_event_log, read_follower_counts, InfluencerSelection,
    RankedRepo, RejectionReport,
};
use ttergm::io::{read_json_file, read_network, write_features, write_json_file, write_network, write_nodes};
use ttergm::rng::derive_seed;
use ttergm::sampler::{generate_sequence, sample_networks, BatchSidecar, McmcConfig};
use ttergm::stats::{ModelSpec, StatisticTerm};
use ttergm::{Error, Result};

use crate::config::{EstimateBlock, EvaluateBlock, FitChoice, IngestBlock, SimulateBlock};

fn create<P: AsRef<Path>>(path: P) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_network(dir: &Path, user_projection: bool) -> Result<TemporalNetwork> {
    let tn = read_network(dir)?;
    Ok(if user_projection { tn.user_projection().0 } else { tn })
}

#[derive(Serialize)]
struct MonthSummary {
    label: String,
    active_nodes: usize,
    edges: usize,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    config: &'a IngestBlock,
    rejections: &'a RejectionReport,
    events_in_range: usize,
    events_out_of_range: usize,
    node_count: usize,
    influencers: &'a InfluencerSelection,
    top_repos: &'a [RankedRepo],
    months: Vec<MonthSummary>,
}

pub fn ingest(block: &IngestBlock, base: &Path, out: &Path) -> Result<()> {
    let parsed = parse_event_log(BufReader::new(File::open(base.join(&block.events))?))?;
    let followers = match &block.followers {
        Some(path) => read_follower_counts(BufReader::new(File::open(base.join(path))?))?,
        None => BTreeMap::new(),
    };
    let net = build_influence_network(&parsed.records, &followers, &block.ingest_config())?;
    let features = extract_connection_features(&net.network, &net.influencer_nodes())?;

    fs::create_dir_all(out)?;
    write_network(&net.network, &out.join("network"))?;
    let mut w = create(out.join("nodes.csv"))?;
    write_nodes(&net.nodes, &mut w)?;
    w.flush()?;
    let mut w = create(out.join("features.csv"))?;
    write_features(&features, Some(&net.nodes), &mut w)?;
    w.flush()?;

    let months: Vec<MonthSummary> = net
        .network
        .snapshots()
        .iter()
        .map(|s| MonthSummary {
            label: s.label.clone(),
            active_nodes: (0..s.graph.node_count())
                .map(NodeId::from)
                .filter(|&v| s.graph.out_degree(v) + s.graph.in_degree(v) > 0)
                .count(),
            edges: s.graph.edge_count(),
        })
        .collect();
    println!("events={} rejected={}", parsed.report.lines_read, parsed.report.rejected);
    println!("nodes={} influencers={} repos={}", net.nodes.len(), net.influencers.ranked.len(), net.top_repos.len());
    for m in &months {
        println!("{} nodes={} edges={}", m.label, m.active_nodes, m.edges);
    }
    for r in &parsed.report.samples {
        log::warn!("rejected line {}: {}", r.line, r.reason);
    }
    let summary = IngestSummary {
        config: block,
        rejections: &parsed.report,
        events_in_range: net.events_in_range,
        events_out_of_range: net.events_out_of_range,
        node_count: net.nodes.len(),
        influencers: &net.influencers,
        top_repos: &net.top_repos,
        months,
    };
    write_json_file(&summary, &out.join("ingest_summary.json"))
}

#[derive(Serialize)]
struct EstimateOutput {
    seed: u64,
    config: EstimateBlock,
    /// The final estimate: MCMLE when requested and successful, else MPLE.
    result: EstimationResult,
    mple: EstimationResult,
    mcmle: Option<EstimationResult>,
    bootstrap: Option<BootstrapResult>,
    notes: Vec<String>,
}

/// The part of `estimate.json` the simulate stage needs.
#[derive(Deserialize)]
struct FittedModel {
    result: FittedSpec,
}

#[derive(Deserialize)]
struct FittedSpec {
    terms: Vec<StatisticTerm>,
    theta_hat: Vec<Option<f64>>,
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Degenerate(_) | Error::Estimation(_))
}

pub fn estimate(block: &EstimateBlock, base: &Path, seed: u64, out: &Path) -> Result<()> {
    let data = load_network(&base.join(&block.network), block.user_projection)?;
    let terms = block.model.terms()?;
    let start = mple(&data, &terms)?;
    let mut notes = Vec::new();
    let mcmle = match block.method {
        FitChoice::Mple => None,
        FitChoice::Mcmle if start.theta_hat.iter().any(|t| !t.is_finite()) => {
            notes.push("MCMLE skipped: MPLE start is not finite".to_string());
            None
        }
        FitChoice::Mcmle => match mcmle_from(&data, &terms, &start.theta_hat, &block.mcmle_options(derive_seed(seed, "estimate", 0))) {
            Ok(mut r) => {
                if !start.converged {
                    r.diagnostics.insert(0, "MPLE start did not converge".to_string());
                }
                Some(r)
            }
            Err(e) if recoverable(&e) => {
                notes.push(format!("MCMLE failed: {e}"));
                None
            }
            Err(e) => return Err(e),
        },
    };
    let bootstrap = if block.bootstrap > 0 {
        match bootstrap_std_errors(&data, &terms, block.bootstrap, derive_seed(seed, "bootstrap", 0)) {
            Ok(b) => Some(b),
            Err(e) if recoverable(&e) => {
                notes.push(format!("bootstrap failed: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let mut result = mcmle.clone().unwrap_or_else(|| start.clone());
    if block.method == FitChoice::Mcmle && mcmle.is_none() {
        result.converged = false;
    }
    println!("method={:?} converged={} iterations={}", result.method, result.converged, result.iterations);
    for (i, t) in result.terms.iter().enumerate() {
        println!("{t} {:.6} ({:.6})", result.theta_hat[i], result.std_errors[i]);
    }
    fs::create_dir_all(out)?;
    let output = EstimateOutput { seed, config: block.clone(), result, mple: start, mcmle, bootstrap, notes };
    write_json_file(&output, &out.join("estimate.json"))
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    horizon: usize,
    initial: String,
    generated: Vec<String>,
    edges: Vec<usize>,
    degenerate_steps: Vec<usize>,
    samples: Option<BatchSidecar>,
}

pub fn simulate(block: &SimulateBlock, base: &Path, seed: u64, out: &Path) -> Result<()> {
    let seed = block.seed.unwrap_or(seed);
    let data = load_network(&base.join(&block.network), block.user_projection)?;
    let fitted: FittedModel = read_json_file(&base.join(&block.estimate))?;
    let theta: Vec<f64> = fitted
        .result
        .theta_hat
        .iter()
        .map(|t| t.filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Data("estimate has non-finite coefficients; cannot simulate".into()))?;
    let spec = ModelSpec::new(fitted.result.terms, theta)?;
    let last = data.last().ok_or_else(|| Error::Data("network has no snapshots".into()))?;
    let config = block.mcmc.with_seed(derive_seed(seed, "simulate", 0), false);
    let seq = generate_sequence(last, data.covariates(), &spec, block.horizon, &config)?;
    fs::create_dir_all(out)?;
    write_network(&seq.network, &out.join("simulated"))?;

    let samples = if block.samples > 0 {
        let config = McmcConfig { n_samples: block.samples, ..block.mcmc.with_seed(derive_seed(seed, "samples", 0), false) };
        let batch = sample_networks(&last.graph, data.covariates(), &spec, &config)?;
        let mut w = create(out.join("samples.csv"))?;
        batch.write_csv(&mut w)?;
        w.flush()?;
        write_json_file(&batch.sidecar(), &out.join("samples.json"))?;
        Some(batch.sidecar())
    } else {
        None
    };
    let generated: Vec<&ttergm::Snapshot> = seq.network.snapshots()[1..].iter().collect();
    for s in &generated {
        println!("{} edges={}", s.label, s.graph.edge_count());
    }
    if !seq.degenerate_steps.is_empty() {
        log::warn!("degenerate chains at steps {:?}", seq.degenerate_steps);
    }
    let summary = SimulationSummary {
        seed,
        horizon: block.horizon,
        initial: last.label.clone(),
        generated: generated.iter().map(|s| s.label.clone()).collect(),
        edges: generated.iter().map(|s| s.graph.edge_count()).collect(),
        degenerate_steps: seq.degenerate_steps,
        samples,
    };
    write_json_file(&summary, &out.join("simulation.json"))
}

pub fn evaluate(block: &EvaluateBlock, base: &Path, seed: u64, out: &Path) -> Result<()> {
    let data = load_network(&base.join(&block.network), block.user_projection)?;
    let method = match block.method {
        FitChoice::Mple => FitMethod::Mple,
        FitChoice::Mcmle => FitMethod::Mcmle(McmleOptions::new(
            block.mcmc.with_seed(derive_seed(seed, "evaluate-fit", 0), false),
            block.max_outer,
        )),
    };
    let simulation = McmcConfig {
        burn_in_sweeps: block.simulation_sweeps,
        sample_interval_sweeps: 1,
        n_samples: 1,
        seed: 0,
        proposal: block.mcmc.proposal,
        store_graphs: false,
    };
    let ttergm = TemporalCandidate {
        name: "TTERGM".into(),
        terms: ttergm_spec().terms,
        method: method.clone(),
        simulation: simulation.clone(),
    };
    let tergm = TemporalCandidate { name: "TERGM".into(), terms: classic_tergm_spec().terms, method, simulation };
    let block_model = BlockCandidate::default();
    let candidates: [&dyn Candidate; 3] = [&ttergm, &tergm, &block_model];
    let config = EvalConfig {
        holdout: block.holdout.clone(),
        n_runs: block.n_runs,
        trajectories_per_run: block.trajectories_per_run,
        seed: derive_seed(seed, "evaluate", 0),
    };
    let report = run_holdout(&data, &candidates, &config)?;
    for a in &report.absent {
        log::warn!("{} not evaluated: {}", a.model, a.reason);
    }
    for c in &report.cells {
        println!("{} {} {} {:.6}", c.model, c.month, c.metric, c.mean_error);
    }
    fs::create_dir_all(out)?;
    let mut w = create(out.join("eval.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    write_json_file(&report, &out.join("eval.json"))
}
