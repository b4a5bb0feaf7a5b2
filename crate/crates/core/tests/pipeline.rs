mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use ttergm::baselines::{fit_block_model, sample_block_model, BlockModel, CLASSIC_TERMS};
use ttergm::eval::{
    degree_error, run_holdout, BlockCandidate, Candidate, EvalConfig, FitMethod, Metric, Predictor, TemporalCandidate,
};
use ttergm::graph::{Covariates, DirectedGraph, NodeId, Snapshot, TemporalNetwork};
use ttergm::ingest::{build_influence_network, extract_connection_features, parse_event_log, IngestConfig};
use ttergm::io::{read_edge_list, write_edge_list, write_network};
use ttergm::sampler::McmcConfig;
use ttergm::stats::StatisticTerm as T;
use ttergm::Error;

fn graph_strategy(n: usize) -> impl Strategy<Value = DirectedGraph> {
    proptest::collection::vec(any::<bool>(), n * (n - 1)).prop_map(move |bits| {
        let mut g = DirectedGraph::empty(n);
        for ((u, v), b) in ttergm::graph::dyads(n).zip(bits) {
            if b {
                g.add_edge(u, v).unwrap();
            }
        }
        g
    })
}

fn brute_paths(g: &DirectedGraph, cov: &Covariates, r: NodeId, len: usize) -> usize {
    fn walk(g: &DirectedGraph, cov: &Covariates, path: &mut Vec<NodeId>, len: usize) -> usize {
        let last = *path.last().unwrap();
        if path.len() == len + 1 {
            return usize::from(!cov.is_influencer(last));
        }
        let mut total = 0;
        for &next in g.out_neighbors(last) {
            if !path.contains(&next) {
                path.push(next);
                total += walk(g, cov, path, len);
                path.pop();
            }
        }
        total
    }
    walk(g, cov, &mut vec![r], len)
}

fn brute_triangles(g: &DirectedGraph, prev: &DirectedGraph, r: NodeId) -> usize {
    let n = g.node_count();
    let mut count = 0;
    for f in (0..n).map(NodeId::from) {
        for x in (0..n).map(NodeId::from) {
            let distinct = f != r && x != r && f != x;
            if distinct && g.has_edge(r, f) && g.has_edge(f, x) && g.has_edge(r, x) && prev.has_edge(r, x) {
                count += 1;
            }
        }
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_match_path_enumeration(a in graph_strategy(8), b in graph_strategy(8)) {
        let cov = Covariates::with_influencers(8, &[0, 3]);
        let tn = TemporalNetwork::new(cov.clone(), vec![Snapshot::new("2017-01", a.clone()), Snapshot::new("2017-02", b.clone())]).unwrap();
        let rows = extract_connection_features(&tn, &[NodeId(0), NodeId(3)]).unwrap();
        for row in &rows {
            let (g, prev) = if row.snapshot == "2017-01" { (&a, None) } else { (&b, Some(&a)) };
            prop_assert_eq!(row.direct_links, brute_paths(g, &cov, row.influencer, 1));
            prop_assert_eq!(row.path2_links, brute_paths(g, &cov, row.influencer, 2));
            prop_assert_eq!(row.path3_links, brute_paths(g, &cov, row.influencer, 3));
            prop_assert_eq!(row.influencer_triangles, prev.map_or(0, |p| brute_triangles(g, p, row.influencer)));
        }
        let direct: usize = rows.iter().filter(|r| r.snapshot == "2017-02").map(|r| r.direct_links).sum();
        prop_assert!(direct <= b.edge_count());
    }

    #[test]
    fn degree_error_ignores_relabelling(a in graph_strategy(6), b in graph_strategy(6), shift in 1usize..6) {
        let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
        let e1 = degree_error(&[a.clone()], &b).unwrap();
        let e2 = degree_error(&[a.permuted(&perm)], &b.permuted(&perm)).unwrap();
        prop_assert_eq!(e1, e2);
        prop_assert_eq!(e1.in_err, e1.out_err);
    }

    #[test]
    fn edge_list_round_trips(g in graph_strategy(7)) {
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        prop_assert_eq!(read_edge_list(&buf[..]).unwrap(), g);
    }
}

#[test]
fn block_model_recovers_rates() {
    let n = 40;
    let infl: Vec<usize> = (0..8).collect();
    let cov = Covariates::with_influencers(n, &infl);
    let truth = BlockModel {
        block_of: (0..n).map(|i| usize::from(i < 8)).collect(),
        p: vec![vec![0.05, 0.2], vec![0.4, 0.1]],
        empty_cells: vec![],
    };
    let graphs = sample_block_model(&truth, 20, 12).unwrap();
    let snaps = graphs.into_iter().enumerate().map(|(i, g)| Snapshot::new(format!("s{i:02}"), g)).collect();
    let fitted = fit_block_model(&TemporalNetwork::new(cov, snaps).unwrap()).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            assert!((fitted.p[a][b] - truth.p[a][b]).abs() < 0.03, "cell ({a},{b}): {}", fitted.p[a][b]);
        }
    }
}

struct Oracle(Vec<DirectedGraph>);

impl Predictor for Oracle {
    fn predict(&self, _: &Snapshot, _: &Covariates, horizon: usize, _: u64) -> ttergm::Result<Vec<DirectedGraph>> {
        Ok(self.0[..horizon].to_vec())
    }
}

struct OracleCandidate(Vec<DirectedGraph>);

impl Candidate for OracleCandidate {
    fn name(&self) -> &str {
        "oracle"
    }
    fn fit(&self, _: &TemporalNetwork) -> ttergm::Result<Box<dyn Predictor>> {
        Ok(Box::new(Oracle(self.0.clone())))
    }
}

struct Failing;

impl Candidate for Failing {
    fn name(&self) -> &str {
        "failing"
    }
    fn fit(&self, _: &TemporalNetwork) -> ttergm::Result<Box<dyn Predictor>> {
        Err(Error::Estimation("no".into()))
    }
}

fn toy_data() -> TemporalNetwork {
    let terms = [T::Edges, T::Mutual, T::HomophilyInfluencer, T::Stability];
    let spec = common::spec(&terms, &[-1.5, 0.5, 0.3, 1.2]);
    common::simulate(&spec, &Covariates::with_influencers(15, &[0, 1, 2]), 7, 31)
}

fn holdout(data: &TemporalNetwork) -> Vec<String> {
    data.labels().skip(data.len() - 2).map(String::from).collect()
}

fn candidates() -> (TemporalCandidate, BlockCandidate) {
    let sim = McmcConfig { burn_in_sweeps: 10, n_samples: 1, store_graphs: false, ..McmcConfig::default() };
    (
        TemporalCandidate { name: "TERGM".into(), terms: CLASSIC_TERMS.to_vec(), method: FitMethod::Mple, simulation: sim },
        BlockCandidate::default(),
    )
}

#[test]
fn perfect_oracle_has_zero_error() {
    let data = toy_data();
    let observed: Vec<DirectedGraph> = data.snapshots()[data.len() - 2..].iter().map(|s| s.graph.clone()).collect();
    let oracle = OracleCandidate(observed);
    let report = run_holdout(&data, &[&oracle], &EvalConfig { n_runs: 3, ..EvalConfig::new(holdout(&data), 1) }).unwrap();
    assert!(report.cells.iter().all(|c| c.mean_error == 0.0));
    assert_eq!(report.cells.len(), 2 * 4);
}

#[test]
fn report_shape_and_absent_models() {
    let data = toy_data();
    let (tergm, block) = candidates();
    let cfg = EvalConfig { n_runs: 4, ..EvalConfig::new(holdout(&data), 2) };
    let report = run_holdout(&data, &[&tergm, &Failing, &block], &cfg).unwrap();
    assert_eq!(report.models, ["TERGM", "Block Model"]);
    assert_eq!(report.absent.len(), 1);
    assert_eq!(report.absent[0].model, "failing");
    // whole-graph in/out cells: models x months x 2
    let whole = report.cells.iter().filter(|c| matches!(c.metric, Metric::InDegree | Metric::OutDegree)).count();
    assert_eq!(whole, 2 * 2 * 2);
    for c in &report.cells {
        assert!(c.mean_error >= 0.0 && c.runs.len() == 4);
    }
    for p in &report.p_values {
        let v = p.p_value.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + report.cells.len());
}

#[test]
fn holdout_is_deterministic_and_single_runs_skip_tests() {
    let data = toy_data();
    let (tergm, block) = candidates();
    let cfg = EvalConfig { n_runs: 3, ..EvalConfig::new(holdout(&data), 5) };
    let a = run_holdout(&data, &[&tergm, &block], &cfg).unwrap();
    let b = run_holdout(&data, &[&tergm, &block], &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let single = run_holdout(&data, &[&tergm, &block], &EvalConfig { n_runs: 1, ..cfg }).unwrap();
    assert!(single.p_values.iter().all(|p| p.p_value.is_none()));
    assert!(!single.notes.is_empty());
}

#[test]
fn holdout_months_must_be_final() {
    let data = toy_data();
    let (tergm, _) = candidates();
    let first: Vec<String> = data.labels().take(1).map(String::from).collect();
    assert!(run_holdout(&data, &[&tergm], &EvalConfig::new(first, 0)).is_err());
    let middle: Vec<String> = data.labels().skip(2).take(1).map(String::from).collect();
    assert!(run_holdout(&data, &[&tergm], &EvalConfig::new(middle, 0)).is_err());
}

fn event(kind: &str, at: &str, actor: &str, repo: &str) -> String {
    format!(r#"{{"type":"{kind}","created_at":"{at}","actor":{{"id":"{actor}"}},"repo":{{"id":"{repo}"}}}}"#)
}

#[test]
fn ingestion_is_deterministic() {
    let mut lines = Vec::new();
    for i in 0..60 {
        let kind = ["WatchEvent", "PushEvent", "ForkEvent", "IssuesEvent"][i % 4];
        let day = 1 + i % 27;
        let month = 1 + i % 3;
        lines.push(event(kind, &format!("2017-0{month}-{day:02}T0{}:00:00Z", i % 10), &format!("u{}", i % 9), &format!("r{}", i % 5)));
    }
    let text = lines.join("\n");
    let counts: BTreeMap<String, u64> = [("u1", 900), ("u4", 500), ("u7", 700)].into_iter().map(|(u, c)| (u.into(), c)).collect();
    let mut cfg = IngestConfig::new("2017-01", "2017-03");
    cfg.top_k_repos = 3;
    cfg.top_k_influencers = 2;
    let build = || {
        let parsed = parse_event_log(text.as_bytes()).unwrap();
        build_influence_network(&parsed.records, &counts, &cfg).unwrap()
    };
    let (a, b) = (build(), build());
    assert_eq!(a.network, b.network);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_network(&a.network, da.path()).unwrap();
    write_network(&b.network, db.path()).unwrap();
    for rel in ["network.json", "covariates.json", "snapshots/2017-02.edges"] {
        assert_eq!(std::fs::read(da.path().join(rel)).unwrap(), std::fs::read(db.path().join(rel)).unwrap());
    }
    assert_eq!(a.influencers.ids().collect::<Vec<_>>(), ["u1", "u7"]);
    assert_eq!(a.top_repos.len(), 3);
}
