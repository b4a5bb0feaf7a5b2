//! Comparison models: a two-block stochastic block model keyed on the
//! influencer covariate, and the classic TERGM / TTERGM term presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dyads, Covariates, DirectedGraph, TemporalNetwork};
use crate::rng::derive_seed;
use crate::stats::{ModelSpec, StatisticTerm};

pub const FOLLOWER_BLOCK: usize = 0;
pub const INFLUENCER_BLOCK: usize = 1;

/// Independent-dyad block model with directed block-pair rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockModel {
    pub block_of: Vec<usize>,
    /// `p[a][b]`: probability of an edge from a block-`a` node to a block-`b` node.
    pub p: Vec<Vec<f64>>,
    /// Block pairs with no possible dyads; their rates are 0.
    #[serde(default)]
    pub empty_cells: Vec<(usize, usize)>,
}

impl BlockModel {
    pub fn validate(&self) -> Result<()> {
        let k = self.p.len();
        if self.p.iter().any(|row| row.len() != k) {
            return Err(Error::Data("block rate matrix must be square".into()));
        }
        if self.block_of.iter().any(|&b| b >= k) {
            return Err(Error::Data("node assigned to a nonexistent block".into()));
        }
        if self.p.iter().flatten().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Data("block rates must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.block_of.len()
    }

    pub fn rate(&self, a: usize, b: usize) -> f64 {
        self.p[a][b]
    }
}

fn blocks_of(cov: &Covariates) -> Vec<usize> {
    cov.as_slice()
        .iter()
        .map(|c| if c.is_influencer { INFLUENCER_BLOCK } else { FOLLOWER_BLOCK })
        .collect()
}

/// Pooled Bernoulli MLE over the target snapshots of every transition
/// (all snapshots when there is only one).
pub fn fit_block_model(data: &TemporalNetwork) -> Result<BlockModel> {
    let targets: Vec<&DirectedGraph> = if data.len() >= 2 {
        data.snapshots()[1..].iter().map(|s| &s.graph).collect()
    } else {
        data.snapshots().iter().map(|s| &s.graph).collect()
    };
    if targets.is_empty() {
        return Err(Error::Data("no snapshots to fit".into()));
    }
    let block_of = blocks_of(data.covariates());
    let mut size = [0usize; 2];
    for &b in &block_of {
        size[b] += 1;
    }
    let mut edges = [[0usize; 2]; 2];
    for g in &targets {
        for (u, v) in g.edges() {
            edges[block_of[u.index()]][block_of[v.index()]] += 1;
        }
    }
    let mut p = vec![vec![0.0; 2]; 2];
    let mut empty_cells = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let possible = if a == b { size[a] * size[a].saturating_sub(1) } else { size[a] * size[b] };
            if possible == 0 {
                empty_cells.push((a, b));
            } else {
                p[a][b] = edges[a][b] as f64 / (possible * targets.len()) as f64;
            }
        }
    }
    Ok(BlockModel { block_of, p, empty_cells })
}

/// Independent draws; sample `i` uses its own derived stream.
pub fn sample_block_model(m: &BlockModel, n_samples: usize, seed: u64) -> Result<Vec<DirectedGraph>> {
    m.validate()?;
    let n = m.node_count();
    Ok((0..n_samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "block", i as u64));
            let mut g = DirectedGraph::empty(n);
            for (u, v) in dyads(n) {
                let rate = m.p[m.block_of[u.index()]][m.block_of[v.index()]];
                if rng.random::<f64>() < rate {
                    g.set_unchecked(u, v, true);
                }
            }
            g
        })
        .collect())
}

pub const CLASSIC_TERMS: [StatisticTerm; 5] = [
    StatisticTerm::Edges,
    StatisticTerm::Mutual,
    StatisticTerm::TransitiveTriads,
    StatisticTerm::HomophilyInfluencer,
    StatisticTerm::Stability,
];

pub const TRIADIC_TERMS: [StatisticTerm; 4] = [
    StatisticTerm::TriadicDirectLinks,
    StatisticTerm::TriadicPath2,
    StatisticTerm::TriadicPath3,
    StatisticTerm::InfluencerTriangle,
];

/// Classic TERGM preset, zero coefficients.
pub fn classic_tergm_spec() -> ModelSpec {
    ModelSpec::zeros(CLASSIC_TERMS.to_vec())
}

/// Classic preset followed by the triadic influencer terms.
pub fn ttergm_spec() -> ModelSpec {
    ModelSpec::zeros(CLASSIC_TERMS.iter().chain(&TRIADIC_TERMS).copied().collect())
}

/// Resolves a preset by its configuration name.
pub fn preset(name: &str) -> Result<ModelSpec> {
    match name {
        "classic-tergm" => Ok(classic_tergm_spec()),
        "ttergm" => Ok(ttergm_spec()),
        other => Err(Error::Config(format!("unknown preset {other:?}; expected \"classic-tergm\" or \"ttergm\""))),
    }
}
