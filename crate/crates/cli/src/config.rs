//! JSON run configuration. Relative paths are resolved against the directory
//! holding the config file; outputs echo them as written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttergm::estimation::McmleOptions;
use ttergm::ingest::{DateRange, IngestConfig};
use ttergm::sampler::{McmcConfig, Proposal};
use ttergm::stats::StatisticTerm;
use ttergm::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub log_level: Option<String>,
    #[serde(default)]
    pub ingest: Option<IngestBlock>,
    #[serde(default)]
    pub estimate: Option<EstimateBlock>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub evaluate: Option<EvaluateBlock>,
    /// Directory of the config file; relative paths are resolved against it.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestBlock {
    /// Newline-delimited JSON event log.
    pub events: PathBuf,
    /// `user,followers` CSV; without it no influencers are selected.
    #[serde(default)]
    pub followers: Option<PathBuf>,
    #[serde(default = "default_top_repos")]
    pub top_k_repos: usize,
    #[serde(default = "default_top_influencers")]
    pub top_k_influencers: usize,
    pub date_range: DateRange,
}

fn default_top_repos() -> usize {
    100
}
fn default_top_influencers() -> usize {
    10
}

impl IngestBlock {
    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            top_k_repos: self.top_k_repos,
            top_k_influencers: self.top_k_influencers,
            date_range: self.date_range.clone(),
        }
    }
}

/// Chain settings; the seed comes from the global seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    #[serde(default = "default_burn_in")]
    pub burn_in_sweeps: usize,
    #[serde(default = "default_interval")]
    pub sample_interval_sweeps: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub proposal: Proposal,
}

fn default_burn_in() -> usize {
    20
}
fn default_interval() -> usize {
    1
}
fn default_samples() -> usize {
    200
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { burn_in_sweeps: 20, sample_interval_sweeps: 1, n_samples: 200, proposal: Proposal::GibbsSweep }
    }
}

impl ChainSettings {
    pub fn with_seed(&self, seed: u64, store_graphs: bool) -> McmcConfig {
        McmcConfig {
            burn_in_sweeps: self.burn_in_sweeps,
            sample_interval_sweeps: self.sample_interval_sweeps,
            n_samples: self.n_samples,
            seed,
            proposal: self.proposal,
            store_graphs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitChoice {
    #[serde(rename = "MPLE")]
    Mple,
    #[serde(rename = "MCMLE")]
    Mcmle,
}

/// Model terms: a preset name or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelChoice {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub terms: Option<Vec<StatisticTerm>>,
}

impl ModelChoice {
    pub fn terms(&self) -> Result<Vec<StatisticTerm>> {
        match (&self.preset, &self.terms) {
            (Some(p), None) => Ok(ttergm::baselines::preset(p)?.terms),
            (None, Some(t)) if !t.is_empty() => Ok(t.clone()),
            (None, Some(_)) => Err(Error::Config("terms must not be empty".into())),
            _ => Err(Error::Config("give exactly one of \"preset\" or \"terms\"".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateBlock {
    /// Network directory as written by `ingest`.
    pub network: PathBuf,
    pub model: ModelChoice,
    #[serde(default = "default_fit")]
    pub method: FitChoice,
    #[serde(default)]
    pub mcmc: ChainSettings,
    #[serde(default = "default_outer")]
    pub max_outer: usize,
    /// Bootstrap replicates for MPLE standard errors; 0 disables.
    #[serde(default)]
    pub bootstrap: usize,
    /// Drop repository nodes before fitting.
    #[serde(default)]
    pub user_projection: bool,
}

fn default_fit() -> FitChoice {
    FitChoice::Mple
}
fn default_outer() -> usize {
    10
}

impl EstimateBlock {
    pub fn mcmle_options(&self, seed: u64) -> McmleOptions {
        McmleOptions::new(self.mcmc.with_seed(seed, false), self.max_outer)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub network: PathBuf,
    /// `estimate.json` from the estimate stage.
    pub estimate: PathBuf,
    pub horizon: usize,
    #[serde(default)]
    pub mcmc: ChainSettings,
    /// Also draw this many graphs conditioned on the last snapshot and
    /// export their statistics.
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub user_projection: bool,
    /// Overrides the global seed for this stage.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateBlock {
    pub network: PathBuf,
    pub holdout: Vec<String>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories_per_run: usize,
    #[serde(default = "default_fit")]
    pub method: FitChoice,
    #[serde(default = "default_outer")]
    pub max_outer: usize,
    /// Chain settings for MCMLE fitting.
    #[serde(default)]
    pub mcmc: ChainSettings,
    /// Burn-in sweeps per forecast step.
    #[serde(default = "default_burn_in")]
    pub simulation_sweeps: usize,
    #[serde(default)]
    pub user_projection: bool,
}

fn default_runs() -> usize {
    30
}
fn default_trajectories() -> usize {
    1
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} {} does not exist", path.display()),
        )))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// `p` relative to the config file.
    pub fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.path(p))
    }

    pub fn ingest(&self) -> Result<&IngestBlock> {
        let b = self.ingest.as_ref().ok_or_else(|| Error::Config("config has no \"ingest\" block".into()))?;
        b.ingest_config().months()?;
        require(&self.path(&b.events), "event log")?;
        if let Some(f) = &b.followers {
            require(&self.path(f), "follower counts")?;
        }
        Ok(b)
    }

    pub fn estimate(&self) -> Result<&EstimateBlock> {
        let b = self.estimate.as_ref().ok_or_else(|| Error::Config("config has no \"estimate\" block".into()))?;
        b.model.terms()?;
        if b.method == FitChoice::Mcmle {
            b.mcmle_options(0).mcmc.validate()?;
        }
        require(&self.path(&b.network), "network directory")?;
        Ok(b)
    }

    pub fn simulate(&self) -> Result<&SimulateBlock> {
        let b = self.simulate.as_ref().ok_or_else(|| Error::Config("config has no \"simulate\" block".into()))?;
        if b.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        b.mcmc.with_seed(0, false).validate()?;
        require(&self.path(&b.network), "network directory")?;
        require(&self.path(&b.estimate), "estimate file")?;
        Ok(b)
    }

    pub fn evaluate(&self) -> Result<&EvaluateBlock> {
        let b = self.evaluate.as_ref().ok_or_else(|| Error::Config("config has no \"evaluate\" block".into()))?;
        if b.holdout.is_empty() || b.n_runs == 0 || b.trajectories_per_run == 0 || b.simulation_sweeps == 0 {
            return Err(Error::Config("evaluate needs holdout months and positive run counts".into()));
        }
        require(&self.path(&b.network), "network directory")?;
        Ok(b)
    }
}
