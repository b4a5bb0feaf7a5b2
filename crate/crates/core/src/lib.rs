//! Temporal exponential random graph models with triadic influencer terms.
//!
//! The crate covers the full modelling loop: graph and temporal-network
//! representations ([`graph`]), sufficient and change statistics ([`stats`]),
//! MCMC simulation ([`sampler`]), pseudolikelihood and Monte Carlo maximum
//! likelihood fitting ([`estimation`]), block-model and classic TERGM
//! baselines ([`baselines`]), event-log ingestion ([`ingest`]) and the
//! out-of-sample degree-error protocol ([`eval`]).

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod io;
pub mod month;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Covariates, DirectedGraph, NodeCovariates, NodeId, NodeKind, Snapshot, TemporalNetwork};
pub use stats::{ModelSpec, StatisticTerm, StatisticVector};
