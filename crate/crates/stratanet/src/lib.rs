//! Level-stratified analysis of retweet networks: ingestion, temporal profiles,
//! noise-corrected backbones, bootstrap ensembles, degree-corrected blockmodels
//! and exponential random graph models, with a file-composable CLI on top.
//!
//! Graphs are immutable once built; every stochastic routine takes an explicit
//! seed and derives per-task streams from it, so results are reproducible
//! bit-for-bit regardless of thread count (see [`rng`] and [`exec`]).

pub mod backbone;
pub mod blockmodel;
pub mod bootstrap;
pub mod cli;
pub mod config;
pub mod ergm;
pub mod error;
pub mod exec;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod rng;
pub mod stat;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
