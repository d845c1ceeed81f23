//! Flat degree-corrected stochastic blockmodel with an MDL objective,
//! merge-split MCMC inference, and reduced mutual information for comparing
//! partitions.

mod dl;
mod mcmc;
mod rmi;

pub use dl::description_length;
pub use mcmc::{fit_sbm, fit_sbm_multistart, SbmConfig, SbmFit};
pub use rmi::{log_omega, mutual_information, rmi, RmiResult};

use crate::graph::{CollapsedGraph, WeightedDigraph};

/// Undirected binary graph as sorted neighbor lists; the form every
/// blockmodel routine operates on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    adj: Vec<Vec<usize>>,
    m: usize,
}

impl SimpleGraph {
    /// Deduplicates edges, ignores self-loops.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> SimpleGraph {
        let mut set = std::collections::BTreeSet::new();
        for (a, b) in edges {
            assert!(a < n && b < n, "edge endpoint out of range");
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &set {
            adj[a].push(b);
            adj[b].push(a);
        }
        SimpleGraph { adj, m: set.len() }
    }

    pub fn from_collapsed(g: &CollapsedGraph) -> SimpleGraph {
        SimpleGraph::from_edges(g.n_vertices(), g.edges())
    }

    /// Binary undirected view of a weighted digraph.
    pub fn from_weighted(g: &WeightedDigraph) -> SimpleGraph {
        SimpleGraph::from_edges(g.n_vertices(), g.undirected_weights().into_keys())
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}
