//! Merge-split MCMC minimization of the partition description length.
//!
//! Vertex moves keep the block count fixed and update the description length
//! incrementally; merges and splits change the block count and are scored by
//! rebuilding the candidate from scratch. The sampler runs at inverse
//! temperature `beta` and switches to greedy (downhill-only) acceptance for
//! the tail of the run. The best partition seen anywhere along the chain is
//! returned, so the procedure is an optimizer rather than a posterior sampler.

use super::dl::{block_counts, dl_from_counts, pair_term, Tables};
use super::SimpleGraph;
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::Partition;
use crate::rng::{stream, uniform_below, uniform_f64};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SbmConfig {
    /// One sweep = one move proposal per vertex plus one merge and one split.
    pub n_sweeps: usize,
    pub beta: f64,
    /// Fraction of sweeps after which acceptance becomes downhill-only.
    pub greedy_after: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> SbmConfig {
        SbmConfig { n_sweeps: 10_000, beta: 1.0, greedy_after: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SbmFit {
    pub partition: Partition,
    pub description_length: f64,
    /// Description length at the end of each sweep.
    pub trace: Vec<f64>,
    pub sweeps_run: usize,
}

#[inline]
fn pair(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

struct State {
    assignment: Vec<u32>,
    n_r: Vec<u64>,
    e_r: Vec<u64>,
    m: BTreeMap<(u32, u32), u64>,
    dl: f64,
}

impl State {
    fn new(g: &SimpleGraph, t: &Tables, labels: &[u32]) -> State {
        let p = Partition::from_labels(labels);
        let counts = block_counts(g, p.assignment(), p.block_count());
        let dl = dl_from_counts(g, t, &counts, p.block_count());
        State {
            assignment: p.assignment().to_vec(),
            n_r: counts.n_r,
            e_r: counts.e_r,
            m: counts.m,
            dl,
        }
    }

    fn b_count(&self) -> usize {
        self.n_r.len()
    }

    /// Change in description length if vertex `v` moves to block `s`.
    /// Requires `s != block(v)` and the source block to keep ≥ 1 vertex, so
    /// the block count — and with it the partition and edge-count priors —
    /// is unchanged.
    fn delta_move(&self, g: &SimpleGraph, t: &Tables, v: usize, s: u32) -> f64 {
        let r = self.assignment[v];
        debug_assert!(r != s && self.n_r[r as usize] >= 2);
        let k_v = g.degree(v) as u64;

        let mut c: BTreeMap<u32, u64> = BTreeMap::new();
        for &u in g.neighbors(v) {
            *c.entry(self.assignment[u]).or_insert(0) += 1;
        }
        // snapshot every pair count the move can touch
        let mut touched: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for &b in c.keys() {
            for a in [r, s] {
                let key = pair(a, b);
                touched
                    .entry(key)
                    .or_insert_with(|| self.m.get(&key).copied().unwrap_or(0));
            }
        }

        let (rn, sn) = (r as usize, s as usize);
        let mut old = 0.0;
        for (&(a, b), &cnt) in &touched {
            old += pair_term(&t.lf, a, b, cnt);
        }
        old += t.lf.f(self.e_r[rn]) + t.lf.f(self.e_r[sn]);
        old += t.lf.ln_choose(self.n_r[rn] + self.e_r[rn] - 1, self.e_r[rn]);
        old += t.lf.ln_choose(self.n_r[sn] + self.e_r[sn] - 1, self.e_r[sn]);

        for (&b, &c_b) in &c {
            *touched.get_mut(&pair(r, b)).unwrap() -= c_b;
            *touched.get_mut(&pair(s, b)).unwrap() += c_b;
        }
        let (nr, ns) = (self.n_r[rn] - 1, self.n_r[sn] + 1);
        let (er, es) = (self.e_r[rn] - k_v, self.e_r[sn] + k_v);

        let mut new = 0.0;
        for (&(a, b), &cnt) in &touched {
            new += pair_term(&t.lf, a, b, cnt);
        }
        new += t.lf.f(er) + t.lf.f(es);
        new += t.lf.ln_choose(nr + er - 1, er);
        new += t.lf.ln_choose(ns + es - 1, es);

        new - old
    }

    fn apply_move(&mut self, g: &SimpleGraph, v: usize, s: u32, delta: f64) {
        let r = self.assignment[v];
        let k_v = g.degree(v) as u64;
        let mut c: BTreeMap<u32, u64> = BTreeMap::new();
        for &u in g.neighbors(v) {
            *c.entry(self.assignment[u]).or_insert(0) += 1;
        }
        for (&t, &c_t) in &c {
            let key = pair(r, t);
            let e = self.m.get_mut(&key).unwrap();
            *e -= c_t;
            if *e == 0 {
                self.m.remove(&key);
            }
            *self.m.entry(pair(s, t)).or_insert(0) += c_t;
        }
        self.n_r[r as usize] -= 1;
        self.n_r[s as usize] += 1;
        self.e_r[r as usize] -= k_v;
        self.e_r[s as usize] += k_v;
        self.assignment[v] = s;
        self.dl += delta;
    }
}

fn accept(delta: f64, beta: f64, greedy: bool, rng: &mut ChaCha8Rng) -> bool {
    if greedy {
        delta < 0.0
    } else {
        delta <= 0.0 || uniform_f64(rng) < (-beta * delta).exp()
    }
}

/// Candidate labels after merging block `s` into block `r`.
fn merge_labels(state: &State, r: u32, s: u32) -> Vec<u32> {
    state
        .assignment
        .iter()
        .map(|&b| if b == s { r } else { b })
        .collect()
}

/// Candidate labels after splitting block `r` by one sweep of 2-means on
/// adjacency rows, seeded from two random members. Returns `None` when the
/// split leaves a side empty (cannot happen with distinct seeds) or `r` has
/// fewer than two vertices.
fn split_labels(
    state: &State,
    g: &SimpleGraph,
    r: u32,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<u32>> {
    let members: Vec<usize> = (0..g.n()).filter(|&v| state.assignment[v] == r).collect();
    if members.len() < 2 {
        return None;
    }
    let a = members[uniform_below(rng, members.len() as u64) as usize];
    let b = loop {
        let b = members[uniform_below(rng, members.len() as u64) as usize];
        if b != a {
            break b;
        }
    };
    let new_id = state.b_count() as u32;
    let mut labels = state.assignment.clone();
    for &v in &members {
        let side_b = if v == a {
            false
        } else if v == b {
            true
        } else {
            let sa = row_similarity(g, v, a);
            let sb = row_similarity(g, v, b);
            sa < sb || (sa == sb && uniform_below(rng, 2) == 1)
        };
        if side_b {
            labels[v] = new_id;
        }
    }
    Some(labels)
}

/// Shared-neighbor count plus direct adjacency: similarity of the adjacency
/// rows of `v` and `c`.
fn row_similarity(g: &SimpleGraph, v: usize, c: usize) -> u64 {
    let (mut i, mut j) = (0, 0);
    let (nv, nc) = (g.neighbors(v), g.neighbors(c));
    let mut shared = 0u64;
    while i < nv.len() && j < nc.len() {
        match nv[i].cmp(&nc[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared + g.has_edge(v, c) as u64
}

/// Minimize the description length of `g` over partitions by merge-split
/// MCMC, starting from a single block.
pub fn fit_sbm(g: &SimpleGraph, config: &SbmConfig) -> Result<SbmFit> {
    if g.n() == 0 {
        return Err(Error::Invalid("blockmodel fit requires a non-empty vertex set".into()));
    }
    if config.n_sweeps == 0 {
        return Err(Error::Invalid("n_sweeps must be positive".into()));
    }
    if !(config.beta > 0.0) || !(0.0..=1.0).contains(&config.greedy_after) {
        return Err(Error::Invalid("beta must be positive and greedy_after in [0, 1]".into()));
    }
    let n = g.n();
    let t = Tables::new(n, g.m());
    let mut rng = stream(config.seed, "sbm-chain", 0);
    let mut state = State::new(g, &t, &vec![0; n]);
    let mut best = (state.dl, state.assignment.clone());
    let mut trace = Vec::with_capacity(config.n_sweeps);
    let greedy_from = (config.n_sweeps as f64 * config.greedy_after).floor() as usize;

    for sweep in 0..config.n_sweeps {
        let greedy = sweep >= greedy_from;
        for _ in 0..n {
            if state.b_count() < 2 {
                break;
            }
            let v = uniform_below(&mut rng, n as u64) as usize;
            let r = state.assignment[v];
            if state.n_r[r as usize] < 2 {
                continue;
            }
            let pick = uniform_below(&mut rng, state.b_count() as u64 - 1) as u32;
            let s = if pick >= r { pick + 1 } else { pick };
            let delta = state.delta_move(g, &t, v, s);
            if accept(delta, config.beta, greedy, &mut rng) {
                state.apply_move(g, v, s, delta);
            }
        }
        if state.b_count() >= 2 {
            let r = uniform_below(&mut rng, state.b_count() as u64) as u32;
            let pick = uniform_below(&mut rng, state.b_count() as u64 - 1) as u32;
            let s = if pick >= r { pick + 1 } else { pick };
            let labels = merge_labels(&state, r, s);
            consider_rebuild(g, &t, &mut state, labels, config.beta, greedy, &mut rng);
        }
        {
            let r = uniform_below(&mut rng, state.b_count() as u64) as u32;
            if let Some(labels) = split_labels(&state, g, r, &mut rng) {
                consider_rebuild(g, &t, &mut state, labels, config.beta, greedy, &mut rng);
            }
        }
        if state.dl < best.0 {
            best = (state.dl, state.assignment.clone());
        }
        trace.push(state.dl);
    }

    // a fresh recomputation guards the result against incremental drift
    let partition = Partition::from_labels(&best.1);
    let counts = block_counts(g, partition.assignment(), partition.block_count());
    let description_length = dl_from_counts(g, &t, &counts, partition.block_count());
    Ok(SbmFit { partition, description_length, trace, sweeps_run: config.n_sweeps })
}

fn consider_rebuild(
    g: &SimpleGraph,
    t: &Tables,
    state: &mut State,
    labels: Vec<u32>,
    beta: f64,
    greedy: bool,
    rng: &mut ChaCha8Rng,
) {
    let cand = State::new(g, t, &labels);
    let delta = cand.dl - state.dl;
    if accept(delta, beta, greedy, rng) {
        *state = cand;
    }
}

/// Run independent chains with derived seeds and keep the best fit.
pub fn fit_sbm_multistart(g: &SimpleGraph, config: &SbmConfig, n_chains: usize) -> Result<SbmFit> {
    if n_chains == 0 {
        return Err(Error::Invalid("n_chains must be positive".into()));
    }
    let fits = exec::map_indexed(n_chains, |i| {
        let mut chain = config.clone();
        chain.seed = stream(config.seed, "sbm-multistart", i as u64).next_u64();
        fit_sbm(g, &chain)
    });
    let mut best: Option<SbmFit> = None;
    for fit in fits {
        let fit = fit?;
        if best
            .as_ref()
            .is_none_or(|b| fit.description_length < b.description_length)
        {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::super::dl::description_length;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_cliques(k: usize) -> SimpleGraph {
        let mut edges = Vec::new();
        for base in [0, k] {
            for i in 0..k {
                for j in (i + 1)..k {
                    edges.push((base + i, base + j));
                }
            }
        }
        SimpleGraph::from_edges(2 * k, edges)
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> SimpleGraph {
        let mut rng = stream(11, "gnp", seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if uniform_f64(&mut rng) < p {
                    edges.push((i, j));
                }
            }
        }
        SimpleGraph::from_edges(n, edges)
    }

    #[test]
    fn incremental_delta_matches_scratch_recomputation() {
        let g = random_graph(40, 0.15, 3);
        let t = Tables::new(g.n(), g.m());
        let labels: Vec<u32> = (0..40).map(|v| (v % 4) as u32).collect();
        let mut state = State::new(&g, &t, &labels);
        let mut rng = stream(5, "moves", 0);
        let mut applied = 0;
        while applied < 200 {
            let v = uniform_below(&mut rng, 40) as usize;
            let r = state.assignment[v];
            if state.n_r[r as usize] < 2 {
                continue;
            }
            let pick = uniform_below(&mut rng, state.b_count() as u64 - 1) as u32;
            let s = if pick >= r { pick + 1 } else { pick };
            let delta = state.delta_move(&g, &t, v, s);
            state.apply_move(&g, v, s, delta);
            applied += 1;
        }
        let scratch = description_length(&g, &Partition::from_labels(&state.assignment));
        assert_abs_diff_eq!(state.dl, scratch, epsilon = 1e-9 * scratch.abs());
    }

    #[test]
    fn recovers_two_cliques() {
        let g = two_cliques(10);
        let fit = fit_sbm(&g, &SbmConfig { n_sweeps: 300, seed: 42, ..Default::default() })
            .unwrap();
        assert_eq!(fit.partition.block_count(), 2);
        let a = fit.partition.block_of(0);
        for v in 0..10 {
            assert_eq!(fit.partition.block_of(v), a);
        }
        let b = fit.partition.block_of(10);
        assert_ne!(a, b);
        for v in 10..20 {
            assert_eq!(fit.partition.block_of(v), b);
        }
        assert_abs_diff_eq!(
            fit.description_length,
            description_length(&g, &fit.partition),
            epsilon = 1e-9
        );
    }

    #[test]
    fn empty_graph_stays_single_block() {
        let g = SimpleGraph::from_edges(7, []);
        let fit = fit_sbm(&g, &SbmConfig { n_sweeps: 50, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(fit.partition.block_count(), 1);
        assert_abs_diff_eq!(fit.description_length, (7f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn same_seed_reproduces_fit() {
        let g = random_graph(30, 0.2, 9);
        let cfg = SbmConfig { n_sweeps: 120, seed: 77, ..Default::default() };
        let a = fit_sbm(&g, &cfg).unwrap();
        let b = fit_sbm(&g, &cfg).unwrap();
        assert_eq!(a.partition.assignment(), b.partition.assignment());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.description_length, b.description_length);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let g = SimpleGraph::from_edges(0, []);
        assert!(fit_sbm(&g, &SbmConfig::default()).is_err());
        let g = two_cliques(3);
        assert!(fit_sbm(&g, &SbmConfig { n_sweeps: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn multistart_is_deterministic_and_no_worse_than_single() {
        let g = two_cliques(8);
        let cfg = SbmConfig { n_sweeps: 60, seed: 5, ..Default::default() };
        let single = fit_sbm(&g, &cfg).unwrap();
        let multi = fit_sbm_multistart(&g, &cfg, 4).unwrap();
        let multi2 = fit_sbm_multistart(&g, &cfg, 4).unwrap();
        assert_eq!(multi.partition.assignment(), multi2.partition.assignment());
        assert!(multi.description_length <= single.description_length + 1e-9);
    }

    #[test]
    fn trace_has_one_entry_per_sweep() {
        let g = two_cliques(4);
        let fit = fit_sbm(&g, &SbmConfig { n_sweeps: 25, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(fit.trace.len(), 25);
        assert_eq!(fit.sweeps_run, 25);
    }
}
