//! Bootstrap ensembles: resample a weighted graph's edges i.i.d. from the
//! edge-weight distribution at a fixed total weight ("graph size" = total
//! retweet count, which may be borrowed from another level's graph).

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::WeightedDigraph;
use crate::rng;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_N_SAMPLES: usize = 300;

/// Categorical distribution over directed edges with p_e = w_e / W, kept as
/// integer cumulative weights so draws are exact (no float normalization).
#[derive(Debug, Clone)]
pub struct EdgeDistribution {
    pairs: Vec<(usize, usize)>,
    cum: Vec<u64>,
    total: u64,
}

pub fn edge_distribution(g: &WeightedDigraph) -> Result<EdgeDistribution> {
    let total = g.total_weight();
    if total == 0 {
        return Err(Error::degenerate("cannot resample a graph with zero total weight"));
    }
    let mut pairs = Vec::with_capacity(g.n_edges());
    let mut cum = Vec::with_capacity(g.n_edges());
    let mut acc = 0u64;
    for (s, d, w) in g.edges() {
        acc += w;
        pairs.push((s, d));
        cum.push(acc);
    }
    Ok(EdgeDistribution { pairs, cum, total })
}

impl EdgeDistribution {
    pub fn total_weight(&self) -> u64 {
        self.total
    }

    /// Edge probabilities in (src, dst) order; sums to 1 up to rounding.
    pub fn probabilities(&self) -> Vec<(usize, usize, f64)> {
        let mut prev = 0u64;
        self.pairs
            .iter()
            .zip(&self.cum)
            .map(|(&(s, d), &c)| {
                let p = (c - prev) as f64 / self.total as f64;
                prev = c;
                (s, d, p)
            })
            .collect()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let u = rng::uniform_below(rng, self.total);
        // first index with cum > u
        let i = self.cum.partition_point(|&c| c <= u);
        self.pairs[i]
    }
}

/// Draw `m` edges i.i.d. from `dist`; the sample keeps the source vertex set
/// (isolates included) and has total weight exactly `m`.
pub fn sample_graph(
    source: &WeightedDigraph,
    dist: &EdgeDistribution,
    m: u64,
    rng: &mut ChaCha8Rng,
) -> WeightedDigraph {
    let mut counts: std::collections::BTreeMap<(usize, usize), u64> = std::collections::BTreeMap::new();
    for _ in 0..m {
        *counts.entry(dist.draw(rng)).or_insert(0) += 1;
    }
    source.with_edges(counts)
}

/// `n_samples` independent resamples with per-index seeds derived from
/// `master_seed`; bit-reproducible regardless of thread count.
pub fn ensemble(
    g: &WeightedDigraph,
    m: u64,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<WeightedDigraph>> {
    ensemble_labeled(g, m, n_samples, master_seed, "bootstrap")
}

/// Like [`ensemble`] but with a caller-chosen stream label, so distinct
/// ensembles (e.g. per level) draw from unrelated streams.
pub fn ensemble_labeled(
    g: &WeightedDigraph,
    m: u64,
    n_samples: usize,
    master_seed: u64,
    label: &str,
) -> Result<Vec<WeightedDigraph>> {
    let dist = edge_distribution(g)?;
    Ok(exec::map_indexed(n_samples, |i| {
        let mut rng = rng::stream(master_seed, label, i as u64);
        sample_graph(g, &dist, m, &mut rng)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_edge_graph() -> WeightedDigraph {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        let c = g.add_vertex("c");
        g.add_edge(a, b, 3);
        g.add_edge(b, c, 1);
        g
    }

    #[test]
    fn distribution_simple_ratios() {
        let g = two_edge_graph();
        let d = edge_distribution(&g).unwrap();
        let probs = d.probabilities();
        assert_eq!(probs.len(), 2);
        assert_abs_diff_eq!(probs[0].2, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(probs[1].2, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(probs.iter().map(|p| p.2).sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn distribution_uniform_and_single() {
        let mut g = WeightedDigraph::new();
        for i in 0..5 {
            g.add_vertex(&format!("v{i}"));
        }
        for i in 0..4usize {
            g.add_edge(i, i + 1, 7);
        }
        let probs = edge_distribution(&g).unwrap().probabilities();
        for (_, _, p) in probs {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }

        let mut single = WeightedDigraph::new();
        let a = single.add_vertex("a");
        let b = single.add_vertex("b");
        single.add_edge(a, b, 11);
        assert_eq!(edge_distribution(&single).unwrap().probabilities()[0].2, 1.0);
    }

    #[test]
    fn empty_graph_rejected() {
        let g = WeightedDigraph::new();
        let err = edge_distribution(&g).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sample_point_mass_and_empty() {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        g.add_edge(a, b, 5);
        let dist = edge_distribution(&g).unwrap();
        let mut rng = crate::rng::stream(1, "t", 0);
        let s = sample_graph(&g, &dist, 3, &mut rng);
        assert_eq!(s.weight(a, b), 3);
        assert_eq!(s.total_weight(), 3);
        let empty = sample_graph(&g, &dist, 0, &mut rng);
        assert_eq!(empty.n_edges(), 0);
        assert_eq!(empty.n_vertices(), 2); // vertices retained
    }

    #[test]
    fn monte_carlo_frequency_matches_probability() {
        let g = two_edge_graph();
        let dist = edge_distribution(&g).unwrap();
        let mut rng = crate::rng::stream(7, "mc", 0);
        let mut hits = 0u32;
        for _ in 0..10_000 {
            if dist.draw(&mut rng) == (0, 1) {
                hits += 1;
            }
        }
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.75).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn sample_total_weight_is_exact() {
        let g = two_edge_graph();
        let dist = edge_distribution(&g).unwrap();
        for (i, m) in [(0u64, 1u64), (1, 17), (2, 400), (3, 4001)] {
            let mut rng = crate::rng::stream(3, "w", i);
            let s = sample_graph(&g, &dist, m, &mut rng);
            assert_eq!(s.total_weight(), m);
        }
    }

    #[test]
    fn ensemble_is_deterministic_and_label_sensitive() {
        let g = two_edge_graph();
        let e1 = ensemble(&g, 50, 10, 99).unwrap();
        let e2 = ensemble(&g, 50, 10, 99).unwrap();
        assert_eq!(e1, e2);
        let e3 = ensemble(&g, 50, 10, 100).unwrap();
        assert_ne!(e1, e3);
        let e4 = ensemble_labeled(&g, 50, 10, 99, "other").unwrap();
        assert_ne!(e1, e4);
    }

    #[test]
    fn ensemble_mean_weight_within_four_sigma() {
        let mut g = WeightedDigraph::new();
        for i in 0..4 {
            g.add_vertex(&format!("v{i}"));
        }
        g.add_edge(0, 1, 10);
        g.add_edge(1, 2, 30);
        g.add_edge(2, 3, 60);
        let m = 500u64;
        let n = 400usize;
        let samples = ensemble(&g, m, n, 4242).unwrap();
        for (s, d, w) in g.edges() {
            let p = w as f64 / 100.0;
            let expect = m as f64 * p;
            let sigma_mean = (m as f64 * p * (1.0 - p) / n as f64).sqrt();
            let mean = samples.iter().map(|g2| g2.weight(s, d) as f64).sum::<f64>() / n as f64;
            assert!(
                (mean - expect).abs() < 4.0 * sigma_mean,
                "edge ({s},{d}): mean {mean} vs expect {expect} ± {sigma_mean}"
            );
        }
    }

    #[test]
    fn sample_vertices_subset_of_source() {
        let g = two_edge_graph();
        let samples = ensemble(&g, 20, 5, 1).unwrap();
        for s in samples {
            assert_eq!(s.names(), g.names());
            assert!(s.total_weight() == 20);
        }
    }
}
