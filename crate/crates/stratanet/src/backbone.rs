//! Noise-corrected backbone: score every directed edge against a
//! strength-preserving null and keep only edges that are significantly
//! heavier than expected.
//!
//! Null model: conditioned on endpoint strengths, edge (i,j) collects each of
//! the W total weight units independently with probability
//! s_out(i)·s_in(j)/W², so its expected weight is ŵ = s_out(i)·s_in(j)/W and
//! its p-value is the upper tail P[X ≥ w] for X ~ Binomial(W, ŵ/W).

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::WeightedDigraph;
use crate::stat::reg_inc_beta;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScore {
    pub src: usize,
    pub dst: usize,
    pub weight: u64,
    pub expected: f64,
    pub p_value: f64,
}

pub const DEFAULT_ALPHA: f64 = 0.1;

/// Upper tail P[X ≥ w] for X ~ Binomial(n, p), exact via the regularized
/// incomplete beta function. For n > 10⁶ the central zone (|w−np|/σ < 8)
/// falls back to a continuity-corrected normal approximation; extreme tails
/// stay exact.
pub fn binomial_upper_tail(w: u64, n: u64, p: f64) -> f64 {
    if w == 0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if p <= 0.0 || w > n {
        return 0.0;
    }
    if n > 1_000_000 {
        let mu = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        if sigma > 0.0 && ((w as f64 - mu) / sigma).abs() < 8.0 {
            return (1.0 - crate::stat::norm_cdf((w as f64 - 0.5 - mu) / sigma)).clamp(0.0, 1.0);
        }
    }
    reg_inc_beta(w as f64, (n - w + 1) as f64, p)
}

/// Score all edges of `g` against the strength-preserving null. Output is in
/// (src, dst) index order regardless of how the map was scheduled.
pub fn score_edges(g: &WeightedDigraph) -> Vec<EdgeScore> {
    let total = g.total_weight();
    if total == 0 {
        return Vec::new();
    }
    let (out_s, in_s) = g.strengths();
    let edges: Vec<(usize, usize, u64)> = g.edges().collect();
    exec::map_slice(&edges, |&(s, d, w)| {
        let expected = out_s[s] as f64 * in_s[d] as f64 / total as f64;
        let p_null = expected / total as f64;
        EdgeScore { src: s, dst: d, weight: w, expected, p_value: binomial_upper_tail(w, total, p_null) }
    })
}

/// Keep edges with p < alpha (strict; ties removed), binarize weights to 1,
/// preserve all vertices.
pub fn extract_backbone(g: &WeightedDigraph, alpha: f64) -> Result<WeightedDigraph> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let kept = score_edges(g)
        .into_iter()
        .filter(|e| e.p_value < alpha)
        .map(|e| ((e.src, e.dst), 1));
    Ok(g.with_edges(kept))
}

/// `backbone_scores.csv` rows: src,dst,weight,expected,p.
pub fn write_scores<W: std::io::Write>(
    g: &WeightedDigraph,
    scores: &[EdgeScore],
    mut w: W,
) -> Result<()> {
    writeln!(w, "src,dst,weight,expected,p")?;
    for e in scores {
        writeln!(
            w,
            "{},{},{},{:.6e},{:.6e}",
            g.name(e.src),
            g.name(e.dst),
            e.weight,
            e.expected,
            e.p_value
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform_below};
    use approx::assert_abs_diff_eq;

    /// Independent oracle: direct log-space summation of the binomial tail.
    fn tail_by_summation(w: u64, n: u64, p: f64) -> f64 {
        use statrs::function::gamma::ln_gamma;
        let ln_c = |n: u64, k: u64| {
            ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
        };
        let terms: Vec<f64> = (w..=n)
            .map(|k| ln_c(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p())
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        terms.iter().map(|t| (t - m).exp()).sum::<f64>() * m.exp()
    }

    // Reference tail values computed with an independent implementation
    // before this module was written.
    #[test]
    fn binomial_tail_reference_points() {
        let cases = [
            (5u64, 2300u64, 100.0 * 100.0 / (2300.0 * 2300.0), 4.3885310917044335e-01),
            (25, 2300, 110.0 * 110.0 / (2300.0 * 2300.0), 4.098966270390894e-10),
            (10, 1000, 6.4e-05, 2.866957122912e-19),
            (1, 400, 0.0004, 1.478834864723e-01),
            (10, 90, 0.01, 2.761501796735e-08),
        ];
        for (w, n, p, want) in cases {
            let got = binomial_upper_tail(w, n, p);
            assert!(
                ((got - want) / want).abs() < 1e-9,
                "tail({w},{n},{p}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn binomial_tail_matches_summation_oracle() {
        let mut rng = stream(21, "binom", 0);
        for _ in 0..40 {
            let n = 50 + uniform_below(&mut rng, 2000);
            let w = 1 + uniform_below(&mut rng, n.min(60));
            let p = (1 + uniform_below(&mut rng, 500)) as f64 / 10_000.0;
            let got = binomial_upper_tail(w, n, p);
            let want = tail_by_summation(w, n, p);
            if want > 1e-280 {
                assert!(
                    ((got - want) / want).abs() < 1e-10,
                    "tail({w},{n},{p}) = {got}, oracle {want}"
                );
            }
        }
    }

    #[test]
    fn binomial_tail_edge_cases_and_monotonicity() {
        assert_eq!(binomial_upper_tail(0, 100, 0.3), 1.0);
        assert_eq!(binomial_upper_tail(5, 100, 1.0), 1.0);
        assert_eq!(binomial_upper_tail(5, 100, 0.0), 0.0);
        // monotone non-increasing in w at fixed null
        let mut prev = 1.0;
        for w in 1..30 {
            let t = binomial_upper_tail(w, 500, 0.02);
            assert!(t <= prev + 1e-15);
            prev = t;
        }
    }

    #[test]
    fn normal_branch_agrees_in_central_zone() {
        // just above the switch: compare against the exact beta evaluation
        let n = 1_000_001u64;
        let p = 0.001;
        let w = 1030u64; // ~1 sigma above the mean
        let approx = binomial_upper_tail(w, n, p);
        let exact = reg_inc_beta(w as f64, (n - w + 1) as f64, p);
        assert!(((approx - exact) / exact).abs() < 2e-3, "{approx} vs {exact}");
    }

    fn complete_graph(n: usize, w: u64) -> WeightedDigraph {
        let mut g = WeightedDigraph::new();
        for i in 0..n {
            g.add_vertex(&format!("v{i}"));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.add_edge(i, j, w);
                }
            }
        }
        g
    }

    #[test]
    fn single_edge_never_significant() {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        g.add_edge(a, b, 9);
        let scores = score_edges(&g);
        assert_eq!(scores.len(), 1);
        assert_abs_diff_eq!(scores[0].expected, 9.0, epsilon = 1e-12);
        assert_eq!(scores[0].p_value, 1.0);
        let bb = extract_backbone(&g, DEFAULT_ALPHA).unwrap();
        assert_eq!(bb.n_edges(), 0);
        assert_eq!(bb.n_vertices(), 2);
    }

    // Reference value for the uniform complete graph computed with an
    // independent binomial-tail evaluation before this module was written.
    #[test]
    fn uniform_complete_graph_backbone_empty() {
        let g = complete_graph(10, 10);
        let scores = score_edges(&g);
        for s in &scores {
            // null expectation 90·90/900 = 9, one unit under the observed 10
            assert_abs_diff_eq!(s.expected, 9.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s.p_value, 0.4125906466208855, epsilon = 1e-9);
        }
        let bb = extract_backbone(&g, DEFAULT_ALPHA).unwrap();
        assert_eq!(bb.n_edges(), 0);
        assert_eq!(bb.n_vertices(), 10);
    }

    #[test]
    fn planted_heavy_edge_detected() {
        // complete noise graph weight 2, one dyad boosted to 20 (~10x expectation)
        let mut g = complete_graph(50, 2);
        let (a, b) = (g.vertex("v0").unwrap(), g.vertex("v1").unwrap());
        let extra = 18;
        g.add_edge(a, b, extra);
        let scores = score_edges(&g);
        let heavy = scores.iter().find(|e| e.src == a && e.dst == b).unwrap();
        assert!(heavy.p_value < 1e-4, "p = {}", heavy.p_value);
        let noise = scores.iter().find(|e| e.src != a || e.dst != b).unwrap();
        assert!(noise.p_value > DEFAULT_ALPHA);
        let bb = extract_backbone(&g, DEFAULT_ALPHA).unwrap();
        assert_eq!(bb.n_edges(), 1);
        assert_eq!(bb.weight(a, b), 1);
    }

    #[test]
    fn backbone_monotone_in_alpha() {
        let mut g = complete_graph(12, 3);
        let mut rng = stream(22, "alpha", 0);
        for _ in 0..25 {
            let i = uniform_below(&mut rng, 12) as usize;
            let j = uniform_below(&mut rng, 12) as usize;
            if i != j {
                g.add_edge(i, j, 1 + uniform_below(&mut rng, 12));
            }
        }
        let mut prev: Option<WeightedDigraph> = None;
        for alpha in [0.001, 0.01, 0.1, 0.5, 1.0] {
            let bb = extract_backbone(&g, alpha).unwrap();
            if let Some(p) = &prev {
                for (s, d, _) in p.edges() {
                    assert!(bb.weight(s, d) > 0, "edge lost when alpha grew");
                }
            }
            prev = Some(bb);
        }
        // alpha = 1.0 keeps everything, binarized
        let all = prev.unwrap();
        assert_eq!(all.n_edges(), g.n_edges());
        assert!(all.edges().all(|(_, _, w)| w == 1));
    }

    #[test]
    fn alpha_validation() {
        let g = complete_graph(3, 1);
        assert!(extract_backbone(&g, 0.0).is_err());
        assert!(extract_backbone(&g, 1.5).is_err());
        let tiny = extract_backbone(&g, 1e-300).unwrap();
        assert_eq!(tiny.n_edges(), 0);
    }

    #[test]
    fn scoring_is_permutation_equivariant() {
        let mut g1 = WeightedDigraph::new();
        for n in ["a", "b", "c", "d"] {
            g1.add_vertex(n);
        }
        let edges = [("a", "b", 4u64), ("b", "c", 2), ("c", "a", 7), ("d", "b", 3)];
        for (s, d, w) in edges {
            let (i, j) = (g1.vertex(s).unwrap(), g1.vertex(d).unwrap());
            g1.add_edge(i, j, w);
        }
        let mut g2 = WeightedDigraph::new();
        for n in ["d", "c", "b", "a"] {
            g2.add_vertex(n);
        }
        for (s, d, w) in edges {
            let (i, j) = (g2.vertex(s).unwrap(), g2.vertex(d).unwrap());
            g2.add_edge(i, j, w);
        }
        let by_name = |g: &WeightedDigraph| -> std::collections::BTreeMap<(String, String), (f64, f64)> {
            score_edges(g)
                .into_iter()
                .map(|e| {
                    ((g.name(e.src).to_string(), g.name(e.dst).to_string()), (e.expected, e.p_value))
                })
                .collect()
        };
        let s1 = by_name(&g1);
        let s2 = by_name(&g2);
        assert_eq!(s1.len(), s2.len());
        for (k, (e1, p1)) in &s1 {
            let (e2, p2) = s2[k];
            assert_abs_diff_eq!(*e1, e2, epsilon = 1e-12);
            assert_abs_diff_eq!(*p1, p2, epsilon = 1e-12);
        }
    }

    #[test]
    fn scores_csv_shape() {
        let g = complete_graph(3, 2);
        let scores = score_edges(&g);
        let mut buf = Vec::new();
        write_scores(&g, &scores, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("src,dst,weight,expected,p"));
        assert_eq!(text.lines().count(), 1 + 6);
    }
}
