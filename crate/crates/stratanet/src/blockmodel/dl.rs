//! Description length of a partition under the flat microcanonical
//! degree-corrected SBM, in nats.
//!
//! With block sizes n_r, block degree sums e_r, inter-block edge counts m_rs
//! (m_rr counting internal edges once) and vertex degrees k_i:
//!
//!   −ln P(A|k,e,b) = Σ_r ln e_r! − Σ_{r<s} ln m_rs! − Σ_r (ln m_rr! + m_rr ln 2) − Σ_i ln k_i!
//!   −ln P(k|e,b)   = Σ_r ln C(n_r + e_r − 1, e_r)
//!   −ln P(e|b)     = ln C(B(B+1)/2 + E − 1, E)
//!   −ln P(b)       = ln B! + ln S(N, B) + ln N
//!
//! The partition prior is uniform over the B!·S(N,B) surjective assignments
//! of N vertices onto B labeled blocks (S is the Stirling number of the
//! second kind), with a uniform prior on the block count itself. An empty
//! graph under one block costs exactly ln N: only the block-count prior
//! survives.

use super::SimpleGraph;
use crate::graph::Partition;
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;

/// Log-factorial lookup table.
pub(crate) struct LnFact(Vec<f64>);

impl LnFact {
    pub fn new(max: usize) -> LnFact {
        let mut t = Vec::with_capacity(max + 1);
        for i in 0..=max {
            t.push(ln_gamma(i as f64 + 1.0));
        }
        LnFact(t)
    }

    #[inline]
    pub fn f(&self, n: u64) -> f64 {
        self.0[n as usize]
    }

    #[inline]
    pub fn ln_choose(&self, n: u64, k: u64) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.f(n) - self.f(k) - self.f(n - k)
    }
}

#[inline]
fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Lookup tables shared by every description-length evaluation for one graph:
/// log-factorials and the row ln S(N, ·) of Stirling numbers of the second
/// kind.
pub(crate) struct Tables {
    pub lf: LnFact,
    ln_s2: Vec<f64>,
}

impl Tables {
    pub fn new(n: usize, m: usize) -> Tables {
        // covers every index the DL terms can touch: pair-count prior,
        // degree sums, factorials of counts
        let lf = LnFact::new(n * (n + 1) / 2 + 2 * m + n + 2);
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        row[0] = 0.0;
        for size in 1..=n {
            for b in (1..=size).rev() {
                row[b] = ln_add((b as f64).ln() + row[b], row[b - 1]);
            }
            row[0] = f64::NEG_INFINITY;
        }
        Tables { lf, ln_s2: row }
    }

    /// ln S(N, b) for the N this table was built for.
    #[inline]
    pub fn ln_s2(&self, b: usize) -> f64 {
        self.ln_s2[b]
    }
}

/// Block-level counts backing the DL terms.
pub(crate) struct BlockCounts {
    pub n_r: Vec<u64>,
    pub e_r: Vec<u64>,
    /// (r ≤ s) → edge count; (r, r) counts internal edges once.
    pub m: BTreeMap<(u32, u32), u64>,
}

pub(crate) fn block_counts(g: &SimpleGraph, assignment: &[u32], b_count: usize) -> BlockCounts {
    let mut n_r = vec![0u64; b_count];
    let mut e_r = vec![0u64; b_count];
    let mut m: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (v, &bv) in assignment.iter().enumerate() {
        n_r[bv as usize] += 1;
        e_r[bv as usize] += g.degree(v) as u64;
        for &u in g.neighbors(v) {
            if u > v {
                let (x, y) = (bv.min(assignment[u]), bv.max(assignment[u]));
                *m.entry((x, y)).or_insert(0) += 1;
            }
        }
    }
    BlockCounts { n_r, e_r, m }
}

#[inline]
pub(crate) fn pair_term(lf: &LnFact, r: u32, s: u32, count: u64) -> f64 {
    if r == s {
        -(lf.f(count) + count as f64 * std::f64::consts::LN_2)
    } else {
        -lf.f(count)
    }
}

pub(crate) fn dl_from_counts(
    g: &SimpleGraph,
    t: &Tables,
    counts: &BlockCounts,
    b_count: usize,
) -> f64 {
    let e_total = g.m() as u64;
    let b = b_count as u64;

    let mut dl = 0.0;
    // −ln P(A | k, e, b)
    for &e_r in &counts.e_r {
        dl += t.lf.f(e_r);
    }
    for (&(r, s), &cnt) in &counts.m {
        dl += pair_term(&t.lf, r, s, cnt);
    }
    for v in 0..g.n() {
        dl -= t.lf.f(g.degree(v) as u64);
    }
    // −ln P(k | e, b)
    for r in 0..b_count {
        dl += t
            .lf
            .ln_choose(counts.n_r[r] + counts.e_r[r].saturating_sub(1), counts.e_r[r]);
    }
    // −ln P(e | b)
    dl += t.lf.ln_choose(b * (b + 1) / 2 + e_total - 1, e_total);
    // −ln P(b)
    dl += t.lf.f(b) + t.ln_s2(b_count) + (g.n() as f64).ln();
    dl
}

/// Description length (nats) of `partition` for `g`, computed from scratch.
pub fn description_length(g: &SimpleGraph, partition: &Partition) -> f64 {
    assert_eq!(partition.n(), g.n(), "partition size mismatch");
    assert!(g.n() >= 1);
    let t = Tables::new(g.n(), g.m());
    let counts = block_counts(g, partition.assignment(), partition.block_count());
    dl_from_counts(g, &t, &counts, partition.block_count())
}
