//! Exponential random graph models on undirected binary graphs: sufficient
//! statistics, change statistics, maximum pseudolikelihood estimation, Gibbs
//! simulation, and bootstrapped coefficient distributions.
//!
//! Estimation is maximum pseudolikelihood (MPLE): a logistic regression of
//! dyad states on change statistics, which sidesteps the intractable
//! normalizing constant. For dyad-independent models the pseudolikelihood IS
//! the likelihood; with dependent terms (triadic closure) point estimates
//! remain consistent but the per-fit standard errors understate uncertainty,
//! so inference downstream rests on bootstrap distributions rather than on
//! those standard errors.

use crate::blockmodel::SimpleGraph;
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{CollapsedGraph, Sector};
use crate::rng::{self, uniform_f64};
use crate::stat::{quantile, solve_linear};

/// Model terms. `TriadicClosure` counts edges whose endpoints share at least
/// one common neighbor (edgewise shared partners ≥ 1, unweighted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgmTerm {
    Edges,
    /// Number of edge endpoints lying in the sector (each edge contributes
    /// 0, 1 or 2). Include all but one sector to avoid collinearity with
    /// `Edges`.
    SectorActivity(Sector),
    /// Number of edges whose endpoints share a sector.
    SectorHomophily,
    TriadicClosure,
}

impl ErgmTerm {
    pub fn token(self) -> String {
        match self {
            ErgmTerm::Edges => "edges".into(),
            ErgmTerm::SectorActivity(s) => format!("activity_{}", s.token()),
            ErgmTerm::SectorHomophily => "homophily".into(),
            ErgmTerm::TriadicClosure => "closure".into(),
        }
    }
}

/// Result of one pseudolikelihood fit.
#[derive(Debug, Clone)]
pub struct ErgmFit {
    /// Coefficient per term, in term order.
    pub theta: Vec<f64>,
    /// From the inverse Fisher information of the logistic regression; NaN
    /// when the fit did not converge.
    pub standard_errors: Vec<f64>,
    pub log_pseudolikelihood: f64,
    pub converged: bool,
    /// On perfect separation: the unit direction along which the coefficients
    /// diverge.
    pub divergence: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// dense adjacency

/// Bitset adjacency matrix; the representation every dyad-toggling routine
/// works on.
struct Adj {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Adj {
    fn new(n: usize) -> Adj {
        let words = n.div_ceil(64);
        Adj { n, words, rows: vec![0; n * words] }
    }

    fn from_graph(g: &SimpleGraph) -> Adj {
        let mut a = Adj::new(g.n());
        for i in 0..g.n() {
            for &j in g.neighbors(i) {
                if i < j {
                    a.set(i, j);
                }
            }
        }
        a
    }

    fn set(&mut self, i: usize, j: usize) {
        self.rows[i * self.words + j / 64] |= 1 << (j % 64);
        self.rows[j * self.words + i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize, j: usize) {
        self.rows[i * self.words + j / 64] &= !(1 << (j % 64));
        self.rows[j * self.words + i / 64] &= !(1 << (i % 64));
    }

    fn has(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Number of common neighbors of i and j.
    fn common(&self, i: usize, j: usize) -> usize {
        let (ri, rj) = (i * self.words, j * self.words);
        (0..self.words).map(|w| (self.rows[ri + w] & self.rows[rj + w]).count_ones() as usize).sum()
    }

    fn common_vertices(&self, i: usize, j: usize) -> Vec<usize> {
        let (ri, rj) = (i * self.words, j * self.words);
        let mut out = Vec::new();
        for w in 0..self.words {
            let mut bits = self.rows[ri + w] & self.rows[rj + w];
            while bits != 0 {
                out.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        out
    }

    fn to_graph(&self) -> SimpleGraph {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has(i, j) {
                    edges.push((i, j));
                }
            }
        }
        SimpleGraph::from_edges(self.n, edges)
    }
}

// ---------------------------------------------------------------------------
// statistics

fn check_sectors(n: usize, sectors: &[Sector]) -> Result<()> {
    if sectors.len() != n {
        return Err(Error::invalid(format!(
            "sector map covers {} vertices, graph has {n}",
            sectors.len()
        )));
    }
    Ok(())
}

/// Sufficient statistics h(G), one entry per term.
pub fn count_statistics(g: &SimpleGraph, terms: &[ErgmTerm], sectors: &[Sector]) -> Result<Vec<f64>> {
    check_sectors(g.n(), sectors)?;
    let mut h = vec![0.0; terms.len()];
    for i in 0..g.n() {
        for &j in g.neighbors(i) {
            if j <= i {
                continue;
            }
            let shared = common_count(g, i, j) > 0;
            for (t, term) in terms.iter().enumerate() {
                h[t] += match *term {
                    ErgmTerm::Edges => 1.0,
                    ErgmTerm::SectorActivity(s) => {
                        (sectors[i] == s) as u8 as f64 + (sectors[j] == s) as u8 as f64
                    }
                    ErgmTerm::SectorHomophily => (sectors[i] == sectors[j]) as u8 as f64,
                    ErgmTerm::TriadicClosure => shared as u8 as f64,
                };
            }
        }
    }
    Ok(h)
}

/// Common-neighbor count on sorted adjacency lists.
fn common_count(g: &SimpleGraph, i: usize, j: usize) -> usize {
    let (a, b) = (g.neighbors(i), g.neighbors(j));
    let (mut x, mut y, mut c) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                x += 1;
                y += 1;
            }
        }
    }
    c
}

/// Change statistics Δh = h(G + ij) − h(G − ij) for the dyad (i, j),
/// regardless of its current state; when ij is absent this is the cost of
/// toggling it on.
pub fn change_statistics(
    g: &SimpleGraph,
    i: usize,
    j: usize,
    terms: &[ErgmTerm],
    sectors: &[Sector],
) -> Result<Vec<f64>> {
    check_sectors(g.n(), sectors)?;
    if i == j || i >= g.n() || j >= g.n() {
        return Err(Error::invalid(format!("invalid dyad ({i}, {j})")));
    }
    let mut adj = Adj::from_graph(g);
    adj.clear(i, j);
    let mut delta = vec![0.0; terms.len()];
    delta_stats(&adj, i, j, terms, sectors, &mut delta);
    Ok(delta)
}

/// Δh for turning (i, j) on; `adj` must not contain the edge.
fn delta_stats(adj: &Adj, i: usize, j: usize, terms: &[ErgmTerm], sectors: &[Sector], out: &mut [f64]) {
    let mut closure = f64::NAN;
    for (t, term) in terms.iter().enumerate() {
        out[t] = match *term {
            ErgmTerm::Edges => 1.0,
            ErgmTerm::SectorActivity(s) => {
                (sectors[i] == s) as u8 as f64 + (sectors[j] == s) as u8 as f64
            }
            ErgmTerm::SectorHomophily => (sectors[i] == sectors[j]) as u8 as f64,
            ErgmTerm::TriadicClosure => {
                if closure.is_nan() {
                    closure = delta_closure(adj, i, j);
                }
                closure
            }
        };
    }
}

/// The new edge counts once if i and j already share a partner; each existing
/// edge (i, k) or (j, k) with k a common neighbor newly gains the opposite
/// endpoint as a shared partner, and counts if it had none before.
fn delta_closure(adj: &Adj, i: usize, j: usize) -> f64 {
    let shared = adj.common_vertices(i, j);
    let mut d = if shared.is_empty() { 0 } else { 1 };
    for &k in &shared {
        if adj.common(i, k) == 0 {
            d += 1;
        }
        if adj.common(j, k) == 0 {
            d += 1;
        }
    }
    d as f64
}

// ---------------------------------------------------------------------------
// estimation

/// Dyads in lexicographic order with their change statistics (the design
/// matrix) and current states.
fn design(g: &SimpleGraph, terms: &[ErgmTerm], sectors: &[Sector]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut adj = Adj::from_graph(g);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            let present = adj.has(i, j);
            if present {
                adj.clear(i, j);
            }
            let mut row = vec![0.0; terms.len()];
            delta_stats(&adj, i, j, terms, sectors, &mut row);
            if present {
                adj.set(i, j);
            }
            xs.push(row);
            ys.push(present as u8 as f64);
        }
    }
    (xs, ys)
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta.clamp(-30.0, 30.0)).exp())
}

/// Coefficient magnitude past which a fit is declared perfectly separated.
const SEPARATION_CAP: f64 = 20.0;

/// Maximum pseudolikelihood fit via iteratively reweighted least squares.
///
/// Perfect separation (e.g. a complete or empty graph) is reported as a
/// non-converged fit whose `divergence` gives the direction in which the
/// coefficients run away.
pub fn fit_mple(g: &SimpleGraph, terms: &[ErgmTerm], sectors: &[Sector]) -> Result<ErgmFit> {
    check_sectors(g.n(), sectors)?;
    if terms.is_empty() {
        return Err(Error::invalid("ergm needs at least one term"));
    }
    if g.n() < 2 {
        return Err(Error::degenerate("ergm needs at least one dyad"));
    }
    let (xs, ys) = design(g, terms, sectors);
    let k = terms.len();

    let mut beta = vec![0.0; k];
    let mut converged = false;
    let mut separated = false;
    for _ in 0..100 {
        // assemble the weighted normal equations XᵀWX β = XᵀW z
        let mut xtwx = vec![vec![0.0; k]; k];
        let mut xtwz = vec![0.0; k];
        for (x, &y) in xs.iter().zip(&ys) {
            let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let w = (mu * (1.0 - mu)).max(1e-10);
            let z = eta + (y - mu) / w;
            for a in 0..k {
                for b in a..k {
                    xtwx[a][b] += w * x[a] * x[b];
                }
                xtwz[a] += w * x[a] * z;
            }
        }
        for a in 0..k {
            for b in 0..a {
                xtwx[a][b] = xtwx[b][a];
            }
        }
        let next = solve_linear(xtwx, xtwz)
            .ok_or_else(|| Error::degenerate("collinear change statistics"))?;
        let step = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        beta = next;
        if beta.iter().any(|b| b.abs() > SEPARATION_CAP) {
            separated = true;
            break;
        }
        if step < 1e-10 {
            converged = true;
            break;
        }
    }

    let log_pl: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, &y)| {
            let mu = sigmoid(x.iter().zip(&beta).map(|(a, b)| a * b).sum());
            y * mu.max(1e-300).ln() + (1.0 - y) * (1.0 - mu).max(1e-300).ln()
        })
        .sum();

    let divergence = separated.then(|| {
        let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        beta.iter().map(|b| b / norm).collect()
    });

    let standard_errors = if converged {
        standard_errors(&xs, &beta, k)?
    } else {
        vec![f64::NAN; k]
    };

    Ok(ErgmFit { theta: beta, standard_errors, log_pseudolikelihood: log_pl, converged, divergence })
}

/// Square roots of the diagonal of (XᵀWX)⁻¹ at the fitted coefficients.
fn standard_errors(xs: &[Vec<f64>], beta: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut xtwx = vec![vec![0.0; k]; k];
    for x in xs {
        let mu = sigmoid(x.iter().zip(beta).map(|(a, b)| a * b).sum());
        let w = (mu * (1.0 - mu)).max(1e-10);
        for a in 0..k {
            for b in 0..k {
                xtwx[a][b] += w * x[a] * x[b];
            }
        }
    }
    let mut ses = vec![0.0; k];
    for d in 0..k {
        let mut e = vec![0.0; k];
        e[d] = 1.0;
        let col = solve_linear(xtwx.clone(), e)
            .ok_or_else(|| Error::degenerate("singular information matrix"))?;
        ses[d] = col[d].max(0.0).sqrt();
    }
    Ok(ses)
}

// ---------------------------------------------------------------------------
// simulation

/// Gibbs sampler: one sweep updates every dyad once in lexicographic order,
/// drawing its state from the conditional p(on) = σ(θ·Δh). Starts from the
/// empty graph and returns the state after `sweeps` sweeps.
pub fn simulate_ergm(
    theta: &[f64],
    terms: &[ErgmTerm],
    n_vertices: usize,
    sectors: &[Sector],
    seed: u64,
    sweeps: usize,
) -> Result<SimpleGraph> {
    check_sectors(n_vertices, sectors)?;
    if theta.len() != terms.len() {
        return Err(Error::invalid("theta and terms must have equal length"));
    }
    if sweeps == 0 {
        return Err(Error::invalid("sweeps must be >= 1"));
    }
    let mut adj = Adj::new(n_vertices);
    let mut rng = rng::stream(seed, "ergm-gibbs", 0);
    let mut delta = vec![0.0; terms.len()];
    for _ in 0..sweeps {
        for i in 0..n_vertices {
            for j in i + 1..n_vertices {
                if adj.has(i, j) {
                    adj.clear(i, j);
                }
                delta_stats(&adj, i, j, terms, sectors, &mut delta);
                let eta: f64 = delta.iter().zip(theta).map(|(a, b)| a * b).sum();
                if uniform_f64(&mut rng) < sigmoid(eta) {
                    adj.set(i, j);
                }
            }
        }
    }
    Ok(adj.to_graph())
}

// ---------------------------------------------------------------------------
// bootstrap distributions

/// One ensemble sample: either a fit, or the terms whose observed statistics
/// sat on the boundary of their attainable range (making the fit degenerate).
#[derive(Debug, Clone)]
pub struct SampleFit {
    pub sample_id: usize,
    pub fit: Option<ErgmFit>,
    pub degenerate_terms: Vec<ErgmTerm>,
}

/// Per-term empirical distribution over the converged fits.
#[derive(Debug, Clone)]
pub struct TermDistribution {
    pub term: ErgmTerm,
    /// Estimates from converged fits, in sample order.
    pub estimates: Vec<f64>,
    /// 5/25/50/75/95% quantiles.
    pub quantiles: [f64; 5],
    pub flat_and_wide: bool,
}

/// Distributions whose 5–95% spread exceeds this many logit units are flagged
/// as unreasonably flat and wide: healthy bootstrap fits on these graph sizes
/// spread well under 3, while fits dominated by a handful of edges swing by
/// whole logits from sample to sample.
pub const FLAT_WIDE_WIDTH: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct ErgmBootstrap {
    pub samples: Vec<SampleFit>,
    pub n_converged: usize,
    pub distributions: Vec<TermDistribution>,
}

/// Terms whose statistic on `g` sits at the minimum (0) or maximum (the value
/// on the complete graph) it could attain — such a term carries no contrast
/// and its coefficient is not estimable.
pub fn degenerate_terms(g: &SimpleGraph, terms: &[ErgmTerm], sectors: &[Sector]) -> Result<Vec<ErgmTerm>> {
    let h = count_statistics(g, terms, sectors)?;
    let n = g.n();
    let complete = SimpleGraph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))));
    let hmax = count_statistics(&complete, terms, sectors)?;
    Ok(terms
        .iter()
        .zip(h.iter().zip(&hmax))
        .filter(|&(_, (&v, &top))| v <= 0.0 || v >= top)
        .map(|(&t, _)| t)
        .collect())
}

/// Fit every ensemble sample (in parallel) and aggregate per-term coefficient
/// distributions over the converged fits. Degenerate samples are recorded,
/// never dropped; if no sample yields a converged fit the level is too sparse
/// to say anything and that is an error.
pub fn bootstrap_ergm(
    ensemble: &[CollapsedGraph],
    sectors: &[Sector],
    terms: &[ErgmTerm],
) -> Result<ErgmBootstrap> {
    if ensemble.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    for g in ensemble {
        if g.n_vertices() != ensemble[0].n_vertices() {
            return Err(Error::invalid("ensemble graphs disagree on vertex set"));
        }
    }
    check_sectors(ensemble[0].n_vertices(), sectors)?;

    let samples: Vec<SampleFit> = exec::map_indexed(ensemble.len(), |id| {
        let g = SimpleGraph::from_collapsed(&ensemble[id]);
        let degenerate = degenerate_terms(&g, terms, sectors).expect("sector map checked above");
        let fit = if degenerate.is_empty() {
            match fit_mple(&g, terms, sectors) {
                Ok(f) => Some(f),
                Err(Error::Degenerate(_)) => None,
                Err(e) => panic!("ergm fit failed: {e}"),
            }
        } else {
            None
        };
        SampleFit { sample_id: id, fit, degenerate_terms: degenerate }
    });

    let converged: Vec<&ErgmFit> = samples
        .iter()
        .filter_map(|s| s.fit.as_ref())
        .filter(|f| f.converged)
        .collect();
    if converged.is_empty() {
        return Err(Error::degenerate(format!(
            "level too sparse: 0 of {} bootstrap fits converged",
            samples.len()
        )));
    }

    let distributions = terms
        .iter()
        .enumerate()
        .map(|(t, &term)| {
            let estimates: Vec<f64> = converged.iter().map(|f| f.theta[t]).collect();
            let mut sorted = estimates.clone();
            sorted.sort_by(f64::total_cmp);
            let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95].map(|q| quantile(&sorted, q));
            let flat_and_wide = quantiles[4] - quantiles[0] > FLAT_WIDE_WIDTH;
            TermDistribution { term, estimates, quantiles, flat_and_wide }
        })
        .collect();

    let n_converged = converged.len();
    drop(converged);
    Ok(ErgmBootstrap { samples, n_converged, distributions })
}
