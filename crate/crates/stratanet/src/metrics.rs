//! Structural descriptives: level mixing matrices, within-organization edge
//! densities, and topological neighborhood overlaps (weighted and unweighted).

use crate::error::{Error, Result};
use crate::graph::{Level, WeightedDigraph};
use crate::ingest::Roster;
use std::collections::{BTreeMap, BTreeSet};

/// Directed edge probabilities between levels. `probs[a][b]` is None when
/// level a or b has no roster accounts (denominator undefined).
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub counts: [[u64; 4]; 4],
    pub probs: [[Option<f64>; 4]; 4],
    pub level_sizes: [usize; 4],
}

/// Count binary directed edges per ordered level pair and normalize by the
/// number of directed dyads: n_a·n_b off-diagonal, n_a(n_a−1) on it.
/// Organization membership is ignored.
pub fn mixing_matrix(g: &WeightedDigraph, roster: &Roster) -> Result<MixingMatrix> {
    let level_sizes = roster.level_counts();
    let mut counts = [[0u64; 4]; 4];
    for (s, d, _) in g.edges() {
        let ls = roster
            .get(g.name(s))
            .ok_or_else(|| Error::invalid(format!("account `{}` not in roster", g.name(s))))?
            .level as usize;
        let ld = roster
            .get(g.name(d))
            .ok_or_else(|| Error::invalid(format!("account `{}` not in roster", g.name(d))))?
            .level as usize;
        counts[ls][ld] += 1;
    }
    let mut probs = [[None; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let denom = if a == b {
                level_sizes[a] * level_sizes[a].saturating_sub(1)
            } else {
                level_sizes[a] * level_sizes[b]
            };
            if denom > 0 {
                probs[a][b] = Some(counts[a][b] as f64 / denom as f64);
            }
        }
    }
    Ok(MixingMatrix { counts, probs, level_sizes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgStat {
    pub organization_id: String,
    pub n_accounts: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrgReport {
    /// Organizations with ≥2 accounts at the level, roster order.
    pub per_org: Vec<OrgStat>,
    /// Mean of per-organization values.
    pub mean: f64,
}

fn org_groups(roster: &Roster, level: Level) -> Vec<(String, Vec<String>)> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for e in roster.accounts_of_level(level) {
        let next = groups.len();
        let i = *index.entry(e.organization_id.as_str()).or_insert(next);
        if i == groups.len() {
            groups.push((e.organization_id.clone(), Vec::new()));
        }
        groups[i].1.push(e.account_id.clone());
    }
    groups
}

/// Per-organization density of binary directed edges among the org's accounts
/// at `level`, then the mean over organizations. Orgs with <2 accounts at the
/// level are excluded.
pub fn org_density(g: &WeightedDigraph, roster: &Roster, level: Level) -> Result<OrgReport> {
    let mut per_org = Vec::new();
    for (org, accounts) in org_groups(roster, level) {
        let n = accounts.len();
        if n < 2 {
            continue;
        }
        let members: BTreeSet<usize> =
            accounts.iter().filter_map(|a| g.vertex(a)).collect();
        let edges = g
            .edges()
            .filter(|&(s, d, _)| members.contains(&s) && members.contains(&d))
            .count();
        per_org.push(OrgStat {
            organization_id: org,
            n_accounts: n,
            value: edges as f64 / (n * (n - 1)) as f64,
        });
    }
    if per_org.is_empty() {
        return Err(Error::degenerate(format!(
            "density undefined at level {level}: no organization has 2+ accounts"
        )));
    }
    let mean = per_org.iter().map(|o| o.value).sum::<f64>() / per_org.len() as f64;
    Ok(OrgReport { per_org, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapMode {
    Weighted,
    Unweighted,
}

impl OverlapMode {
    pub fn token(self) -> &'static str {
        match self {
            OverlapMode::Weighted => "weighted",
            OverlapMode::Unweighted => "unweighted",
        }
    }
}

/// Symmetrized adjacency with per-vertex strengths, for overlap computations.
pub struct UndirectedView {
    adj: Vec<BTreeMap<usize, u64>>,
    strength: Vec<u64>,
}

impl UndirectedView {
    pub fn new(g: &WeightedDigraph) -> UndirectedView {
        let n = g.n_vertices();
        let mut adj = vec![BTreeMap::new(); n];
        let mut strength = vec![0u64; n];
        for (&(i, j), &w) in g.undirected_weights().iter() {
            adj[i].insert(j, w);
            adj[j].insert(i, w);
            strength[i] += w;
            strength[j] += w;
        }
        UndirectedView { adj, strength }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Neighborhood overlap of a distinct pair. No common neighbors → 0.
    pub fn overlap(&self, i: usize, j: usize, mode: OverlapMode) -> Result<f64> {
        if i == j {
            return Err(Error::invalid("overlap of a vertex with itself"));
        }
        let w_ij = self.adj[i].get(&j).copied().unwrap_or(0);
        match mode {
            OverlapMode::Weighted => {
                let mut common = 0u64;
                for (&k, &w_ik) in &self.adj[i] {
                    if k == j {
                        continue;
                    }
                    if let Some(&w_jk) = self.adj[j].get(&k) {
                        common += w_ik + w_jk;
                    }
                }
                let denom = self.strength[i] + self.strength[j] + 2 * w_ij;
                if common == 0 || denom == 0 {
                    return Ok(0.0);
                }
                Ok(common as f64 / denom as f64)
            }
            OverlapMode::Unweighted => {
                let n_ij = self
                    .adj[i]
                    .keys()
                    .filter(|&&k| k != j && self.adj[j].contains_key(&k))
                    .count();
                if n_ij == 0 {
                    return Ok(0.0);
                }
                let (ki, kj) = (self.degree(i), self.degree(j));
                let denom = if w_ij > 0 {
                    // degree corrections exclude the focal edge itself
                    (ki - 1) + (kj - 1) - n_ij
                } else {
                    ki + kj - n_ij
                };
                Ok(n_ij as f64 / denom as f64)
            }
        }
    }
}

/// Mean overlap over intra-organization account pairs at `level`, then over
/// organizations; same exclusions as [`org_density`].
pub fn org_mean_overlap(
    g: &WeightedDigraph,
    roster: &Roster,
    level: Level,
    mode: OverlapMode,
) -> Result<OrgReport> {
    let view = UndirectedView::new(g);
    let mut per_org = Vec::new();
    for (org, accounts) in org_groups(roster, level) {
        let n = accounts.len();
        if n < 2 {
            continue;
        }
        let ids: Vec<usize> = accounts
            .iter()
            .map(|a| {
                g.vertex(a)
                    .ok_or_else(|| Error::invalid(format!("account `{a}` missing from graph")))
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut pairs = 0usize;
        for x in 0..ids.len() {
            for y in (x + 1)..ids.len() {
                total += view.overlap(ids[x], ids[y], mode)?;
                pairs += 1;
            }
        }
        per_org.push(OrgStat { organization_id: org, n_accounts: n, value: total / pairs as f64 });
    }
    if per_org.is_empty() {
        return Err(Error::degenerate(format!(
            "overlap undefined at level {level}: no organization has 2+ accounts"
        )));
    }
    let mean = per_org.iter().map(|o| o.value).sum::<f64>() / per_org.len() as f64;
    Ok(OrgReport { per_org, mean })
}

/// Two-way aggregations of the four levels used in grouped comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelGrouping {
    /// org_main ∪ org_side vs ind_main ∪ ind_side.
    OfficialVsPersonal,
    /// org_main ∪ ind_main vs org_side ∪ ind_side.
    MainVsSide,
}

impl LevelGrouping {
    pub fn group(self, level: Level) -> &'static str {
        match self {
            LevelGrouping::OfficialVsPersonal => match level {
                Level::OrgMain | Level::OrgSide => "official",
                Level::IndMain | Level::IndSide => "personal",
            },
            LevelGrouping::MainVsSide => match level {
                Level::OrgMain | Level::IndMain => "main",
                Level::OrgSide | Level::IndSide => "side",
            },
        }
    }
}
