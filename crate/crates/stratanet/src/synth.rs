//! Synthetic fixtures with known ground truth: a four-level retweet corpus
//! with the qualitative structure the pipeline is meant to surface, a planted
//! two-block graph, and a planted-signal weighted graph for backbone
//! calibration.
//!
//! The four-level corpus covers 21 organizations (3 per sector). Its layers
//! are built so each downstream conclusion is baked in:
//! - org_main: a per-seed relationship graph over organizations in which
//!   same-sector ties are common, cross-sector ones rare, and triangles are
//!   pruned to a handful — a homophilous, low-closure backbone. Each tie
//!   carries 18 retweets per direction; 400 more are uniform noise.
//! - org_side: a strong/weak-tie pattern over 2 side accounts per org keeping
//!   every account at out- and in-strength exactly 5, so weight-1 edges sit
//!   just above the backbone significance threshold and only 3 planted
//!   heavier dyads survive — the sparse layer. The ~45 org pairs of support
//!   give size-fixed bootstrap replicates something stable to agree on.
//! - ind_main: 4 executives per org retweeting each other densely within the
//!   organization — the high within-org density layer.
//! - ind_side: a friend-of-a-friend process over individual side accounts,
//!   sector-blind — a triangle-rich, non-homophilous layer.

use crate::error::Result;
use crate::graph::{
    Event, EventKind, Level, OrgType, Partition, RosterEntry, Sector, WeightedDigraph,
};
use crate::rng::{stream, uniform_below, uniform_f64};
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub const N_ORGS: usize = 21;
const SIDE_PER_ORG: usize = 2;
const EXECS_PER_ORG: usize = 4;
const INDS_PER_ORG: usize = 3;

/// A generated corpus: roster plus chronologically sorted events.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub roster: Vec<RosterEntry>,
    pub events: Vec<Event>,
}

fn org_type_of(sector: Sector) -> OrgType {
    match sector {
        Sector::Government => OrgType::Government,
        Sector::Science => OrgType::Science,
        Sector::Business => OrgType::Corporation,
        Sector::CivilSociety => OrgType::Ngo,
        Sector::Media => OrgType::Media,
        Sector::InterestGroup => OrgType::InterestGroup,
        Sector::PoliticalParty => OrgType::Party,
    }
}

fn org_id(i: usize) -> String {
    format!("org{i:02}")
}

fn sector_of(i: usize) -> Sector {
    Sector::ALL[i % 7]
}

fn same_sector(a: usize, b: usize) -> bool {
    a % 7 == b % 7
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_below(rng, (i + 1) as u64) as usize;
        v.swap(i, j);
    }
    v
}

fn triangle_list(adj: &[u32; N_ORGS]) -> Vec<(usize, usize, usize)> {
    let mut tris = Vec::new();
    for a in 0..N_ORGS {
        for b in a + 1..N_ORGS {
            if adj[a] & 1 << b != 0 {
                for c in b + 1..N_ORGS {
                    if adj[a] & adj[b] & 1 << c != 0 {
                        tris.push((a, b, c));
                    }
                }
            }
        }
    }
    tris
}

fn edge_list(adj: &[u32; N_ORGS]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..N_ORGS {
        for b in a + 1..N_ORGS {
            if adj[a] & 1 << b != 0 {
                edges.push((a, b));
            }
        }
    }
    edges
}

fn closed_edges(adj: &[u32; N_ORGS]) -> usize {
    edge_list(adj).iter().filter(|&&(a, b)| adj[a] & adj[b] != 0).count()
}

/// The org_main relationship graph: same-sector dyads likely, cross-sector
/// rare, triangles pruned (dropping cross-sector legs first) until at most 3
/// remain. Resampled until size, homophily and closure all sit strictly
/// inside their feasible ranges.
fn org_relationships(rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    for _ in 0..500 {
        let mut adj = [0u32; N_ORGS];
        for a in 0..N_ORGS {
            for b in a + 1..N_ORGS {
                let p = if same_sector(a, b) { 0.65 } else { 0.13 };
                if uniform_f64(rng) < p {
                    adj[a] |= 1 << b;
                    adj[b] |= 1 << a;
                }
            }
        }
        loop {
            let tris = triangle_list(&adj);
            if tris.len() <= 3 {
                break;
            }
            let (a, b, c) = tris[uniform_below(rng, tris.len() as u64) as usize];
            let legs = [(a, b), (a, c), (b, c)];
            let cross: Vec<(usize, usize)> =
                legs.iter().copied().filter(|&(x, y)| !same_sector(x, y)).collect();
            let pool = if cross.is_empty() { &legs[..] } else { &cross[..] };
            let (x, y) = pool[uniform_below(rng, pool.len() as u64) as usize];
            adj[x] &= !(1 << y);
            adj[y] &= !(1 << x);
        }
        let edges = edge_list(&adj);
        let homophilous = edges.iter().filter(|&&(a, b)| same_sector(a, b)).count();
        let closed = closed_edges(&adj);
        if (28..=52).contains(&edges.len())
            && (11..=15).contains(&homophilous)
            && (3..=18).contains(&closed)
        {
            return edges;
        }
    }
    unreachable!("relationship sampling converges within a few tries");
}

struct SidePattern {
    /// Strong ties: all 8 ordered account routes, one event each.
    strong: Vec<(usize, usize)>,
    /// Weak-tie cycle over orgs: 2 routes per adjacent pair.
    weak_order: Vec<usize>,
    /// Three heavier dyads that alone survive the backbone.
    hubs: Vec<(usize, usize)>,
}

/// Strong/weak-tie pattern for the org_side layer: a strong cycle and a weak
/// cycle over organizations (plus 3 hub dyads), resampled until the union has
/// interior homophily and closure counts.
fn side_pattern(rng: &mut ChaCha8Rng) -> SidePattern {
    for _ in 0..500 {
        let sigma = shuffled(rng, N_ORGS);
        let tau = shuffled(rng, N_ORGS);
        let strong: Vec<(usize, usize)> =
            (0..N_ORGS).map(|i| (sigma[i], sigma[(i + 1) % N_ORGS])).collect();
        let hubs: Vec<(usize, usize)> =
            [0, 7, 14].iter().map(|&i| (sigma[i], sigma[(i + 10) % N_ORGS])).collect();
        let mut adj = [0u32; N_ORGS];
        let put = |adj: &mut [u32; N_ORGS], a: usize, b: usize| {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        };
        for &(a, b) in strong.iter().chain(&hubs) {
            put(&mut adj, a, b);
        }
        for i in 0..N_ORGS {
            put(&mut adj, tau[i], tau[(i + 1) % N_ORGS]);
        }
        let edges = edge_list(&adj);
        let homophilous = edges.iter().filter(|&&(a, b)| same_sector(a, b)).count();
        let closed = closed_edges(&adj);
        if (2..=12).contains(&homophilous) && closed >= 2 && closed + 3 <= edges.len() {
            return SidePattern { strong, weak_order: tau, hubs };
        }
    }
    unreachable!("side-pattern sampling converges within a few tries");
}

const WINDOW_WEEKS: i64 = 8;

fn window_start() -> DateTime<Utc> {
    // a Monday, with the whole window clear of DST transitions
    Utc.with_ymd_and_hms(2019, 1, 7, 0, 0, 0).unwrap()
}

fn stamp(rng: &mut ChaCha8Rng) -> DateTime<Utc> {
    let secs = uniform_below(rng, (WINDOW_WEEKS * 7 * 24 * 3600) as u64);
    window_start() + Duration::seconds(secs as i64)
}

fn retweet(rng: &mut ChaCha8Rng, src: String, dst: String) -> Event {
    Event {
        account_id: src,
        target_account_id: Some(dst),
        timestamp: stamp(rng),
        kind: EventKind::Retweet,
        text: None,
    }
}

/// Generate the four-level corpus for `seed`. Deterministic: each layer draws
/// from its own labeled stream.
pub fn four_level_fixture(seed: u64) -> Fixture {
    let mut roster = Vec::new();
    for i in 0..N_ORGS {
        let org = org_id(i);
        let (sector, org_type) = (sector_of(i), org_type_of(sector_of(i)));
        let mut push = |account: String, level: Level| {
            roster.push(RosterEntry {
                account_id: account,
                organization_id: org.clone(),
                level,
                sector,
                org_type,
            })
        };
        push(format!("{org}_main"), Level::OrgMain);
        for k in 0..SIDE_PER_ORG {
            push(format!("{org}_side{k}"), Level::OrgSide);
        }
        for k in 0..EXECS_PER_ORG {
            push(format!("{org}_exec{k}"), Level::IndMain);
        }
        for k in 0..INDS_PER_ORG {
            push(format!("{org}_ind{k}"), Level::IndSide);
        }
    }

    let main = |o: usize| format!("{}_main", org_id(o));
    let side = |o: usize, k: usize| format!("{}_side{k}", org_id(o));
    let exec = |o: usize, k: usize| format!("{}_exec{k}", org_id(o));
    let ind = |o: usize, k: usize| format!("{}_ind{k}", org_id(o));

    let mut events = Vec::new();

    // org_main: every relationship carries 18 retweets per direction, the
    // rest is uniform noise too thin to survive the backbone
    let r = &mut stream(seed, "synth-om", 0);
    for &(a, b) in &org_relationships(r) {
        for (u, v) in [(a, b), (b, a)] {
            for _ in 0..18 {
                events.push(retweet(r, main(u), main(v)));
            }
        }
    }
    for _ in 0..400 {
        let u = uniform_below(r, N_ORGS as u64) as usize;
        let mut v = uniform_below(r, (N_ORGS - 1) as u64) as usize;
        if v >= u {
            v += 1;
        }
        events.push(retweet(r, main(u), main(v)));
    }

    // org_side: strong ties use all 8 ordered account routes once, weak ties
    // 2, so every account retweets exactly 5 times and is retweeted exactly 5
    // times and no weight-1 edge looks surprising; the hubs add 3 retweets on
    // one route and are the only edges meant to survive
    let r = &mut stream(seed, "synth-os", 0);
    let pattern = side_pattern(r);
    for &(a, b) in &pattern.strong {
        for k in 0..SIDE_PER_ORG {
            for k2 in 0..SIDE_PER_ORG {
                events.push(retweet(r, side(a, k), side(b, k2)));
                events.push(retweet(r, side(b, k), side(a, k2)));
            }
        }
    }
    for i in 0..N_ORGS {
        let (a, next, prev) = (
            pattern.weak_order[i],
            pattern.weak_order[(i + 1) % N_ORGS],
            pattern.weak_order[(i + N_ORGS - 1) % N_ORGS],
        );
        events.push(retweet(r, side(a, 0), side(next, 1)));
        events.push(retweet(r, side(a, 1), side(prev, 0)));
    }
    for &(h, t) in &pattern.hubs {
        for _ in 0..3 {
            events.push(retweet(r, side(h, 1), side(t, 0)));
        }
    }

    // ind_main: dense executive core inside each org, light cross-org chatter
    let r = &mut stream(seed, "synth-im", 0);
    for o in 0..N_ORGS {
        for a in 0..EXECS_PER_ORG {
            for b in 0..EXECS_PER_ORG {
                if a != b && uniform_f64(r) < 0.85 {
                    for _ in 0..2 + uniform_below(r, 3) {
                        events.push(retweet(r, exec(o, a), exec(o, b)));
                    }
                }
            }
        }
    }
    for _ in 0..130 {
        let (u, a) = (uniform_below(r, N_ORGS as u64) as usize, uniform_below(r, 4) as usize);
        let mut v = uniform_below(r, (N_ORGS - 1) as u64) as usize;
        if v >= u {
            v += 1;
        }
        let b = uniform_below(r, 4) as usize;
        events.push(retweet(r, exec(u, a), exec(v, b)));
    }

    // ind_side: friend-of-a-friend closure process, blind to sectors; each
    // partnership is worth 3 retweets so it survives the backbone
    let r = &mut stream(seed, "synth-is", 0);
    let n_ind = N_ORGS * INDS_PER_ORG;
    let mut partners_of: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_ind];
    let org_of = |i: usize| i / INDS_PER_ORG;
    for _ in 0..100 {
        let a = uniform_below(r, n_ind as u64) as usize;
        let mut c = None;
        if uniform_f64(r) < 0.6 && !partners_of[a].is_empty() {
            let bs: Vec<usize> = partners_of[a].iter().copied().collect();
            let b = bs[uniform_below(r, bs.len() as u64) as usize];
            let cs: Vec<usize> = partners_of[b]
                .iter()
                .copied()
                .filter(|&x| x != a && org_of(x) != org_of(a))
                .collect();
            if !cs.is_empty() {
                c = Some(cs[uniform_below(r, cs.len() as u64) as usize]);
            }
        }
        let c = c.unwrap_or_else(|| {
            if uniform_f64(r) < 0.1 {
                // a same-org sibling
                let mut k = uniform_below(r, (INDS_PER_ORG - 1) as u64) as usize;
                if k >= a % INDS_PER_ORG {
                    k += 1;
                }
                org_of(a) * INDS_PER_ORG + k
            } else {
                let mut x = uniform_below(r, (n_ind - INDS_PER_ORG) as u64) as usize;
                if x >= org_of(a) * INDS_PER_ORG {
                    x += INDS_PER_ORG;
                }
                x
            }
        });
        partners_of[a].insert(c);
        partners_of[c].insert(a);
        for _ in 0..3 {
            events.push(retweet(r, ind(org_of(a), a % INDS_PER_ORG), ind(org_of(c), c % INDS_PER_ORG)));
        }
    }

    // cross-level: everyone occasionally amplifies their own main account
    let r = &mut stream(seed, "synth-cross", 0);
    for _ in 0..60 {
        let o = uniform_below(r, N_ORGS as u64) as usize;
        let k = uniform_below(r, EXECS_PER_ORG as u64) as usize;
        events.push(retweet(r, exec(o, k), main(o)));
    }
    for _ in 0..30 {
        let o = uniform_below(r, N_ORGS as u64) as usize;
        let k = uniform_below(r, SIDE_PER_ORG as u64) as usize;
        events.push(retweet(r, side(o, k), main(o)));
    }
    for _ in 0..40 {
        let o = uniform_below(r, N_ORGS as u64) as usize;
        let k = uniform_below(r, INDS_PER_ORG as u64) as usize;
        events.push(retweet(r, ind(o, k), main(o)));
    }

    // plain tweets for temporal texture
    let r = &mut stream(seed, "synth-tweets", 0);
    for _ in 0..150 {
        let o = uniform_below(r, N_ORGS as u64) as usize;
        events.push(Event {
            account_id: main(o),
            target_account_id: None,
            timestamp: stamp(r),
            kind: EventKind::Tweet,
            text: None,
        });
    }

    events.sort_by(|a, b| {
        (a.timestamp, &a.account_id, &a.target_account_id)
            .cmp(&(b.timestamp, &b.account_id, &b.target_account_id))
    });
    Fixture { roster, events }
}

impl Fixture {
    /// Write `events.csv` and `roster.csv` under `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        crate::ingest::write_events_csv(&self.events, std::fs::File::create(dir.join("events.csv"))?)?;
        crate::ingest::write_roster_csv(&self.roster, std::fs::File::create(dir.join("roster.csv"))?)
    }
}

/// Two-community planted partition: vertices split into `n_blocks` contiguous
/// equal blocks; each within-block dyad is an edge with probability `p_in`,
/// each cross-block dyad with `p_out`.
pub fn planted_partition(
    n: usize,
    n_blocks: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (crate::blockmodel::SimpleGraph, Partition) {
    assert!(n_blocks >= 1 && n >= n_blocks);
    let block = |i: usize| (i * n_blocks / n) as u32;
    let mut rng = stream(seed, "synth-planted", 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if uniform_f64(&mut rng) < p {
                edges.push((i, j));
            }
        }
    }
    let labels: Vec<u32> = (0..n).map(block).collect();
    (crate::blockmodel::SimpleGraph::from_edges(n, edges), Partition::from_labels(&labels))
}

/// Planted-signal weighted digraph on 50 vertices. Vertices 0..21 form a
/// complete directed core whose 420 ordered pairs split into 400 noise edges
/// (weights 4–6) and 20 planted strong edges (weight 25); the remaining 29
/// vertices are isolated spectators. Because every core pair is occupied, the
/// noise weights match their strength-product expectations and only the
/// planted pairs sit far above the null — the background is calibrated rather
/// than merely weak. Returns the graph and the strong ground truth.
pub fn planted_backbone(seed: u64) -> (WeightedDigraph, BTreeSet<(usize, usize)>) {
    let mut rng = stream(seed, "synth-backbone", 0);
    let mut g = WeightedDigraph::new();
    for i in 0..50 {
        g.add_vertex(&format!("v{i:02}"));
    }

    let mut strong = BTreeSet::new();
    while strong.len() < 20 {
        let s = uniform_below(&mut rng, 21) as usize;
        let d = uniform_below(&mut rng, 21) as usize;
        if s != d {
            strong.insert((s, d));
        }
    }
    for s in 0..21 {
        for d in 0..21 {
            if s == d {
                continue;
            }
            let w = if strong.contains(&(s, d)) { 25 } else { 4 + uniform_below(&mut rng, 3) };
            g.add_edge(s, d, w);
        }
    }
    (g, strong)
}
