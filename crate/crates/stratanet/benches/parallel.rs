//! Hot-path benchmarks for the data-parallel core vs the sequential fallback.
//!
//! The execution mode is a compile-time feature, so the comparison runs as two
//! builds with identical benchmark ids:
//!
//! ```text
//! cargo bench --bench parallel -- --save-baseline rayon
//! cargo bench --bench parallel --no-default-features -- --baseline rayon
//! ```
//!
//! The second report shows the sequential fallback relative to the rayon
//! baseline. Every benched function is bit-identical across modes (per-task
//! seed streams), so the diff is pure scheduling.

use criterion::{criterion_group, criterion_main, Criterion};
use stratanet::backbone::{extract_backbone, score_edges};
use stratanet::blockmodel::{fit_sbm_multistart, SbmConfig};
use stratanet::bootstrap::ensemble;
use stratanet::ergm::{bootstrap_ergm, ErgmTerm};
use stratanet::graph::{Level, Sector, WeightedDigraph};
use stratanet::ingest::{build_account_graph, collapse, Roster};
use stratanet::rng::{stream, uniform_below};
use stratanet::synth;

/// Dense weighted digraph large enough for edge scoring to dominate setup.
fn scoring_graph(n: usize) -> WeightedDigraph {
    let mut rng = stream(0, "bench-backbone", 0);
    let mut g = WeightedDigraph::new();
    for i in 0..n {
        g.add_vertex(&format!("v{i}"));
    }
    for s in 0..n {
        for d in 0..n {
            if s != d {
                g.add_edge(s, d, 1 + uniform_below(&mut rng, 8));
            }
        }
    }
    g
}

fn bench_backbone(c: &mut Criterion) {
    let g = scoring_graph(250);
    c.bench_function("backbone/score_62k_edges", |b| b.iter(|| score_edges(&g)));
}

fn bench_bootstrap(c: &mut Criterion) {
    let (g, _) = synth::planted_backbone(0);
    let m = g.total_weight();
    c.bench_function("bootstrap/200_replicates", |b| {
        b.iter(|| ensemble(&g, m, 200, 7).unwrap())
    });
}

fn bench_sbm(c: &mut Criterion) {
    let (g, _) = synth::planted_partition(100, 2, 0.3, 0.01, 0);
    let config = SbmConfig { n_sweeps: 300, seed: 3, ..SbmConfig::default() };
    c.bench_function("sbm/8_chains_300_sweeps", |b| {
        b.iter(|| fit_sbm_multistart(&g, &config, 8).unwrap())
    });
}

fn bench_ergm(c: &mut Criterion) {
    let fx = synth::four_level_fixture(0);
    let roster = Roster::from_entries(fx.roster).unwrap();
    let g = build_account_graph(&fx.events, &roster, Some(Level::IndMain)).unwrap();
    let reps = ensemble(&g, g.total_weight(), 40, 0).unwrap();
    let collapsed: Vec<_> = reps
        .iter()
        .map(|rep| collapse(&extract_backbone(rep, 0.1).unwrap(), &roster).unwrap())
        .collect();
    let sectors: Vec<Sector> =
        roster.organizations().iter().map(|o| roster.org_info(o).unwrap().0).collect();
    let terms = [ErgmTerm::Edges, ErgmTerm::SectorHomophily, ErgmTerm::TriadicClosure];
    c.bench_function("ergm/40_bootstrap_fits", |b| {
        b.iter(|| bootstrap_ergm(&collapsed, &sectors, &terms).unwrap())
    });
}

fn config() -> Criterion {
    Criterion::default().sample_size(10)
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_backbone, bench_bootstrap, bench_sbm, bench_ergm
}
criterion_main!(benches);
