mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_pairs_oracle, five_vertex_seed, floyd_warshall};
use sfgen_core::graph::EdgeList;
use sfgen_core::metrics::{
    adjacency_raster, degree_distribution, fit_power_law, path_stats, DegreeHistogram, SimpleGraph,
    Sources,
};
use sfgen_core::pba::{generate_pba, FactionConfig, PbaParams};
use sfgen_core::pk::{generate_pk, PkParams};

fn pba_graph(ranks: usize, n: u64, k: u64, seed: u64) -> EdgeList {
    let p = PbaParams {
        vertices_per_rank: n,
        edges_per_vertex: k,
        inter_faction_prob: 0.0,
        master_seed: seed,
    };
    generate_pba(ranks, 1, &p, &FactionConfig::all(ranks).unwrap())
        .unwrap()
        .graph
}

fn random_graph(rng: &mut ChaCha8Rng, n: u64, m: usize) -> EdgeList {
    let edges = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    EdgeList::new(edges, n, rng.random_bool(0.5)).unwrap()
}

/// Synthetic histogram with `count(k) = round(c * k^-gamma)`, zeros dropped.
pub fn exact_power_law(gamma: f64, c: f64, k_max: u64) -> DegreeHistogram {
    DegreeHistogram::from_entries(
        (1..=k_max)
            .map(|k| (k, (c * (k as f64).powf(-gamma)).round() as u64))
            .filter(|&(_, n)| n > 0)
            .collect(),
    )
}

#[test]
fn full_sources_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..30 {
        let n = rng.random_range(2..60);
        let m = rng.random_range(1..120);
        let g = random_graph(&mut rng, n, m);
        let s = SimpleGraph::from_edge_list(&g).unwrap();
        if s.edge_count() == s.self_loop_count() as u64 {
            continue;
        }
        let stats = path_stats(&s, Sources::All, &mut rng).unwrap();
        let d = floyd_warshall(n as usize, g.edges());
        let finite: Vec<u64> = d
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(move |&(j, _)| j != i)
                    .map(|(_, &x)| x)
            })
            .filter(|&x| x < u64::MAX / 4)
            .collect();
        let unreachable = (n * (n - 1)) as usize - finite.len();
        assert_eq!(stats.pairs_sampled as usize, finite.len(), "case {case}");
        assert_eq!(stats.unreachable_pairs as usize, unreachable, "case {case}");
        assert_eq!(
            stats.diameter_estimate,
            finite.iter().copied().max().unwrap_or(0)
        );
        if !finite.is_empty() {
            let mean = finite.iter().sum::<u64>() as f64 / finite.len() as f64;
            assert!((stats.avg_path_length - mean).abs() < 1e-12, "case {case}");
        }
    }
}

#[test]
fn kronecker_graph_all_sources() {
    let g = generate_pk(3, 1, &five_vertex_seed(), &PkParams::plain(1))
        .unwrap()
        .graph;
    let s = SimpleGraph::from_edge_list(&g).unwrap();
    let stats = path_stats(&s, Sources::All, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (mean, diameter, unreachable) = all_pairs_oracle(25, g.edges());
    assert_eq!(stats.avg_path_length, mean);
    assert_eq!(stats.diameter_estimate, diameter);
    assert_eq!(stats.unreachable_pairs, unreachable);
}

#[test]
fn ten_thousand_vertex_exactness() {
    let g = pba_graph(4, 2500, 2, 3);
    let s = SimpleGraph::from_edge_list(&g).unwrap();
    let stats = path_stats(&s, Sources::All, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (mean, diameter, unreachable) = all_pairs_oracle(10_000, g.edges());
    assert!((stats.avg_path_length - mean).abs() < 1e-9);
    assert_eq!(stats.diameter_estimate, diameter);
    assert_eq!(stats.unreachable_pairs, unreachable);
}

#[test]
fn ten_percent_sampling_within_five_percent() {
    for seed in 0..20 {
        let g = pba_graph(4, 500, 2, 100 + seed);
        let s = SimpleGraph::from_edge_list(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exact = path_stats(&s, Sources::All, &mut rng)
            .unwrap()
            .avg_path_length;
        let sampled = path_stats(&s, Sources::Sample(200), &mut rng).unwrap();
        assert_eq!(sampled.sources_sampled, 200);
        let rel = (sampled.avg_path_length - exact).abs() / exact;
        assert!(
            rel < 0.05,
            "seed {seed}: {} vs {exact}",
            sampled.avg_path_length
        );
    }
}

#[test]
fn diameter_monotone_in_sources() {
    let g = pba_graph(4, 400, 2, 8);
    let s = SimpleGraph::from_edge_list(&g).unwrap();
    let mut last = 0;
    for count in [1, 2, 5, 10, 40, 200, 1600] {
        let stats = path_stats(
            &s,
            Sources::Sample(count),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert!(stats.diameter_estimate >= last, "{count} sources");
        last = stats.diameter_estimate;
    }
    let all = path_stats(&s, Sources::All, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert!(all.diameter_estimate >= last);
}

#[test]
fn handshake_on_generated_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 50, 200);
        let s = SimpleGraph::from_edge_list(&g).unwrap();
        let h = degree_distribution(&s);
        assert_eq!(h.degree_total(), 2 * s.edge_count());
        assert_eq!(h.vertex_total(), 50);
    }
}

#[test]
fn fit_recovers_exact_power_laws() {
    for gamma in [2.1, 2.5, 3.0] {
        let fit = fit_power_law(&exact_power_law(gamma, 1e6, 1024)).unwrap();
        assert!((fit.gamma - gamma).abs() <= 0.1, "{gamma}: {}", fit.gamma);
        assert!(fit.r2 > 0.99);
    }
}

#[test]
fn pba_graph_exponent_is_plausible() {
    let g = pba_graph(4, 10_000, 5, 1);
    let fit = fit_power_law(&degree_distribution(
        &SimpleGraph::from_edge_list(&g).unwrap(),
    ))
    .unwrap();
    assert!((2.0..=3.5).contains(&fit.gamma), "{}", fit.gamma);
}

#[test]
fn raster_counts_every_edge() {
    let g = pba_graph(4, 100, 3, 2);
    let r = adjacency_raster(&g, 16).unwrap();
    let total: u64 = (0..16)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .map(|(i, j)| r.count(i, j))
        .sum();
    assert_eq!(total, g.len() as u64);
    let mut pgm = Vec::new();
    r.write_pgm(&mut pgm, false).unwrap();
    assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
    assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
}
