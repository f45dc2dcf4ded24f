//! Independent oracles shared by the integration suites. Nothing here calls
//! the code paths it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfgen_core::pk::{BoolMatrix, SeedGraph};

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn five_vertex_seed() -> SeedGraph {
    sfgen_core::io::read_seed_graph_file(&fixture("five_vertex.seed")).unwrap()
}

/// Nonzero set of the `(t+1)`-fold Kronecker power, computed by index
/// arithmetic on the definition `K[a*n+b][c*n+d] = A[a][c] & S[b][d]`.
pub fn dense_power_nonzeros(seed: &BoolMatrix, t: u32) -> BTreeSet<(u64, u64)> {
    let n0 = seed.rows() as u64;
    let mut current: BTreeSet<(u64, u64)> = (0..n0)
        .flat_map(|r| (0..n0).map(move |c| (r, c)))
        .filter(|&(r, c)| seed.get(r as usize, c as usize))
        .collect();
    for _ in 0..t {
        let mut next = BTreeSet::new();
        for &(r, c) in &current {
            for p in 0..n0 {
                for q in 0..n0 {
                    if seed.get(p as usize, q as usize) {
                        next.insert((r * n0 + p, c * n0 + q));
                    }
                }
            }
        }
        current = next;
    }
    current
}

pub fn random_seed_graph(rng: &mut impl Rng, max_order: u32) -> SeedGraph {
    loop {
        let n0 = rng.random_range(2..=max_order);
        let density = rng.random_range(0.15..0.7);
        let entries: Vec<(u32, u32)> = (0..n0)
            .flat_map(|r| (0..n0).map(move |c| (r, c)))
            .filter(|_| rng.random_bool(density))
            .collect();
        if let Ok(seed) = SeedGraph::new(n0, &entries) {
            return seed;
        }
    }
}

/// Exact all-pairs shortest paths on the symmetrized simple graph:
/// `(mean over reachable ordered pairs, max finite distance, unreachable pairs)`.
pub fn all_pairs_oracle(n: usize, edges: &[(u64, u64)]) -> (f64, u64, u64) {
    let mut adj: HashMap<usize, HashSet<usize>> = HashMap::new();
    for &(u, v) in edges {
        let (u, v) = (u as usize, v as usize);
        if u != v {
            adj.entry(u).or_default().insert(v);
            adj.entry(v).or_default().insert(u);
        }
    }
    let mut sum = 0u64;
    let mut pairs = 0u64;
    let mut max = 0u64;
    let mut unreachable = 0u64;
    for s in 0..n {
        let mut dist: HashMap<usize, u64> = HashMap::from([(s, 0)]);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &w in adj.get(&u).into_iter().flatten() {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d + 1);
                    queue.push_back(w);
                }
            }
        }
        for (&v, &d) in &dist {
            if v != s {
                sum += d;
                pairs += 1;
                max = max.max(d);
            }
        }
        unreachable += (n - dist.len()) as u64;
    }
    (sum as f64 / pairs as f64, max, unreachable)
}

/// Floyd-Warshall for very small graphs.
pub fn floyd_warshall(n: usize, edges: &[(u64, u64)]) -> Vec<Vec<u64>> {
    const INF: u64 = u64::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        let (u, v) = (u as usize, v as usize);
        if u != v {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Serial reference for one rank's phase one, replaying the generator's
/// documented draw sequence on an identically seeded stream.
pub fn phase1_reference(
    master_seed: u64,
    rank: usize,
    prefix: &[usize],
    outside: &[usize],
    n: usize,
    k: usize,
    q: f64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rank as u64);
    let mut targets = prefix.to_vec();
    for j in prefix.len()..n * k {
        let pick = if q > 0.0 && !outside.is_empty() && rng.random_bool(q) {
            outside[rng.random_range(0..outside.len())]
        } else {
            targets[rng.random_range(0..j)]
        };
        targets.push(pick);
    }
    targets
}

pub fn sorted<T: Ord + Clone>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort_unstable();
    v
}
