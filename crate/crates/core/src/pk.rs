//! Parallel Kronecker generation.
//!
//! The final graph is the `(T+1)`-fold Kronecker power of a boolean seed
//! matrix. Instead of materializing intermediate matrices, edges are produced
//! by depth-first expansion of meta-edges on a stack: a meta-edge at
//! iteration `i < T` is replaced by one child per seed nonzero, a meta-edge at
//! iteration `T` is a final edge.
//!
//! Ranks split the work without communicating. Starting from the group of all
//! ranks and the seed's meta-edges, a group with more ranks than meta-edges
//! splits into one contiguous subgroup per meta-edge and each subgroup
//! descends into its meta-edge's children; otherwise every rank takes an even
//! contiguous slice and expands it alone.

use std::collections::{HashMap, HashSet};
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;

use crate::graph::{EdgeList, RankId, VertexId};
use crate::rng::{global_rng, keyed_rng};
use crate::transport::{self, Inbox, Outbox, RankProgram};
use crate::{Error, Result};

/// Largest dense product [`kronecker_product`] will build.
pub const ORACLE_CELL_CAP: usize = 10_000_000;

const FLIP_STREAM: u64 = 0x666c_6970;

/// Dense row-major boolean matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl BoolMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BoolMatrix {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = BoolMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged matrix");
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, x != 0);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.cells[r * self.cols + c] = value;
    }

    pub fn nnz(&self) -> usize {
        self.cells.iter().filter(|&&x| x).count()
    }

    /// Nonzero positions in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &x)| x)
            .map(|(i, _)| (i / self.cols, i % self.cols))
            .collect()
    }
}

/// Dense Kronecker product: block `(i, j)` of the result is `b` when
/// `a[i][j]` is set and zero otherwise.
pub fn kronecker_product(a: &BoolMatrix, b: &BoolMatrix) -> Result<BoolMatrix> {
    if a.cells.is_empty() || b.cells.is_empty() {
        return Err(Error::config("kronecker product of an empty matrix"));
    }
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|n| n <= ORACLE_CELL_CAP) => (r, c),
        _ => {
            return Err(Error::Size(format!(
                "{}x{} by {}x{} product exceeds {ORACLE_CELL_CAP} cells",
                a.rows, a.cols, b.rows, b.cols
            )))
        }
    };
    let mut out = BoolMatrix::zeros(rows, cols);
    for (i, j) in a.nonzeros() {
        for (p, q) in b.nonzeros() {
            out.set(i * b.rows + p, j * b.cols + q, true);
        }
    }
    Ok(out)
}

/// The `n0 x n0` boolean seed of a Kronecker graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedGraph {
    matrix: BoolMatrix,
    nonzeros: Vec<(u32, u32)>,
}

impl SeedGraph {
    pub const MAX_ORDER: u32 = 4096;

    /// Builds a seed from its nonzero entries; repeats are ignored.
    pub fn new(order: u32, entries: &[(u32, u32)]) -> Result<Self> {
        if order < 2 {
            return Err(Error::config(format!("seed order {order} is below 2")));
        }
        if order > Self::MAX_ORDER {
            return Err(Error::config(format!(
                "seed order {order} exceeds {}",
                Self::MAX_ORDER
            )));
        }
        let n = order as usize;
        let mut matrix = BoolMatrix::zeros(n, n);
        for &(r, c) in entries {
            if r >= order || c >= order {
                return Err(Error::config(format!(
                    "entry ({r}, {c}) outside {order}x{order} seed"
                )));
            }
            matrix.set(r as usize, c as usize, true);
        }
        SeedGraph::from_matrix(matrix)
    }

    pub fn from_matrix(matrix: BoolMatrix) -> Result<Self> {
        if matrix.rows != matrix.cols || matrix.rows < 2 {
            return Err(Error::config(
                "seed matrix must be square with order at least 2",
            ));
        }
        let nonzeros: Vec<_> = matrix
            .nonzeros()
            .into_iter()
            .map(|(r, c)| (r as u32, c as u32))
            .collect();
        if nonzeros.is_empty() {
            return Err(Error::config("seed graph has no edges"));
        }
        Ok(SeedGraph { matrix, nonzeros })
    }

    /// `n0`.
    pub fn order(&self) -> u32 {
        self.matrix.rows as u32
    }

    /// `e0`.
    pub fn edge_count(&self) -> usize {
        self.nonzeros.len()
    }

    pub fn matrix(&self) -> &BoolMatrix {
        &self.matrix
    }

    /// Nonzero entries in row-major order.
    pub fn nonzeros(&self) -> &[(u32, u32)] {
        &self.nonzeros
    }

    /// Vertex count after `iterations` expansions: `n0^(iterations + 1)`.
    pub fn vertex_count(&self, iterations: u32) -> Result<u64> {
        (self.order() as u64)
            .checked_pow(iterations + 1)
            .ok_or_else(|| {
                Error::Size(format!(
                    "{}^{} vertices overflow u64",
                    self.order(),
                    iterations + 1
                ))
            })
    }

    /// Edge count after `iterations` expansions without noise: `e0^(iterations + 1)`.
    pub fn edge_count_after(&self, iterations: u32) -> Option<u64> {
        (self.edge_count() as u64).checked_pow(iterations + 1)
    }
}

/// An edge position at an intermediate iteration. At iteration `i` both
/// coordinates are below `n0^(i+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MetaEdge {
    pub iteration: u32,
    pub row: u64,
    pub col: u64,
}

impl MetaEdge {
    /// The seed's edges as iteration-0 meta-edges.
    pub fn roots(seed: &SeedGraph) -> Vec<MetaEdge> {
        seed.nonzeros()
            .iter()
            .map(|&(r, c)| MetaEdge {
                iteration: 0,
                row: r as u64,
                col: c as u64,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseMode {
    None,
    /// Each expansion step uses a copy of the seed with every cell flipped
    /// independently with this probability.
    SeedPerturb(f64),
    /// XOR the final adjacency with this many uniformly sampled cells.
    ErFlip(u64),
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::config(format!(
                "bad noise {s:?} (expected none, seed-perturb:<p> or er-flip:<count>)"
            ))
        };
        match s.split_once(':') {
            None if s == "none" => Ok(NoiseMode::None),
            Some(("seed-perturb", p)) => {
                let p: f64 = p.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "perturbation probability {p} outside [0, 1]"
                    )));
                }
                Ok(NoiseMode::SeedPerturb(p))
            }
            Some(("er-flip", n)) => n.parse().map(NoiseMode::ErFlip).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PkParams {
    /// Final iteration index `T`.
    pub iterations: u32,
    pub noise: NoiseMode,
    pub master_seed: u64,
}

impl PkParams {
    pub fn plain(iterations: u32) -> Self {
        PkParams {
            iterations,
            noise: NoiseMode::None,
            master_seed: 0,
        }
    }
}

/// Flips every cell of the seed independently with probability `p_mod`.
/// The result may have no nonzeros.
pub fn apply_seed_perturbation(seed: &SeedGraph, p_mod: f64, rng: &mut impl Rng) -> BoolMatrix {
    let mut m = seed.matrix.clone();
    if p_mod > 0.0 {
        for cell in m.cells.iter_mut() {
            if rng.random_bool(p_mod) {
                *cell = !*cell;
            }
        }
    }
    m
}

/// Child offsets used to expand `parent`. Perturbation draws are keyed by the
/// parent's position so every rank that expands it sees the same children.
fn child_pattern(seed: &SeedGraph, params: &PkParams, parent: &MetaEdge) -> Vec<(u32, u32)> {
    match params.noise {
        NoiseMode::SeedPerturb(p) if p > 0.0 => {
            let mut rng = keyed_rng(
                params.master_seed,
                &[parent.iteration as u64, parent.row, parent.col],
            );
            apply_seed_perturbation(seed, p, &mut rng)
                .nonzeros()
                .into_iter()
                .map(|(r, c)| (r as u32, c as u32))
                .collect()
        }
        _ => seed.nonzeros().to_vec(),
    }
}

/// Children of `parent` at `parent.iteration + 1`, in row-major seed order.
pub fn children(seed: &SeedGraph, params: &PkParams, parent: &MetaEdge) -> Vec<MetaEdge> {
    let n0 = seed.order() as u64;
    child_pattern(seed, params, parent)
        .into_iter()
        .map(|(r, c)| MetaEdge {
            iteration: parent.iteration + 1,
            row: parent.row * n0 + r as u64,
            col: parent.col * n0 + c as u64,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpandStats {
    pub emitted: u64,
    /// Largest number of meta-edges held on the stack at once.
    pub max_stack_depth: usize,
    /// Largest sibling batch pushed, counting the initial list. Equals `e0`
    /// at most unless seed perturbation adds nonzeros.
    pub max_fanout: usize,
}

/// Upper bound on the expansion stack for `e` children per meta-edge and
/// final iteration `iterations`, starting from at most `e` meta-edges.
pub fn stack_depth_bound(e: usize, iterations: u32) -> usize {
    1 + e.saturating_sub(1) * (iterations as usize + 1)
}

/// Depth-first expansion of `initial` (popped from the back) down to
/// iteration `params.iterations`, handing final edges to `emit`.
/// Post-hoc ER-flip noise is not applied here.
pub fn expand_meta_edges<F>(
    seed: &SeedGraph,
    params: &PkParams,
    initial: Vec<MetaEdge>,
    mut emit: F,
) -> Result<ExpandStats>
where
    F: FnMut(VertexId, VertexId) -> Result<()>,
{
    seed.vertex_count(params.iterations)?;
    let last = params.iterations;
    if let Some(e) = initial.iter().find(|e| e.iteration > last) {
        return Err(Error::config(format!(
            "meta-edge at iteration {} is past the final iteration {last}",
            e.iteration
        )));
    }
    let n0 = seed.order() as u64;
    let perturbed = matches!(params.noise, NoiseMode::SeedPerturb(p) if p > 0.0);
    let mut stack = initial;
    let mut stats = ExpandStats {
        emitted: 0,
        max_stack_depth: stack.len(),
        max_fanout: stack.len(),
    };
    while let Some(e) = stack.pop() {
        if e.iteration == last {
            emit(e.row, e.col)?;
            stats.emitted += 1;
            continue;
        }
        let before = stack.len();
        if perturbed {
            stack.extend(children(seed, params, &e));
        } else {
            stack.extend(seed.nonzeros().iter().map(|&(r, c)| MetaEdge {
                iteration: e.iteration + 1,
                row: e.row * n0 + r as u64,
                col: e.col * n0 + c as u64,
            }));
        }
        stats.max_fanout = stats.max_fanout.max(stack.len() - before);
        stats.max_stack_depth = stats.max_stack_depth.max(stack.len());
    }
    Ok(stats)
}

/// Single-rank expansion of the whole graph (no ER-flip).
pub fn expand_serial(
    seed: &SeedGraph,
    params: &PkParams,
) -> Result<(Vec<(VertexId, VertexId)>, ExpandStats)> {
    let mut edges = Vec::new();
    let stats = expand_meta_edges(seed, params, MetaEdge::roots(seed), |u, v| {
        edges.push((u, v));
        Ok(())
    })?;
    Ok((edges, stats))
}

/// How a processor group divides the meta-edges of one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Split {
    /// More ranks than meta-edges: subgroup `j` (a rank range) owns meta-edge
    /// `j` and ignores the rest.
    Subgroups(Vec<Range<RankId>>),
    /// Rank `group.start + j` owns slice `j` of the meta-edges and expands it
    /// alone from here on.
    Slices(Vec<Range<usize>>),
}

/// `total` items cut into `parts` contiguous runs whose sizes differ by at
/// most one, larger runs first.
fn even_split(total: usize, parts: usize) -> Vec<Range<usize>> {
    let base = total / parts;
    let extra = total % parts;
    let mut start = 0;
    (0..parts)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub fn partition_groups(group: Range<RankId>, meta_edges: usize) -> Result<Split> {
    let g = group.len();
    if g == 0 {
        return Err(Error::config("empty processor group"));
    }
    if meta_edges == 0 {
        return Err(Error::config("processor group has no meta-edges to divide"));
    }
    Ok(if g > meta_edges {
        Split::Subgroups(
            even_split(g, meta_edges)
                .into_iter()
                .map(|r| group.start + r.start..group.start + r.end)
                .collect(),
        )
    } else {
        Split::Slices(even_split(meta_edges, g))
    })
}

/// The meta-edges `rank` expands on its own, derived without communication by
/// replaying the group descent from the root group `0..ranks`.
pub fn rank_work(
    rank: RankId,
    ranks: usize,
    seed: &SeedGraph,
    params: &PkParams,
) -> Result<Vec<MetaEdge>> {
    if rank >= ranks {
        return Err(Error::config(format!("rank {rank} outside 0..{ranks}")));
    }
    let mut group = 0..ranks;
    let mut list = MetaEdge::roots(seed);
    loop {
        if group.len() == 1 || list.is_empty() {
            return Ok(list);
        }
        match partition_groups(group.clone(), list.len())? {
            Split::Slices(slices) => return Ok(list[slices[rank - group.start].clone()].to_vec()),
            Split::Subgroups(subgroups) => {
                let j = subgroups
                    .iter()
                    .position(|s| s.contains(&rank))
                    .expect("subgroups cover the group");
                let meta = list[j];
                let sub = subgroups[j].clone();
                if sub.len() == 1 {
                    return Ok(vec![meta]);
                }
                if meta.iteration == params.iterations {
                    // final edge shared by several ranks: its first rank emits it
                    return Ok(if rank == sub.start {
                        vec![meta]
                    } else {
                        Vec::new()
                    });
                }
                list = children(seed, params, &meta);
                group = sub;
            }
        }
    }
}

#[derive(Debug)]
pub struct PkRun {
    /// Directed edge list in per-rank order (ER-flip additions last).
    pub graph: EdgeList,
    pub rank_stats: Vec<ExpandStats>,
}

impl PkRun {
    pub fn max_stack_depth(&self) -> usize {
        self.rank_stats
            .iter()
            .map(|s| s.max_stack_depth)
            .max()
            .unwrap_or(0)
    }

    pub fn max_fanout(&self) -> usize {
        self.rank_stats
            .iter()
            .map(|s| s.max_fanout)
            .max()
            .unwrap_or(0)
    }
}

struct PkProgram<'a> {
    seed: &'a SeedGraph,
    params: PkParams,
    ranks: usize,
}

impl RankProgram for PkProgram<'_> {
    type State = ();
    type Output = (Vec<(VertexId, VertexId)>, ExpandStats);

    fn phase_count(&self) -> usize {
        0
    }

    fn init(&self, _rank: RankId) -> Result<()> {
        Ok(())
    }

    fn step(&self, _: usize, _: RankId, _: &mut (), _: Inbox, _: &mut Outbox) -> Result<()> {
        unreachable!("PK ranks never exchange messages")
    }

    fn finish(&self, rank: RankId, _: (), _: Inbox) -> Result<Self::Output> {
        let work = rank_work(rank, self.ranks, self.seed, &self.params)?;
        let mut edges = Vec::new();
        let stats = expand_meta_edges(self.seed, &self.params, work, |u, v| {
            edges.push((u, v));
            Ok(())
        })?;
        Ok((edges, stats))
    }
}

pub fn generate_pk(
    ranks: usize,
    workers: usize,
    seed: &SeedGraph,
    params: &PkParams,
) -> Result<PkRun> {
    let vertex_count = seed.vertex_count(params.iterations)?;
    let program = PkProgram {
        seed,
        params: *params,
        ranks,
    };
    let report = transport::run_ranks(ranks, workers, &program)?;
    let (segments, rank_stats): (Vec<_>, Vec<_>) = report.outputs.into_iter().unzip();
    let mut graph = EdgeList::from_segments(segments, vertex_count, true)?;
    if let NoiseMode::ErFlip(count) = params.noise {
        let mut rng = global_rng(params.master_seed, FLIP_STREAM);
        graph = apply_er_flip(&graph, count, &mut rng);
    }
    Ok(PkRun { graph, rank_stats })
}

/// `count` uniformly sampled adjacency cells.
pub fn sample_flip_cells(
    count: u64,
    vertex_count: u64,
    rng: &mut impl Rng,
) -> Vec<(VertexId, VertexId)> {
    if vertex_count == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            (
                rng.random_range(0..vertex_count),
                rng.random_range(0..vertex_count),
            )
        })
        .collect()
}

/// XORs the adjacency of `g` with the given cells: a cell toggled an odd
/// number of times is removed if present (every copy) or added if absent.
/// Surviving edges keep their order; added cells follow in first-toggle order.
pub fn apply_flip_cells(g: &EdgeList, cells: &[(VertexId, VertexId)]) -> EdgeList {
    let mut odd: HashMap<(VertexId, VertexId), bool> = HashMap::with_capacity(cells.len());
    let mut first_seen = Vec::new();
    for &cell in cells {
        let flag = odd.entry(cell).or_insert_with(|| {
            first_seen.push(cell);
            false
        });
        *flag = !*flag;
    }
    let present: HashSet<(VertexId, VertexId)> = g
        .edges()
        .iter()
        .copied()
        .filter(|e| odd.contains_key(e))
        .collect();
    let mut edges: Vec<_> = g
        .edges()
        .iter()
        .copied()
        .filter(|e| !odd.get(e).copied().unwrap_or(false))
        .collect();
    edges.extend(
        first_seen
            .into_iter()
            .filter(|c| odd[c] && !present.contains(c)),
    );
    EdgeList::new(edges, g.vertex_count(), g.is_directed()).expect("flip cells are in range")
}

/// Samples `flip_count` cells and XORs them into `g`.
pub fn apply_er_flip(g: &EdgeList, flip_count: u64, rng: &mut impl Rng) -> EdgeList {
    let cells = sample_flip_cells(flip_count, g.vertex_count(), rng);
    apply_flip_cells(g, &cells)
}
