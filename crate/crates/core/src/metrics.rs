//! Graph characterization: degree distribution, log-binned power-law fit,
//! BFS-sampled path statistics and adjacency rasters.
//!
//! Everything except the raster works on the symmetrized simple graph:
//! direction is dropped, duplicate edges collapse, and a self-loop counts two
//! towards its vertex's degree.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::graph::{EdgeList, VertexId};
use crate::{Error, Result};

/// Undirected simple graph in CSR form. Self-loops are tracked separately and
/// never appear in the neighbor lists.
#[derive(Clone, Debug)]
pub struct SimpleGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    self_loop: Vec<bool>,
    edge_count: u64,
}

impl SimpleGraph {
    pub fn from_edge_list(g: &EdgeList) -> Result<Self> {
        let n = usize::try_from(g.vertex_count())
            .ok()
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| {
                Error::Size(format!(
                    "{} vertices exceed the metrics limit",
                    g.vertex_count()
                ))
            })?;
        let mut pairs: Vec<(u32, u32)> = g
            .edges()
            .iter()
            .map(|&(u, v)| (u.min(v) as u32, u.max(v) as u32))
            .collect();
        pairs.par_sort_unstable();
        pairs.dedup();

        let mut self_loop = vec![false; n];
        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            if u == v {
                self_loop[u as usize] = true;
            } else {
                degree[u as usize] += 1;
                degree[v as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; *offsets.last().unwrap()];
        for &(u, v) in pairs.iter().filter(|(u, v)| u != v) {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        Ok(SimpleGraph {
            offsets,
            neighbors,
            self_loop,
            edge_count: pairs.len() as u64,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.self_loop.len()
    }

    /// Undirected simple edges, self-loops included.
    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn self_loop_count(&self) -> usize {
        self.self_loop.iter().filter(|&&l| l).count()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> u64 {
        self.neighbors(v).len() as u64 + 2 * u64::from(self.self_loop[v])
    }
}

/// Sparse degree histogram, ascending degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeHistogram {
    entries: Vec<(u64, u64)>,
}

impl DegreeHistogram {
    pub fn from_entries(mut entries: Vec<(u64, u64)>) -> Self {
        entries.retain(|&(_, c)| c > 0);
        entries.sort_unstable();
        DegreeHistogram { entries }
    }

    /// `(degree, vertex count)` pairs.
    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn vertex_total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    pub fn degree_total(&self) -> u64 {
        self.entries.iter().map(|&(k, c)| k * c).sum()
    }

    pub fn max_degree(&self) -> u64 {
        self.entries.last().map_or(0, |&(k, _)| k)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,count")?;
        for &(k, c) in &self.entries {
            writeln!(out, "{k},{c}")?;
        }
        Ok(())
    }
}

pub fn degree_distribution(g: &SimpleGraph) -> DegreeHistogram {
    let mut counts = std::collections::BTreeMap::new();
    for v in 0..g.vertex_count() {
        *counts.entry(g.degree(v)).or_insert(0u64) += 1;
    }
    DegreeHistogram {
        entries: counts.into_iter().collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub gamma: f64,
    /// Natural-log intercept of the fitted line.
    pub intercept: f64,
    pub r2: f64,
    pub bins_used: usize,
}

/// Least-squares line through the log-binned degree density.
///
/// Degree `k >= 1` falls in bin `floor(log2 k)`, covering `[2^b, 2^(b+1))`.
/// A bin's density is its vertex count divided by the number of integer
/// degrees it spans; its abscissa is the geometric mean of the smallest and
/// largest degree it spans. Bins below the densest one are left out, since
/// a sparse bin under the minimum degree says nothing about the tail. `gamma`
/// is the negated slope in log-log space.
pub fn fit_power_law(h: &DegreeHistogram) -> Result<PowerLawFit> {
    let mut bins: Vec<(u32, u64)> = Vec::new();
    for &(k, c) in h.entries().iter().filter(|&&(k, c)| k > 0 && c > 0) {
        let b = k.ilog2();
        match bins.last_mut() {
            Some((last, total)) if *last == b => *total += c,
            _ => bins.push((b, c)),
        }
    }
    let mut points: Vec<(f64, f64)> = bins
        .iter()
        .map(|&(b, c)| {
            let lo = (1u64 << b) as f64;
            let hi = lo * 2.0 - 1.0;
            ((lo * hi).sqrt().ln(), (c as f64 / lo).ln())
        })
        .collect();
    let peak = points.iter().enumerate().fold(
        0,
        |best, (i, p)| if p.1 > points[best].1 { i } else { best },
    );
    points.drain(..peak);
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs 3 non-empty degree bins from the densest one, found {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(PowerLawFit {
        gamma: -slope,
        intercept,
        r2,
        bins_used: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sources {
    All,
    Sample(usize),
}

impl Sources {
    /// `max(32, ceil(|V| / 1000))`.
    pub fn default_for(vertex_count: usize) -> Sources {
        Sources::Sample(32.max(vertex_count.div_ceil(1000)))
    }
}

impl std::str::FromStr for Sources {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Sources::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Sources::Sample(n)),
            _ => Err(Error::config(format!(
                "bad source count {s:?} (expected a positive integer or all)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStats {
    /// Mean finite distance over (source, reached vertex) pairs; NaN if none.
    pub avg_path_length: f64,
    /// Largest finite distance observed (a lower bound on the diameter).
    pub diameter_estimate: u64,
    pub sources_sampled: usize,
    pub pairs_sampled: u64,
    pub unreachable_pairs: u64,
}

#[derive(Clone, Copy, Default)]
struct BfsTally {
    distance_sum: u64,
    pairs: u64,
    max: u64,
    unreachable: u64,
}

impl BfsTally {
    fn merge(self, other: BfsTally) -> BfsTally {
        BfsTally {
            distance_sum: self.distance_sum + other.distance_sum,
            pairs: self.pairs + other.pairs,
            max: self.max.max(other.max),
            unreachable: self.unreachable + other.unreachable,
        }
    }
}

fn bfs(g: &SimpleGraph, source: usize, dist: &mut [u32], queue: &mut Vec<u32>) -> BfsTally {
    dist.fill(u32::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push(source as u32);
    let mut head = 0;
    let mut tally = BfsTally::default();
    while head < queue.len() {
        let u = queue[head] as usize;
        head += 1;
        let du = dist[u];
        for &w in g.neighbors(u) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = du + 1;
                queue.push(w);
                tally.distance_sum += (du + 1) as u64;
                tally.max = tally.max.max((du + 1) as u64);
            }
        }
    }
    tally.pairs = queue.len() as u64 - 1;
    tally.unreachable = (g.vertex_count() - queue.len()) as u64;
    tally
}

/// BFS from sampled sources. Sampled sources are a prefix of a random
/// permutation of the vertices, so a larger sample under the same RNG state
/// is a superset of a smaller one.
pub fn path_stats(g: &SimpleGraph, sources: Sources, rng: &mut impl Rng) -> Result<PathStats> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.vertex_count();
    let chosen: Vec<usize> = match sources {
        Sources::All => (0..n).collect(),
        Sources::Sample(0) => return Err(Error::config("at least one source is required")),
        Sources::Sample(s) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            order.truncate(s.min(n));
            order
        }
    };
    let tally = chosen
        .par_iter()
        .map_init(
            || (vec![u32::MAX; n], Vec::with_capacity(n)),
            |(dist, queue), &s| bfs(g, s, dist, queue),
        )
        .reduce(BfsTally::default, BfsTally::merge);
    Ok(PathStats {
        avg_path_length: if tally.pairs == 0 {
            f64::NAN
        } else {
            tally.distance_sum as f64 / tally.pairs as f64
        },
        diameter_estimate: tally.max,
        sources_sampled: chosen.len(),
        pairs_sampled: tally.pairs,
        unreachable_pairs: tally.unreachable,
    })
}

/// Edge-count density of the adjacency matrix at reduced resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    resolution: usize,
    counts: Vec<u64>,
}

impl Raster {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.resolution + col]
    }

    /// Log-scaled 8-bit intensities; empty pixels are 0, any nonempty pixel
    /// is at least 1.
    pub fn intensities(&self) -> Vec<u8> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let scale = (max as f64).ln_1p();
        self.counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    0
                } else {
                    ((255.0 * (c as f64).ln_1p() / scale).round() as u8).max(1)
                }
            })
            .collect()
    }

    /// Portable graymap: binary `P5`, or plain `P2` when `ascii`.
    pub fn write_pgm<W: Write>(&self, mut out: W, ascii: bool) -> Result<()> {
        let r = self.resolution;
        let pixels = self.intensities();
        if ascii {
            writeln!(out, "P2\n{r} {r}\n255")?;
            for row in pixels.chunks(r) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        } else {
            write!(out, "P5\n{r} {r}\n255\n")?;
            out.write_all(&pixels)?;
        }
        Ok(())
    }
}

/// Edge `(u, v)` lands on pixel `(floor(u * R / |V|), floor(v * R / |V|))`.
pub fn adjacency_raster(g: &EdgeList, resolution: usize) -> Result<Raster> {
    if resolution == 0 {
        return Err(Error::config("raster resolution must be at least 1"));
    }
    resolution
        .checked_mul(resolution)
        .filter(|&cells| cells <= 1 << 28)
        .ok_or_else(|| Error::Size(format!("raster resolution {resolution} too large")))?;
    let mut counts = vec![0u64; resolution * resolution];
    let n = g.vertex_count() as u128;
    let pixel = |v: VertexId| (v as u128 * resolution as u128 / n) as usize;
    for &(u, v) in g.edges() {
        counts[pixel(u) * resolution + pixel(v)] += 1;
    }
    Ok(Raster { resolution, counts })
}

/// Summary printed by the `metrics` command.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub vertices: u64,
    pub edges: u64,
    pub simple_edges: u64,
    pub self_loops: usize,
    pub max_degree: u64,
    pub fit: std::result::Result<PowerLawFit, String>,
    pub paths: PathStats,
}

impl MetricsReport {
    pub fn compute(
        g: &EdgeList,
        sources: Sources,
        rng: &mut impl Rng,
    ) -> Result<(Self, DegreeHistogram)> {
        let simple = SimpleGraph::from_edge_list(g)?;
        let hist = degree_distribution(&simple);
        let fit = fit_power_law(&hist).map_err(|e| e.to_string());
        let paths = path_stats(&simple, sources, rng)?;
        let report = MetricsReport {
            vertices: g.vertex_count(),
            edges: g.len() as u64,
            simple_edges: simple.edge_count(),
            self_loops: simple.self_loop_count(),
            max_degree: hist.max_degree(),
            fit,
            paths,
        };
        Ok((report, hist))
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices={}", self.vertices)?;
        writeln!(f, "edges={}", self.edges)?;
        writeln!(f, "simple_edges={}", self.simple_edges)?;
        writeln!(f, "self_loops={}", self.self_loops)?;
        writeln!(f, "max_degree={}", self.max_degree)?;
        match &self.fit {
            Ok(fit) => {
                writeln!(f, "gamma={:?}", fit.gamma)?;
                writeln!(f, "gamma_intercept={:?}", fit.intercept)?;
                writeln!(f, "gamma_r2={:?}", fit.r2)?;
                writeln!(f, "gamma_bins={}", fit.bins_used)?;
            }
            Err(reason) => {
                writeln!(f, "gamma=NA")?;
                writeln!(f, "gamma_error={reason}")?;
            }
        }
        writeln!(f, "avg_path_length={:?}", self.paths.avg_path_length)?;
        writeln!(f, "diameter={}", self.paths.diameter_estimate)?;
        writeln!(f, "sources_sampled={}", self.paths.sources_sampled)?;
        writeln!(f, "pairs_sampled={}", self.paths.pairs_sampled)?;
        writeln!(f, "unreachable_pairs={}", self.paths.unreachable_pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    fn simple(edges: &[(u64, u64)], n: u64) -> SimpleGraph {
        SimpleGraph::from_edge_list(&EdgeList::new(edges.to_vec(), n, false).unwrap()).unwrap()
    }

    #[test]
    fn triangle_and_star_histograms() {
        let tri = simple(&[(0, 1), (1, 2), (2, 0)], 3);
        assert_eq!(degree_distribution(&tri).entries(), &[(2, 3)]);
        let star = simple(&[(0, 1), (0, 2), (3, 0), (0, 4), (4, 0)], 5);
        assert_eq!(degree_distribution(&star).entries(), &[(1, 4), (4, 1)]);
    }

    #[test]
    fn self_loop_counts_two() {
        let g = simple(&[(0, 0), (0, 0), (0, 1)], 3);
        let h = degree_distribution(&g);
        assert_eq!(h.entries(), &[(0, 1), (1, 1), (3, 1)]);
        assert_eq!(h.degree_total(), 2 * g.edge_count());
        assert_eq!(h.vertex_total(), 3);
    }

    #[test]
    fn fit_needs_three_bins() {
        let h = DegreeHistogram::from_entries(vec![(4, 100)]);
        assert!(matches!(fit_power_law(&h), Err(Error::InsufficientData(_))));
        let h = DegreeHistogram::from_entries(vec![(1, 10), (2, 5), (3, 3)]);
        assert!(fit_power_law(&h).is_err());
    }

    #[test]
    fn fit_skips_bins_below_the_peak() {
        let tail: Vec<(u64, u64)> = (4..=1024u64)
            .map(|k| (k, (1e6 * (k as f64).powf(-2.5)).round() as u64))
            .filter(|&(_, c)| c > 0)
            .collect();
        let clean = fit_power_law(&DegreeHistogram::from_entries(tail.clone())).unwrap();
        let mut stray = tail;
        stray.push((3, 1));
        let fit = fit_power_law(&DegreeHistogram::from_entries(stray)).unwrap();
        assert_eq!(fit, clean);
    }

    #[test]
    fn fit_recovers_exponent() {
        let h = DegreeHistogram::from_entries(
            (1..=1024u64)
                .map(|k| (k, (1e6 * (k as f64).powf(-2.5)).round() as u64))
                .collect(),
        );
        let fit = fit_power_law(&h).unwrap();
        assert!((fit.gamma - 2.5).abs() <= 0.1, "{fit:?}");
        assert!(fit.r2 > 0.99);
    }

    #[test]
    fn path_graph_all_sources() {
        let g = simple(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5);
        let mut rng = StreamRng::seed_from_u64(0);
        let s = path_stats(&g, Sources::All, &mut rng).unwrap();
        assert_eq!(s.avg_path_length, 2.0);
        assert_eq!(s.diameter_estimate, 4);
        assert_eq!(s.pairs_sampled, 20);
        assert_eq!(s.unreachable_pairs, 0);
    }

    #[test]
    fn complete_graph() {
        let edges: Vec<_> = (0..4u64)
            .flat_map(|u| (u + 1..4).map(move |v| (u, v)))
            .collect();
        let g = simple(&edges, 4);
        let mut rng = StreamRng::seed_from_u64(0);
        let s = path_stats(&g, Sources::All, &mut rng).unwrap();
        assert_eq!((s.avg_path_length, s.diameter_estimate), (1.0, 1));
    }

    #[test]
    fn unreachable_pairs_are_counted_not_averaged() {
        let g = simple(&[(0, 1), (2, 3)], 5);
        let mut rng = StreamRng::seed_from_u64(0);
        let s = path_stats(&g, Sources::All, &mut rng).unwrap();
        assert_eq!(s.avg_path_length, 1.0);
        assert_eq!(s.pairs_sampled, 4);
        assert_eq!(s.unreachable_pairs, 20 - 4);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let g = simple(&[], 3);
        let mut rng = StreamRng::seed_from_u64(0);
        assert!(matches!(
            path_stats(&g, Sources::All, &mut rng),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn sources_parsing_and_default() {
        assert_eq!("all".parse::<Sources>().unwrap(), Sources::All);
        assert_eq!("12".parse::<Sources>().unwrap(), Sources::Sample(12));
        assert!("0".parse::<Sources>().is_err());
        assert!("some".parse::<Sources>().is_err());
        assert_eq!(Sources::default_for(1000), Sources::Sample(32));
        assert_eq!(Sources::default_for(100_001), Sources::Sample(101));
    }

    #[test]
    fn diagonal_raster() {
        let g = EdgeList::new((0..100).map(|v| (v, v)).collect(), 100, false).unwrap();
        let r = adjacency_raster(&g, 10).unwrap();
        let px = r.intensities();
        for row in 0..10 {
            for col in 0..10 {
                assert_eq!(px[row * 10 + col] > 0, row == col);
            }
        }
        assert_eq!(r.count(3, 3), 10);
        assert!(adjacency_raster(&g, 0).is_err());
    }

    #[test]
    fn pgm_headers() {
        let g = EdgeList::new(vec![(0, 1)], 2, false).unwrap();
        let r = adjacency_raster(&g, 2).unwrap();
        let mut bin = Vec::new();
        r.write_pgm(&mut bin, false).unwrap();
        assert_eq!(bin, b"P5\n2 2\n255\n\x00\xff\x00\x00");
        let mut text = Vec::new();
        r.write_pgm(&mut text, true).unwrap();
        assert_eq!(
            String::from_utf8(text).unwrap(),
            "P2\n2 2\n255\n0 255\n0 0\n"
        );
    }

    #[test]
    fn report_lines() {
        let g = EdgeList::new(vec![(0, 1), (1, 2), (2, 3), (3, 4)], 5, false).unwrap();
        let mut rng = StreamRng::seed_from_u64(0);
        let (report, hist) = MetricsReport::compute(&g, Sources::All, &mut rng).unwrap();
        let text = report.to_string();
        assert!(text.contains("avg_path_length=2.0\n"), "{text}");
        assert!(text.contains("diameter=4\n"));
        assert!(text.contains("gamma=NA\n"));
        let mut csv = Vec::new();
        hist.write_csv(&mut csv).unwrap();
        assert_eq!(csv, b"k,count\n1,2\n2,3\n");
    }
}
