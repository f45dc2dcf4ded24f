//! Edge-list graph representation and the vertex-to-rank block partition.

use crate::{Error, Result};

/// Global vertex index.
pub type VertexId = u64;

/// Logical rank (the "processor" of the generators).
pub type RankId = usize;

/// Contiguous-block assignment of `ranks * vertices_per_rank` vertices to ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Partition {
    ranks: usize,
    vertices_per_rank: u64,
}

impl Partition {
    pub fn new(ranks: usize, vertices_per_rank: u64) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::config("partition needs at least one rank"));
        }
        if vertices_per_rank == 0 {
            return Err(Error::config(
                "partition needs at least one vertex per rank",
            ));
        }
        (ranks as u64)
            .checked_mul(vertices_per_rank)
            .ok_or_else(|| Error::Size("vertex count overflows u64".into()))?;
        Ok(Partition {
            ranks,
            vertices_per_rank,
        })
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub fn vertices_per_rank(&self) -> u64 {
        self.vertices_per_rank
    }

    pub fn vertex_count(&self) -> u64 {
        self.ranks as u64 * self.vertices_per_rank
    }

    pub fn owner_of(&self, v: VertexId) -> Result<RankId> {
        self.check(v)?;
        Ok((v / self.vertices_per_rank) as RankId)
    }

    pub fn local_index(&self, v: VertexId) -> Result<u64> {
        self.check(v)?;
        Ok(v % self.vertices_per_rank)
    }

    /// First global vertex id owned by `rank`.
    pub fn first_vertex(&self, rank: RankId) -> VertexId {
        rank as u64 * self.vertices_per_rank
    }

    fn check(&self, v: VertexId) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`Partition::owner_of`].
pub fn owner_of(v: VertexId, partition: &Partition) -> Result<RankId> {
    partition.owner_of(v)
}

/// A (multi)graph stored as an edge sequence.
///
/// Duplicate pairs and self-loops are kept. Edges produced by the generators
/// are laid out in per-rank order; `rank_edge_counts` records the segment
/// lengths when known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<(VertexId, VertexId)>,
    vertex_count: u64,
    directed: bool,
    rank_edge_counts: Vec<usize>,
}

impl EdgeList {
    pub fn new(
        edges: Vec<(VertexId, VertexId)>,
        vertex_count: u64,
        directed: bool,
    ) -> Result<Self> {
        if let Some(&(u, v)) = edges
            .iter()
            .find(|&&(u, v)| u >= vertex_count || v >= vertex_count)
        {
            return Err(Error::VertexOutOfRange {
                vertex: u.max(v),
                vertex_count,
            });
        }
        let len = edges.len();
        Ok(EdgeList {
            edges,
            vertex_count,
            directed,
            rank_edge_counts: vec![len],
        })
    }

    /// Concatenates per-rank segments in rank order.
    pub fn from_segments(
        segments: Vec<Vec<(VertexId, VertexId)>>,
        vertex_count: u64,
        directed: bool,
    ) -> Result<Self> {
        let counts: Vec<usize> = segments.iter().map(Vec::len).collect();
        let mut edges = Vec::with_capacity(counts.iter().sum());
        for seg in segments {
            edges.extend(seg);
        }
        let mut g = EdgeList::new(edges, vertex_count, directed)?;
        g.rank_edge_counts = counts;
        Ok(g)
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<(VertexId, VertexId)> {
        self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vertex_count(&self) -> u64 {
        self.vertex_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn rank_edge_counts(&self) -> &[usize] {
        &self.rank_edge_counts
    }

    /// Sort-unique copy. Undirected graphs are canonicalized to `(min, max)`
    /// first so `(u, v)` and `(v, u)` collapse.
    pub fn deduped(&self) -> EdgeList {
        let mut edges: Vec<_> = if self.directed {
            self.edges.clone()
        } else {
            self.edges
                .iter()
                .map(|&(u, v)| (u.min(v), u.max(v)))
                .collect()
        };
        edges.sort_unstable();
        edges.dedup();
        let len = edges.len();
        EdgeList {
            edges,
            vertex_count: self.vertex_count,
            directed: self.directed,
            rank_edge_counts: vec![len],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owner_of_block_distribution() {
        let p = Partition::new(4, 5).unwrap();
        assert_eq!(owner_of(0, &p).unwrap(), 0);
        assert_eq!(owner_of(7, &p).unwrap(), 1);
        assert_eq!(owner_of(19, &p).unwrap(), 3);
        assert_eq!(p.local_index(7).unwrap(), 2);
        assert!(matches!(
            owner_of(20, &p),
            Err(Error::VertexOutOfRange { vertex: 20, .. })
        ));
    }

    #[test]
    fn owners_form_contiguous_runs() {
        let p = Partition::new(7, 3).unwrap();
        let owners: Vec<_> = (0..p.vertex_count())
            .map(|v| p.owner_of(v).unwrap())
            .collect();
        for (rank, run) in owners.chunks(3).enumerate() {
            assert!(run.iter().all(|&o| o == rank));
        }
    }

    #[test]
    fn rejects_out_of_range_edges() {
        assert!(EdgeList::new(vec![(0, 3)], 3, false).is_err());
        assert!(EdgeList::new(vec![(0, 2)], 3, false).is_ok());
    }

    #[test]
    fn dedupe_canonicalizes_undirected() {
        let g = EdgeList::new(vec![(1, 0), (0, 1), (2, 2), (2, 2)], 3, false).unwrap();
        assert_eq!(g.deduped().edges(), &[(0, 1), (2, 2)]);
        let d = EdgeList::new(vec![(1, 0), (0, 1), (0, 1)], 3, true).unwrap();
        assert_eq!(d.deduped().edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn segments_keep_rank_order() {
        let g = EdgeList::from_segments(vec![vec![(0, 1)], vec![], vec![(2, 0), (2, 1)]], 3, false)
            .unwrap();
        assert_eq!(g.edges(), &[(0, 1), (2, 0), (2, 1)]);
        assert_eq!(g.rank_edge_counts(), &[1, 0, 2]);
    }
}
