//! Rank-parallel scale-free graph generation.
//!
//! Two generators run over a simulated message-passing substrate
//! ([`transport`]): a two-phase preferential-attachment generator
//! ([`pba`]) and a stack-based Kronecker expander with processor groups
//! ([`pk`]). [`metrics`] characterizes the result (degree distribution,
//! power-law fit, sampled path statistics, adjacency rasters).

pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod pba;
pub mod pk;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use graph::{EdgeList, Partition, RankId, VertexId};
