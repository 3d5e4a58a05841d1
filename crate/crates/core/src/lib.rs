//! Classical and avoidance Markov metrics on weighted directed graphs,
//! and node pivotality ranking built on top of them.
//!
//! The crate models a random walk over a graph (`graph`, `chain`), computes
//! the classical absorbing-chain quantities (`classical`), extends them to
//! walks conditioned on avoiding or transiting a set of nodes
//! (`avoidance`), and ranks nodes by how pivotal they are for one
//! source-to-target reachability (`pivotality`). Two independent oracles
//! (`oracle`) and a numerical identity suite (`identities`) verify the
//! closed forms; `netgen` provides the bundled example topologies and
//! seeded random corpora.

pub mod avoidance;
pub mod chain;
pub mod classical;
pub mod error;
pub mod flow;
pub mod graph;
pub mod identities;
pub mod netgen;
pub mod oracle;
pub mod pivotality;
pub mod shortest;

pub use avoidance::{AvoidanceQuery, AvoidanceResult};
pub use chain::{build_chain, partition, Chain, ChainPartition};
pub use classical::{fundamental_matrix, AbsorptionMatrix, FundamentalMatrix};
pub use error::{Error, Result};
pub use graph::{load_graph, Graph, GraphFormat};
pub use pivotality::{rank, Metric, PivotalityReport};
