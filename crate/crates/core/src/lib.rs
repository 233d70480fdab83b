//! Hamilton cycle packings in regular tripartite tournaments and dense
//! regular tripartite digraphs.

pub mod decomposer;
pub mod digraph;
pub mod expansion;
pub mod factorization;
pub mod flow;
pub mod matching;
pub mod oracle;
pub mod forest;
pub mod forests;
pub mod generators;
pub mod hamiltonicity;
pub mod io;
pub mod rational;
pub mod seed;
pub mod structure;
pub mod tripartite;

pub use digraph::{Digraph, GraphError, Mode};
pub use forest::{CycleFactor, LinearForest};
pub use seed::Seed;
pub use tripartite::{EdgeClass, Tripartition, TripartiteDigraph, TripartiteTournament};
