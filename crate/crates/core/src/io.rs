//! JSON graph format `{"n", "mode", "edges"}` with the block vertex
//! convention.

use serde::{Deserialize, Serialize};

use crate::digraph::{Digraph, GraphError, Mode};
use crate::tripartite::{TripartiteDigraph, TripartiteTournament};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub n: usize,
    pub mode: Mode,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl LoadError {
    /// Name of the violated invariant, when the error is structural.
    pub fn invariant(&self) -> Option<&'static str> {
        match self {
            LoadError::Graph(GraphError::Invariant { invariant, .. }) => Some(invariant),
            LoadError::Graph(GraphError::VertexOutOfRange { .. }) => Some("vertex in range"),
            _ => None,
        }
    }
}

impl GraphDoc {
    pub fn from_digraph(g: &Digraph, n: usize) -> Self {
        GraphDoc {
            n,
            mode: g.mode(),
            edges: g.edges().map(|(u, v)| [u, v]).collect(),
        }
    }

    pub fn to_tripartite(&self) -> Result<TripartiteDigraph, GraphError> {
        TripartiteDigraph::from_edges(self.n, self.mode, self.edges.iter().map(|e| (e[0], e[1])))
    }

    pub fn to_tournament(&self) -> Result<TripartiteTournament, GraphError> {
        if self.mode != Mode::Oriented {
            return Err(GraphError::invariant(
                "tournament mode is oriented",
                "document declares general mode",
            ));
        }
        let g = Digraph::from_edges(3 * self.n, self.mode, self.edges.iter().map(|e| (e[0], e[1])))?;
        TripartiteTournament::new(g, self.n)
    }
}

pub fn parse_graph(text: &str) -> Result<GraphDoc, LoadError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_tripartite(text: &str) -> Result<TripartiteDigraph, LoadError> {
    Ok(parse_graph(text)?.to_tripartite()?)
}

pub fn load_tournament(text: &str) -> Result<TripartiteTournament, LoadError> {
    Ok(parse_graph(text)?.to_tournament()?)
}

pub fn to_json(g: &Digraph, n: usize) -> String {
    serde_json::to_string(&GraphDoc::from_digraph(g, n)).expect("graph serializes")
}
