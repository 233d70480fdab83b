//! Immutable digraph with a bit-packed adjacency matrix and sorted
//! out/in adjacency lists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    General,
    Oriented,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error("vertex {vertex} out of range (vertex count {count})")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("edge ({0}, {1}) is not present")]
    EdgeAbsent(usize, usize),
}

impl GraphError {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        GraphError::Invariant {
            invariant,
            detail: detail.into(),
        }
    }
}

/// Square bit matrix, one row of `words` u64 per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    size: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(size: usize) -> Self {
        let words = size.div_ceil(64).max(1);
        BitMatrix {
            size,
            words,
            bits: vec![0; words * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        let w = &mut self.bits[u * self.words + v / 64];
        if value {
            *w |= 1 << (v % 64);
        } else {
            *w &= !(1 << (v % 64));
        }
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words..(u + 1) * self.words]
    }
}

/// A digraph on vertices `0..vertex_count`. Built once, never mutated.
#[derive(Debug, Clone)]
pub struct Digraph {
    mode: Mode,
    adj: BitMatrix,
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
    edge_count: usize,
}

impl PartialEq for Digraph {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.adj == other.adj
    }
}

impl Eq for Digraph {}

impl Digraph {
    /// Builds a digraph, rejecting loops, duplicates, out-of-range endpoints
    /// and (in oriented mode) antiparallel pairs.
    pub fn from_edges(
        vertex_count: usize,
        mode: Mode,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::invariant(
                "vertex_count >= 1",
                "digraph has no vertices",
            ));
        }
        let mut adj = BitMatrix::new(vertex_count);
        let mut out = vec![Vec::new(); vertex_count];
        let mut inn = vec![Vec::new(); vertex_count];
        let mut edge_count = 0;
        for (u, v) in edges {
            for x in [u, v] {
                if x >= vertex_count {
                    return Err(GraphError::VertexOutOfRange {
                        vertex: x,
                        count: vertex_count,
                    });
                }
            }
            if u == v {
                return Err(GraphError::invariant("no loops", format!("loop at {u}")));
            }
            if adj.get(u, v) {
                return Err(GraphError::invariant(
                    "no multi-edges",
                    format!("edge ({u}, {v}) listed twice"),
                ));
            }
            if mode == Mode::Oriented && adj.get(v, u) {
                return Err(GraphError::invariant(
                    "oriented: at most one of (u,v),(v,u)",
                    format!("both ({u}, {v}) and ({v}, {u}) present"),
                ));
            }
            adj.set(u, v, true);
            out[u].push(v);
            inn[v].push(u);
            edge_count += 1;
        }
        for list in out.iter_mut().chain(inn.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Digraph {
            mode,
            adj,
            out,
            inn,
            edge_count,
        })
    }

    /// Builds from an adjacency predicate; loops are skipped.
    pub fn from_fn(vertex_count: usize, mode: Mode, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut edges = Vec::new();
        for u in 0..vertex_count {
            for v in 0..vertex_count {
                if u != v && f(u, v) {
                    edges.push((u, v));
                }
            }
        }
        Self::from_edges(vertex_count, mode, edges).expect("predicate produced an invalid digraph")
    }

    pub fn empty(vertex_count: usize, mode: Mode) -> Self {
        Self::from_edges(vertex_count, mode, []).expect("empty digraph")
    }

    pub fn complete(vertex_count: usize) -> Self {
        Self::from_fn(vertex_count, Mode::General, |_, _| true)
    }

    pub fn vertex_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn matrix(&self) -> &BitMatrix {
        &self.adj
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.vertex_count() && v < self.vertex_count() && self.adj.get(u, v)
    }

    #[inline]
    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.inn[v]
    }

    #[inline]
    pub fn out_degree(&self, v: usize) -> usize {
        self.out[v].len()
    }

    #[inline]
    pub fn in_degree(&self, v: usize) -> usize {
        self.inn[v].len()
    }

    /// `(out_degree, in_degree)` of `v`.
    pub fn degrees(&self, v: usize) -> Result<(usize, usize), GraphError> {
        if v >= self.vertex_count() {
            return Err(GraphError::VertexOutOfRange {
                vertex: v,
                count: self.vertex_count(),
            });
        }
        Ok((self.out_degree(v), self.in_degree(v)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().map(move |&v| (u, v)))
    }

    pub fn min_semidegree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.out_degree(v).min(self.in_degree(v)))
            .min()
            .unwrap_or(0)
    }

    pub fn max_semidegree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.out_degree(v).max(self.in_degree(v)))
            .max()
            .unwrap_or(0)
    }

    /// `Some(d)` when every in- and out-degree equals `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.out_degree(0);
        (0..self.vertex_count())
            .all(|v| self.out_degree(v) == d && self.in_degree(v) == d)
            .then_some(d)
    }

    /// Copy of `self` with the given edges removed (absent edges ignored).
    pub fn without_edges(&self, removed: impl IntoIterator<Item = (usize, usize)>) -> Digraph {
        let mut mask = self.adj.clone();
        for (u, v) in removed {
            if u < mask.size() && v < mask.size() {
                mask.set(u, v, false);
            }
        }
        let edges: Vec<_> = self.edges().filter(|&(u, v)| mask.get(u, v)).collect();
        Digraph::from_edges(self.vertex_count(), self.mode, edges).expect("subgraph of a valid graph")
    }

    /// Spanning subgraph keeping only edges accepted by `keep`.
    pub fn filter_edges(&self, keep: impl Fn(usize, usize) -> bool) -> Digraph {
        let edges: Vec<_> = self.edges().filter(|&(u, v)| keep(u, v)).collect();
        Digraph::from_edges(self.vertex_count(), self.mode, edges).expect("subgraph of a valid graph")
    }

    /// Subgraph induced on `vertices`, relabelled to `0..vertices.len()` in
    /// the given order.
    pub fn induced(&self, vertices: &[usize]) -> Digraph {
        let mut local = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &u) in vertices.iter().enumerate() {
            for &v in self.out_neighbors(u) {
                if local[v] != usize::MAX {
                    edges.push((i, local[v]));
                }
            }
        }
        Digraph::from_edges(vertices.len().max(1), self.mode, edges).expect("induced subgraph")
    }

    /// Relabels vertex `v` to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Digraph {
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Digraph::from_edges(self.vertex_count(), self.mode, edges).expect("relabelled graph")
    }

    /// Checks that `cycle` is a Hamilton cycle of this digraph.
    pub fn is_hamilton_cycle(&self, cycle: &[usize]) -> bool {
        let m = self.vertex_count();
        if cycle.len() != m {
            return false;
        }
        let mut seen = vec![false; m];
        for &v in cycle {
            if v >= m || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        (0..m).all(|i| self.has_edge(cycle[i], cycle[(i + 1) % m]))
    }
}

/// Consecutive edges of a closed vertex sequence.
pub fn cycle_edges(cycle: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let m = cycle.len();
    (0..m).map(move |i| (cycle[i], cycle[(i + 1) % m]))
}
