//! Degree-≤1 edge structures stored as successor/predecessor arrays.

use crate::digraph::GraphError;

pub const ABSENT: usize = usize::MAX;

/// Vertex-disjoint directed paths over the universe `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearForest {
    succ: Vec<usize>,
    pred: Vec<usize>,
    edges: usize,
}

impl LinearForest {
    pub fn new(vertex_count: usize) -> Self {
        LinearForest {
            succ: vec![ABSENT; vertex_count],
            pred: vec![ABSENT; vertex_count],
            edges: 0,
        }
    }

    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut f = Self::new(vertex_count);
        for (u, v) in edges {
            f.add_edge(u, v)?;
        }
        Ok(f)
    }

    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }

    pub fn succ(&self, v: usize) -> Option<usize> {
        (self.succ[v] != ABSENT).then_some(self.succ[v])
    }

    pub fn pred(&self, v: usize) -> Option<usize> {
        (self.pred[v] != ABSENT).then_some(self.pred[v])
    }

    pub fn out_degree(&self, v: usize) -> usize {
        usize::from(self.succ[v] != ABSENT)
    }

    pub fn in_degree(&self, v: usize) -> usize {
        usize::from(self.pred[v] != ABSENT)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.succ[u] == v
    }

    /// True when `v` is incident with an edge.
    pub fn covers(&self, v: usize) -> bool {
        self.succ[v] != ABSENT || self.pred[v] != ABSENT
    }

    /// Internal vertex: in- and out-degree both 1.
    pub fn is_internal(&self, v: usize) -> bool {
        self.succ[v] != ABSENT && self.pred[v] != ABSENT
    }

    /// Adds `u→v`, keeping degrees ≤ 1 and the structure acyclic.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        let m = self.vertex_count();
        for x in [u, v] {
            if x >= m {
                return Err(GraphError::VertexOutOfRange { vertex: x, count: m });
            }
        }
        if u == v {
            return Err(GraphError::invariant("no loops", format!("loop at {u}")));
        }
        if self.succ[u] != ABSENT {
            return Err(GraphError::invariant(
                "out-degree <= 1",
                format!("{u} already has successor {}", self.succ[u]),
            ));
        }
        if self.pred[v] != ABSENT {
            return Err(GraphError::invariant(
                "in-degree <= 1",
                format!("{v} already has predecessor {}", self.pred[v]),
            ));
        }
        if self.path_end(v) == u {
            return Err(GraphError::invariant(
                "acyclic",
                format!("edge ({u}, {v}) closes a cycle"),
            ));
        }
        self.succ[u] = v;
        self.pred[v] = u;
        self.edges += 1;
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        if u >= self.vertex_count() || self.succ[u] != v {
            return Err(GraphError::EdgeAbsent(u, v));
        }
        self.succ[u] = ABSENT;
        self.pred[v] = ABSENT;
        self.edges -= 1;
        Ok(())
    }

    /// Last vertex of the path through `v`.
    pub fn path_end(&self, mut v: usize) -> usize {
        while self.succ[v] != ABSENT {
            v = self.succ[v];
        }
        v
    }

    pub fn path_start(&self, mut v: usize) -> usize {
        while self.pred[v] != ABSENT {
            v = self.pred[v];
        }
        v
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != ABSENT)
            .map(|(u, &s)| (u, s))
    }

    /// Paths with at least one edge, each listed from startpoint to endpoint.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for v in 0..self.vertex_count() {
            if self.pred[v] == ABSENT && self.succ[v] != ABSENT {
                let mut path = vec![v];
                let mut x = v;
                while self.succ[x] != ABSENT {
                    x = self.succ[x];
                    path.push(x);
                }
                out.push(path);
            }
        }
        out
    }

    /// V(F): vertices incident with at least one edge.
    pub fn vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.covers(v)).collect()
    }

    /// Full structural check, used by audits.
    pub fn check(&self) -> Result<(), GraphError> {
        let m = self.vertex_count();
        let mut count = 0;
        for u in 0..m {
            if self.succ[u] != ABSENT {
                count += 1;
                if self.pred[self.succ[u]] != u {
                    return Err(GraphError::invariant("succ/pred consistency", format!("at {u}")));
                }
            }
        }
        if count != self.edges {
            return Err(GraphError::invariant("edge count", "cached count drifted"));
        }
        let mut state = vec![0u8; m];
        for v in 0..m {
            if state[v] != 0 {
                continue;
            }
            let mut x = v;
            let mut trail = Vec::new();
            while x != ABSENT && state[x] == 0 {
                state[x] = 1;
                trail.push(x);
                x = self.succ[x];
            }
            if x != ABSENT && state[x] == 1 {
                return Err(GraphError::invariant("acyclic", format!("cycle through {x}")));
            }
            for t in trail {
                state[t] = 2;
            }
        }
        Ok(())
    }
}

/// A spanning 1-regular subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CycleFactor {
    succ: Vec<usize>,
}

impl CycleFactor {
    /// `succ[v]` is the out-neighbour of `v`; must be a permutation without
    /// fixed points.
    pub fn from_successors(succ: Vec<usize>) -> Result<Self, GraphError> {
        let m = succ.len();
        let mut hit = vec![false; m];
        for (v, &s) in succ.iter().enumerate() {
            if s >= m {
                return Err(GraphError::VertexOutOfRange { vertex: s, count: m });
            }
            if s == v {
                return Err(GraphError::invariant("no loops", format!("loop at {v}")));
            }
            if hit[s] {
                return Err(GraphError::invariant(
                    "1-regular",
                    format!("{s} has in-degree above 1"),
                ));
            }
            hit[s] = true;
        }
        Ok(CycleFactor { succ })
    }

    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut succ = vec![ABSENT; vertex_count];
        for (u, v) in edges {
            if u >= vertex_count {
                return Err(GraphError::VertexOutOfRange {
                    vertex: u,
                    count: vertex_count,
                });
            }
            if succ[u] != ABSENT {
                return Err(GraphError::invariant("1-regular", format!("{u} has out-degree above 1")));
            }
            succ[u] = v;
        }
        if let Some(v) = succ.iter().position(|&s| s == ABSENT) {
            return Err(GraphError::invariant("1-regular", format!("{v} has out-degree 0")));
        }
        Self::from_successors(succ)
    }

    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn succ(&self, v: usize) -> usize {
        self.succ[v]
    }

    pub fn successors(&self) -> &[usize] {
        &self.succ
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().map(|(u, &v)| (u, v))
    }

    /// Cycles, each starting at its smallest vertex, ordered by that vertex.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let m = self.vertex_count();
        let mut seen = vec![false; m];
        let mut out = Vec::new();
        for v in 0..m {
            if seen[v] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = v;
            while !seen[x] {
                seen[x] = true;
                cycle.push(x);
                x = self.succ[x];
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forest_rejects_cycles_and_degree_two() {
        let mut f = LinearForest::new(4);
        f.add_edge(0, 1).unwrap();
        f.add_edge(1, 2).unwrap();
        assert!(f.add_edge(2, 0).is_err());
        assert!(f.add_edge(0, 3).is_err());
        assert!(f.add_edge(3, 2).is_err());
        f.add_edge(2, 3).unwrap();
        assert_eq!(f.paths(), vec![vec![0, 1, 2, 3]]);
        f.remove_edge(1, 2).unwrap();
        assert_eq!(f.paths(), vec![vec![0, 1], vec![2, 3]]);
        f.check().unwrap();
    }

    #[test]
    fn factor_cycles() {
        let f = CycleFactor::from_successors(vec![1, 0, 3, 4, 2]).unwrap();
        assert_eq!(f.cycles(), vec![vec![0, 1], vec![2, 3, 4]]);
        assert!(CycleFactor::from_successors(vec![1, 1]).is_err());
        assert!(CycleFactor::from_edges(3, [(0, 1), (1, 0)]).is_err());
    }

    proptest! {
        #[test]
        fn deleting_any_edge_keeps_a_linear_forest(perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(), cuts in proptest::collection::vec(any::<bool>(), 11), pick in 0usize..11) {
            let mut f = LinearForest::new(12);
            for i in 0..11 {
                if !cuts[i] {
                    f.add_edge(perm[i], perm[i + 1]).unwrap();
                }
            }
            let edges: Vec<_> = f.edges().collect();
            if !edges.is_empty() {
                let (u, v) = edges[pick % edges.len()];
                f.remove_edge(u, v).unwrap();
            }
            prop_assert!(f.check().is_ok());
        }
    }
}
