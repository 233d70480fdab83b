//! Balanced tripartitions with the block vertex convention: class `i`
//! (0-based) is `[i*n, (i+1)*n)`.

use serde::{Deserialize, Serialize};

use crate::digraph::{Digraph, GraphError, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tripartition {
    n: usize,
}

impl Tripartition {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "class size must be positive");
        Tripartition { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        3 * self.n
    }

    /// Class index in `0..3`.
    #[inline]
    pub fn class_of(&self, v: usize) -> usize {
        v / self.n
    }

    #[inline]
    pub fn index_in_class(&self, v: usize) -> usize {
        v % self.n
    }

    #[inline]
    pub fn vertex(&self, class: usize, index: usize) -> usize {
        class * self.n + index
    }

    pub fn class(&self, class: usize) -> std::ops::Range<usize> {
        class * self.n..(class + 1) * self.n
    }

    /// Clockwise means V1→V2, V2→V3 or V3→V1.
    #[inline]
    pub fn is_clockwise(&self, u: usize, v: usize) -> bool {
        (self.class_of(u) + 1) % 3 == self.class_of(v)
    }

    #[inline]
    pub fn is_counterclockwise(&self, u: usize, v: usize) -> bool {
        (self.class_of(v) + 1) % 3 == self.class_of(u)
    }

    pub fn edge_class(&self, u: usize, v: usize) -> Option<EdgeClass> {
        if self.is_clockwise(u, v) {
            Some(EdgeClass::Clockwise)
        } else if self.is_counterclockwise(u, v) {
            Some(EdgeClass::Counterclockwise)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    Clockwise,
    Counterclockwise,
}

/// Balanced tripartite digraph; only cross-class edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripartiteDigraph {
    graph: Digraph,
    parts: Tripartition,
}

impl TripartiteDigraph {
    pub fn new(graph: Digraph, n: usize) -> Result<Self, GraphError> {
        if n == 0 || graph.vertex_count() != 3 * n {
            return Err(GraphError::invariant(
                "balanced tripartition",
                format!(
                    "vertex count {} is not 3n for n = {n}",
                    graph.vertex_count()
                ),
            ));
        }
        let parts = Tripartition::new(n);
        if let Some((u, v)) = graph
            .edges()
            .find(|&(u, v)| parts.class_of(u) == parts.class_of(v))
        {
            return Err(GraphError::invariant(
                "no edge inside a class",
                format!("edge ({u}, {v}) lies inside class {}", parts.class_of(u)),
            ));
        }
        Ok(TripartiteDigraph { graph, parts })
    }

    pub fn from_edges(
        n: usize,
        mode: Mode,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(Digraph::from_edges(3 * n, mode, edges)?, n)
    }

    pub fn complete(n: usize) -> Self {
        let p = Tripartition::new(n);
        let g = Digraph::from_fn(3 * n, Mode::General, |u, v| p.class_of(u) != p.class_of(v));
        TripartiteDigraph { graph: g, parts: p }
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn parts(&self) -> Tripartition {
        self.parts
    }

    pub fn n(&self) -> usize {
        self.parts.n()
    }

    pub fn into_graph(self) -> Digraph {
        self.graph
    }
}

/// Orientation of the complete tripartite graph K₃(n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripartiteTournament {
    inner: TripartiteDigraph,
}

impl TripartiteTournament {
    pub fn new(graph: Digraph, n: usize) -> Result<Self, GraphError> {
        if graph.mode() != Mode::Oriented {
            return Err(GraphError::invariant(
                "tournament mode is oriented",
                "graph was built in general mode",
            ));
        }
        let inner = TripartiteDigraph::new(graph, n)?;
        let expected = 3 * n * n;
        if inner.graph.edge_count() != expected {
            let p = inner.parts;
            let g = &inner.graph;
            for u in 0..3 * n {
                for v in u + 1..3 * n {
                    if p.class_of(u) != p.class_of(v) && !g.has_edge(u, v) && !g.has_edge(v, u) {
                        return Err(GraphError::invariant(
                            "orientation-complete",
                            format!("cross-class pair {{{u}, {v}}} carries no edge"),
                        ));
                    }
                }
            }
        }
        Ok(TripartiteTournament { inner })
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(Digraph::from_edges(3 * n, Mode::Oriented, edges)?, n)
    }

    /// Builds from a predicate deciding whether cross pair (u,v) is oriented u→v.
    pub fn from_orientation(n: usize, forward: impl Fn(usize, usize) -> bool) -> Self {
        let p = Tripartition::new(n);
        let mut edges = Vec::with_capacity(3 * n * n);
        for u in 0..3 * n {
            for v in u + 1..3 * n {
                if p.class_of(u) != p.class_of(v) {
                    if forward(u, v) {
                        edges.push((u, v));
                    } else {
                        edges.push((v, u));
                    }
                }
            }
        }
        Self::from_edges(n, edges).expect("orientation is a tournament")
    }

    pub fn graph(&self) -> &Digraph {
        &self.inner.graph
    }

    pub fn parts(&self) -> Tripartition {
        self.inner.parts
    }

    pub fn n(&self) -> usize {
        self.inner.parts.n()
    }

    pub fn as_tripartite(&self) -> &TripartiteDigraph {
        &self.inner
    }

    pub fn is_regular(&self) -> bool {
        self.graph().regular_degree() == Some(self.n())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.graph().has_edge(u, v)
    }

    pub fn classify_edge(&self, u: usize, v: usize) -> Result<EdgeClass, GraphError> {
        if !self.has_edge(u, v) {
            return Err(GraphError::EdgeAbsent(u, v));
        }
        Ok(self.parts().edge_class(u, v).expect("cross-class edge"))
    }

    /// Reverses the listed edges; each must be present.
    pub fn reverse_edges(&self, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let g = self.graph();
        let mut flip = crate::digraph::BitMatrix::new(g.vertex_count());
        for &(u, v) in edges {
            if !g.has_edge(u, v) {
                return Err(GraphError::EdgeAbsent(u, v));
            }
            flip.set(u, v, true);
        }
        let new_edges: Vec<_> = g
            .edges()
            .map(|(u, v)| if flip.get(u, v) { (v, u) } else { (u, v) })
            .collect();
        Self::from_edges(self.n(), new_edges)
    }

    /// Relabels by the class permutation `sigma`: vertex at index j of
    /// class `sigma[r]` becomes vertex j of class r.
    pub fn permute_classes(&self, sigma: [usize; 3]) -> (Self, Vec<usize>) {
        let perm = class_permutation_map(self.n(), sigma);
        let g = self.graph().relabel(&perm);
        (
            Self::new(g, self.n()).expect("relabelled tournament"),
            perm,
        )
    }
}

/// Vertex map sending class `sigma[r]` onto block `r`.
pub fn class_permutation_map(n: usize, sigma: [usize; 3]) -> Vec<usize> {
    let mut perm = vec![0; 3 * n];
    for (r, &c) in sigma.iter().enumerate() {
        for j in 0..n {
            perm[c * n + j] = r * n + j;
        }
    }
    perm
}

/// Six-way census `e(V_i, V_j)` of an edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BipartiteCounts {
    pub counts: [[usize; 3]; 3],
}

impl BipartiteCounts {
    pub fn measure(parts: Tripartition, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut counts = [[0; 3]; 3];
        for (u, v) in edges {
            counts[parts.class_of(u)][parts.class_of(v)] += 1;
        }
        BipartiteCounts { counts }
    }

    pub fn get(&self, from: usize, to: usize) -> usize {
        self.counts[from][to]
    }

    pub fn clockwise(&self) -> [usize; 3] {
        [self.counts[0][1], self.counts[1][2], self.counts[2][0]]
    }

    pub fn counterclockwise(&self) -> [usize; 3] {
        [self.counts[1][0], self.counts[2][1], self.counts[0][2]]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn clockwise_balanced(&self) -> bool {
        let c = self.clockwise();
        c[0] == c[1] && c[1] == c[2]
    }

    pub fn counterclockwise_balanced(&self) -> bool {
        let c = self.counterclockwise();
        c[0] == c[1] && c[1] == c[2]
    }

    pub fn bidirectionally_balanced(&self) -> bool {
        self.clockwise_balanced() && self.counterclockwise_balanced()
    }
}

/// Census of an edge subset of `t`; every edge must lie in `t`.
pub fn bipartite_counts(
    t: &TripartiteTournament,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Result<BipartiteCounts, GraphError> {
    let edges: Vec<_> = edges.into_iter().collect();
    if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| !t.has_edge(u, v)) {
        return Err(GraphError::EdgeAbsent(u, v));
    }
    Ok(BipartiteCounts::measure(t.parts(), edges))
}

/// `|E(G) △ E(H)|`.
pub fn edit_distance(g: &TripartiteTournament, h: &TripartiteTournament) -> Result<usize, GraphError> {
    if g.n() != h.n() {
        return Err(GraphError::invariant(
            "identical tripartition",
            format!("class sizes {} and {}", g.n(), h.n()),
        ));
    }
    Ok(digraph_edit_distance(g.graph(), h.graph()))
}

pub(crate) fn digraph_edit_distance(g: &Digraph, h: &Digraph) -> usize {
    let only_g = g.edges().filter(|&(u, v)| !h.has_edge(u, v)).count();
    let only_h = h.edges().filter(|&(u, v)| !g.has_edge(u, v)).count();
    only_g + only_h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{blowup_c3, gen_t_triangle};

    #[test]
    fn classify() {
        let t = gen_t_triangle(3);
        assert_eq!(t.classify_edge(0, 4).unwrap(), EdgeClass::Clockwise);
        assert_eq!(t.classify_edge(3, 0).unwrap(), EdgeClass::Counterclockwise);
        assert_eq!(t.classify_edge(0, 6).unwrap(), EdgeClass::Counterclockwise);
        assert!(t.classify_edge(0, 3).is_err());
        assert!(t.classify_edge(0, 1).is_err());
    }

    #[test]
    fn counts_of_hamilton_cycle() {
        let t = blowup_c3(3);
        let cycle = [0, 3, 6, 1, 4, 7, 2, 5, 8];
        let c = bipartite_counts(&t, crate::digraph::cycle_edges(&cycle)).unwrap();
        assert_eq!(c.clockwise(), [3, 3, 3]);
        assert_eq!(c.counterclockwise(), [0, 0, 0]);
        assert!(c.bidirectionally_balanced());
        let e = bipartite_counts(&t, []).unwrap();
        assert_eq!(e.total(), 0);
        assert!(e.bidirectionally_balanced());
    }

    #[test]
    fn distances() {
        let c = blowup_c3(4);
        let t = gen_t_triangle(4);
        assert_eq!(edit_distance(&c, &c).unwrap(), 0);
        assert_eq!(edit_distance(&c, &t).unwrap(), 6);
        assert!(edit_distance(&c, &blowup_c3(3)).is_err());
    }

    #[test]
    fn rejects_incomplete_or_intra_class() {
        assert!(TripartiteTournament::from_edges(1, [(0, 1), (1, 2)]).is_err());
        assert!(TripartiteDigraph::from_edges(2, Mode::General, [(0, 1)]).is_err());
    }
}
