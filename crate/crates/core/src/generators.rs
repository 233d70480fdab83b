//! Graph families and seeded random instances.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::digraph::{BitMatrix, Digraph, GraphError, Mode};
use crate::rational::Rational;
use crate::seed::Seed;
use crate::tripartite::{Tripartition, TripartiteDigraph, TripartiteTournament};

/// A member of 𝒢_β over the block tripartition: V1 = class 0, V2 = class 1,
/// V3 = class 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GBetaModel {
    n: usize,
    backward: Vec<bool>,
    /// `ccw.get(c, b)`: edge from the c-th vertex of V3 to the b-th of V2.
    ccw: BitMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct GBetaModelDoc {
    pub n: usize,
    pub beta: String,
    pub forward_v1: Vec<usize>,
    pub backward_v1: Vec<usize>,
    pub ccw_edges: Vec<[usize; 2]>,
}

impl GBetaModel {
    pub fn new(n: usize, backward: Vec<bool>, ccw: BitMatrix) -> Result<Self, GraphError> {
        if backward.len() != n || ccw.size() != n {
            return Err(GraphError::invariant("model dimensions", "split or ccw graph has wrong size"));
        }
        let k = backward.iter().filter(|&&b| b).count();
        if 2 * k > n {
            return Err(GraphError::invariant(
                "beta <= 1/2",
                format!("|backward V1| = {k} exceeds n/2 for n = {n}"),
            ));
        }
        for i in 0..n {
            let row = (0..n).filter(|&j| ccw.get(i, j)).count();
            let col = (0..n).filter(|&j| ccw.get(j, i)).count();
            if row != k || col != k {
                return Err(GraphError::invariant(
                    "ccw graph is beta*n-regular",
                    format!("vertex {i} has degrees ({row}, {col}), expected {k}"),
                ));
            }
        }
        Ok(GBetaModel { n, backward, ccw })
    }

    /// The β = 0 member, i.e. the blow-up C₃(n).
    pub fn c3(n: usize) -> Self {
        GBetaModel {
            n,
            backward: vec![false; n],
            ccw: BitMatrix::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> Tripartition {
        Tripartition::new(self.n)
    }

    pub fn beta_n(&self) -> usize {
        self.backward.iter().filter(|&&b| b).count()
    }

    pub fn beta(&self) -> Rational {
        Rational::new(self.beta_n() as i64, self.n as i64)
    }

    /// Whether V1 vertex `v` (global id in `0..n`) lies in ←V1.
    pub fn is_backward(&self, v: usize) -> bool {
        v < self.n && self.backward[v]
    }

    pub fn backward_flags(&self) -> &[bool] {
        &self.backward
    }

    pub fn forward_v1(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| !self.backward[v]).collect()
    }

    pub fn backward_v1(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| self.backward[v]).collect()
    }

    pub fn ccw_matrix(&self) -> &BitMatrix {
        &self.ccw
    }

    /// Edges of the counterclockwise V3→V2 graph as global vertex pairs.
    pub fn ccw_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::new();
        for c in 0..n {
            for b in 0..n {
                if self.ccw.get(c, b) {
                    out.push((2 * n + c, n + b));
                }
            }
        }
        out
    }

    /// Whether `u→v` is an edge of the model tournament G′.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let n = self.n;
        let (cu, cv) = (u / n, v / n);
        if cu == cv || u >= 3 * n || v >= 3 * n {
            return false;
        }
        match (cu, cv) {
            (0, 1) => !self.backward[u],
            (1, 0) => self.backward[v],
            (2, 0) => !self.backward[v],
            (0, 2) => self.backward[u],
            (2, 1) => self.ccw.get(u - 2 * n, v - n),
            (1, 2) => !self.ccw.get(v - 2 * n, u - n),
            _ => unreachable!(),
        }
    }

    pub fn tournament(&self) -> TripartiteTournament {
        TripartiteTournament::from_orientation(self.n, |u, v| self.has_edge(u, v))
    }

    pub fn to_doc(&self) -> GBetaModelDoc {
        let b = self.beta();
        GBetaModelDoc {
            n: self.n,
            beta: format!("{}/{}", b.numer(), b.denom()),
            forward_v1: self.forward_v1(),
            backward_v1: self.backward_v1(),
            ccw_edges: self.ccw_edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

/// Blow-up C₃(n): every edge clockwise.
pub fn blowup_c3(n: usize) -> TripartiteTournament {
    let p = Tripartition::new(n);
    TripartiteTournament::from_orientation(n, |u, v| p.is_clockwise(u, v))
}

/// C₃(n) with the triangle on the first vertex of each class reversed.
pub fn gen_t_triangle(n: usize) -> TripartiteTournament {
    blowup_c3(n)
        .reverse_edges(&[(0, n), (n, 2 * n), (2 * n, 0)])
        .expect("triangle edges present in the blow-up")
}

/// Random k-regular bipartite graph on n+n vertices: circulant, then
/// seeded 2-switches.
pub fn random_regular_bipartite(n: usize, k: usize, rng: &mut impl Rng) -> BitMatrix {
    let mut m = BitMatrix::new(n);
    let mut edges = Vec::with_capacity(n * k);
    for i in 0..n {
        for s in 0..k {
            m.set(i, (i + s) % n, true);
            edges.push((i, (i + s) % n));
        }
    }
    if k == 0 || k == n {
        return m;
    }
    for _ in 0..20 * n * n {
        let x = rng.gen_range(0..edges.len());
        let y = rng.gen_range(0..edges.len());
        let (a, b) = edges[x];
        let (c, d) = edges[y];
        if a == c || b == d || m.get(a, d) || m.get(c, b) {
            continue;
        }
        m.set(a, b, false);
        m.set(c, d, false);
        m.set(a, d, true);
        m.set(c, b, true);
        edges[x] = (a, d);
        edges[y] = (c, b);
    }
    m
}

/// A seeded member of 𝒢_β. `beta·n` must be an integer and β ≤ 1/2.
pub fn gen_gbeta(
    n: usize,
    beta: Rational,
    seed: Seed,
) -> Result<(GBetaModel, TripartiteTournament), GraphError> {
    let scaled = beta * Rational::from_integer(n as i64);
    if !scaled.is_integer() || beta < Rational::from_integer(0) || beta * 2 > Rational::from_integer(1) {
        return Err(GraphError::invariant(
            "beta*n integral, 0 <= beta <= 1/2",
            format!("beta = {beta}, n = {n}"),
        ));
    }
    let k = scaled.to_integer() as usize;
    let mut rng = seed.rng();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut backward = vec![false; n];
    for &i in &idx[..k] {
        backward[i] = true;
    }
    let ccw = random_regular_bipartite(n, k, &mut rng);
    let model = GBetaModel::new(n, backward, ccw)?;
    let t = model.tournament();
    Ok((model, t))
}

/// Applies `steps` random reversals of directed 3- or 4-cycles to C₃(n).
pub fn gen_random_regular_tournament(n: usize, seed: Seed, steps: usize) -> TripartiteTournament {
    let p = Tripartition::new(n);
    let m = 3 * n;
    let mut adj = BitMatrix::new(m);
    for u in 0..m {
        for v in 0..m {
            if p.is_clockwise(u, v) {
                adj.set(u, v, true);
            }
        }
    }
    let mut rng = seed.rng();
    let mut done = 0;
    let mut attempts = 0usize;
    let out_of = |adj: &BitMatrix, u: usize| -> Vec<usize> { (0..m).filter(|&v| adj.get(u, v)).collect() };
    while done < steps && attempts < 100 * steps + 1000 {
        attempts += 1;
        let u = rng.gen_range(0..m);
        let outs = out_of(&adj, u);
        let v = outs[rng.gen_range(0..outs.len())];
        let cycle: Vec<usize> = if rng.gen_bool(0.5) {
            let third = 3 - p.class_of(u) - p.class_of(v);
            let cands: Vec<usize> = p
                .class(third)
                .filter(|&w| adj.get(v, w) && adj.get(w, u))
                .collect();
            match cands.as_slice() {
                [] => continue,
                c => vec![u, v, c[rng.gen_range(0..c.len())]],
            }
        } else {
            let xs: Vec<usize> = out_of(&adj, v).into_iter().filter(|&x| x != u).collect();
            if xs.is_empty() {
                continue;
            }
            let x = xs[rng.gen_range(0..xs.len())];
            let ys: Vec<usize> = (0..m)
                .filter(|&y| y != v && y != u && adj.get(x, y) && adj.get(y, u))
                .collect();
            if ys.is_empty() {
                continue;
            }
            vec![u, v, x, ys[rng.gen_range(0..ys.len())]]
        };
        let len = cycle.len();
        for i in 0..len {
            let (a, b) = (cycle[i], cycle[(i + 1) % len]);
            adj.set(a, b, false);
            adj.set(b, a, true);
        }
        done += 1;
        debug_assert!((0..m).all(|w| out_of(&adj, w).len() == n));
    }
    TripartiteTournament::from_orientation(n, |u, v| adj.get(u, v))
}

/// d-regular balanced tripartite digraph built from d of the 2n shifted
/// cycle factors of the complete tripartite digraph, relabelled by a random
/// permutation triple and then mixed by degree-preserving switches.
pub fn gen_random_regular_tripartite_digraph(
    n: usize,
    d: usize,
    seed: Seed,
) -> Result<TripartiteDigraph, GraphError> {
    if n == 0 || d < n || d > 2 * n {
        return Err(GraphError::invariant(
            "n <= d <= 2n",
            format!("d = {d}, n = {n}"),
        ));
    }
    let p = Tripartition::new(n);
    let m = 3 * n;
    let mut rng = seed.rng();
    let mut factors: Vec<(bool, usize)> = (0..n).flat_map(|s| [(true, s), (false, s)]).collect();
    factors.shuffle(&mut rng);
    let perms: Vec<Vec<usize>> = (0..3)
        .map(|_| {
            let mut q: Vec<usize> = (0..n).collect();
            q.shuffle(&mut rng);
            q
        })
        .collect();
    let mut adj = BitMatrix::new(m);
    let mut edges = Vec::with_capacity(m * d);
    for &(clockwise, s) in &factors[..d] {
        for class in 0..3 {
            let target = if clockwise { (class + 1) % 3 } else { (class + 2) % 3 };
            for j in 0..n {
                let u = p.vertex(class, perms[class][j]);
                let v = p.vertex(target, perms[target][(j + s) % n]);
                adj.set(u, v, true);
                edges.push((u, v));
            }
        }
    }
    if d < 2 * n {
        for _ in 0..20 * edges.len() {
            let x = rng.gen_range(0..edges.len());
            let y = rng.gen_range(0..edges.len());
            let (a, b) = edges[x];
            let (c, e) = edges[y];
            if a == c
                || b == e
                || p.class_of(a) == p.class_of(e)
                || p.class_of(c) == p.class_of(b)
                || adj.get(a, e)
                || adj.get(c, b)
            {
                continue;
            }
            adj.set(a, b, false);
            adj.set(c, e, false);
            adj.set(a, e, true);
            adj.set(c, b, true);
            edges[x] = (a, e);
            edges[y] = (c, b);
        }
    }
    TripartiteDigraph::new(Digraph::from_fn(m, Mode::General, |u, v| adj.get(u, v)), n)
}

/// Two disjoint complete tripartite digraphs on classes of size n/2 each:
/// an n-regular balanced tripartite digraph with no Hamilton cycle.
pub fn gen_disconnected_pair(n: usize) -> Result<TripartiteDigraph, GraphError> {
    if n == 0 || n % 2 == 1 {
        return Err(GraphError::invariant("n even", format!("n = {n}")));
    }
    let p = Tripartition::new(n);
    let half = |v: usize| p.index_in_class(v) < n / 2;
    TripartiteDigraph::new(
        Digraph::from_fn(3 * n, Mode::General, |u, v| {
            p.class_of(u) != p.class_of(v) && half(u) == half(v)
        }),
        n,
    )
}

/// Reverses `k` distinct uniformly chosen edges.
pub fn perturb(t: &TripartiteTournament, k: usize, seed: Seed) -> Result<TripartiteTournament, GraphError> {
    let edges: Vec<_> = t.graph().edges().collect();
    if k > edges.len() {
        return Err(GraphError::invariant("k <= 3n^2", format!("k = {k}")));
    }
    let mut rng = seed.rng();
    let chosen: Vec<_> = rand::seq::index::sample(&mut rng, edges.len(), k)
        .into_iter()
        .map(|i| edges[i])
        .collect();
    t.reverse_edges(&chosen)
}

/// Reverses `k` directed triangles in turn, each chosen uniformly among
/// those of the current tournament. Semidegrees are preserved.
pub fn perturb_regular(t: &TripartiteTournament, k: usize, seed: Seed) -> Result<TripartiteTournament, GraphError> {
    let mut rng = seed.rng();
    let mut cur = t.clone();
    let n = t.n();
    for _ in 0..k {
        let g = cur.graph();
        let tri: Vec<[usize; 3]> = (0..n)
            .flat_map(|a| g.out_neighbors(a).iter().map(move |&b| (a, b)))
            .flat_map(|(a, b)| g.out_neighbors(b).iter().filter(move |&&c| g.has_edge(c, a)).map(move |&c| [a, b, c]))
            .collect();
        let Some(&[a, b, c]) = tri.choose(&mut rng) else {
            return Err(GraphError::invariant("directed triangle exists", "none left"));
        };
        cur = cur.reverse_edges(&[(a, b), (b, c), (c, a)])?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tripartite::{edit_distance, BipartiteCounts};

    #[test]
    fn blowups() {
        let t1 = blowup_c3(1);
        assert!(t1.has_edge(0, 1) && t1.has_edge(1, 2) && t1.has_edge(2, 0));
        let t2 = blowup_c3(2);
        assert_eq!(t2.graph().edge_count(), 12);
        assert!(t2.is_regular());
        let (_, g) = gen_gbeta(3, Rational::from_integer(0), Seed(1)).unwrap();
        assert_eq!(edit_distance(&g, &blowup_c3(3)).unwrap(), 0);
    }

    #[test]
    fn t_triangle() {
        let t1 = gen_t_triangle(1);
        assert!(t1.has_edge(1, 0) && t1.has_edge(2, 1) && t1.has_edge(0, 2));
        let t2 = gen_t_triangle(2);
        let c = BipartiteCounts::measure(t2.parts(), t2.graph().edges());
        assert_eq!(c.counterclockwise(), [1, 1, 1]);
        assert!(t2.has_edge(2, 0) && t2.has_edge(4, 2) && t2.has_edge(0, 4));
        let t3 = gen_t_triangle(3);
        assert!(t3.is_regular());
        assert_eq!(t3.graph().degrees(0).unwrap(), (3, 3));
        assert_eq!(edit_distance(&t3, &blowup_c3(3)).unwrap(), 6);
    }

    #[test]
    fn gbeta_members() {
        let (m, t) = gen_gbeta(4, Rational::from_integer(0), Seed(9)).unwrap();
        assert_eq!(t, blowup_c3(4));
        assert_eq!(m.beta_n(), 0);
        let (m, t) = gen_gbeta(4, Rational::new(1, 2), Seed(3)).unwrap();
        assert_eq!(m.backward_v1().len(), 2);
        assert_eq!(m.ccw_edges().len(), 8);
        assert!(t.is_regular());
        let (_, t) = gen_gbeta(6, Rational::new(1, 3), Seed(5)).unwrap();
        assert!((0..18).all(|v| t.graph().degrees(v).unwrap() == (6, 6)));
        assert!(gen_gbeta(5, Rational::new(1, 4), Seed(1)).is_err());
        assert!(gen_gbeta(4, Rational::new(3, 4), Seed(1)).is_err());
    }

    #[test]
    fn random_tournaments() {
        assert_eq!(gen_random_regular_tournament(3, Seed(4), 0), blowup_c3(3));
        let t = gen_random_regular_tournament(3, Seed(4), 500);
        assert!(t.is_regular());
        let t = gen_random_regular_tournament(2, Seed(8), 10_000);
        let d = edit_distance(&t, &blowup_c3(2)).unwrap();
        assert!(d > 0 && d < 24);
        assert_eq!(
            gen_random_regular_tournament(4, Seed(2), 300),
            gen_random_regular_tournament(4, Seed(2), 300)
        );
    }

    #[test]
    fn random_digraphs() {
        assert_eq!(
            gen_random_regular_tripartite_digraph(3, 6, Seed(1)).unwrap(),
            TripartiteDigraph::complete(3)
        );
        let g = gen_random_regular_tripartite_digraph(4, 5, Seed(7)).unwrap();
        assert_eq!(g.graph().regular_degree(), Some(5));
        assert!(gen_random_regular_tripartite_digraph(4, 3, Seed(7)).is_err());
        let g = gen_random_regular_tripartite_digraph(2, 2, Seed(7)).unwrap();
        assert_eq!(g.graph().regular_degree(), Some(2));
        let pair = gen_disconnected_pair(4).unwrap();
        assert_eq!(pair.graph().regular_degree(), Some(4));
    }

    #[test]
    fn perturbations() {
        let t = blowup_c3(4);
        assert_eq!(perturb(&t, 0, Seed(1)).unwrap(), t);
        let p = perturb(&t, 5, Seed(1)).unwrap();
        assert_eq!(edit_distance(&t, &p).unwrap(), 10);
        let tri = t.reverse_edges(&[(0, 4), (4, 8), (8, 0)]).unwrap();
        assert_eq!(tri, gen_t_triangle(4));
    }
}
