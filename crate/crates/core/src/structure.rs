//! Distance to 𝒢_β, the bipartite regularizer, editing a tournament into a
//! 𝒢_β member, and exceptional vertices.

use rayon::prelude::*;
use serde::Serialize;

use crate::digraph::{BitMatrix, GraphError};
use crate::expansion::Partition4;
use crate::flow::min_cost_regular_bipartite;
use crate::generators::GBetaModel;
use crate::rational::{to_f64, Rational};
use crate::tripartite::{class_permutation_map, digraph_edit_distance, TripartiteTournament};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("target degree {d} exceeds side size {m}")]
    InfeasibleTarget { d: usize, m: usize },
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Additions and removals of edges (directed pairs, or (a, b) pairs for
/// bipartite graphs).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EditScript {
    pub additions: Vec<(usize, usize)>,
    pub removals: Vec<(usize, usize)>,
}

impl EditScript {
    pub fn len(&self) -> usize {
        self.additions.len() + self.removals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Undirected bipartite graph on A = B = `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    m: usize,
    adj: BitMatrix,
}

impl BipartiteGraph {
    pub fn new(m: usize) -> Self {
        BipartiteGraph { m, adj: BitMatrix::new(m) }
    }

    pub fn from_fn(m: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut g = Self::new(m);
        for a in 0..m {
            for b in 0..m {
                if f(a, b) {
                    g.adj.set(a, b, true);
                }
            }
        }
        g
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn has(&self, a: usize, b: usize) -> bool {
        self.adj.get(a, b)
    }

    pub fn set(&mut self, a: usize, b: usize, value: bool) {
        self.adj.set(a, b, value);
    }

    pub fn degree_a(&self, a: usize) -> usize {
        (0..self.m).filter(|&b| self.adj.get(a, b)).count()
    }

    pub fn degree_b(&self, b: usize) -> usize {
        (0..self.m).filter(|&a| self.adj.get(a, b)).count()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.m).map(|a| self.degree_a(a)).sum()
    }

    pub fn is_regular(&self, d: usize) -> bool {
        (0..self.m).all(|v| self.degree_a(v) == d && self.degree_b(v) == d)
    }

    /// t = max(Σ_A |d(a) − d|, Σ_B |d(b) − d|).
    pub fn deviation(&self, d: usize) -> usize {
        let sa: usize = (0..self.m).map(|a| self.degree_a(a).abs_diff(d)).sum();
        let sb: usize = (0..self.m).map(|b| self.degree_b(b).abs_diff(d)).sum();
        sa.max(sb)
    }

    pub fn apply(&self, script: &EditScript) -> Self {
        let mut g = self.clone();
        for &(a, b) in &script.removals {
            g.set(a, b, false);
        }
        for &(a, b) in &script.additions {
            g.set(a, b, true);
        }
        g
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularizeOutcome {
    pub script: EditScript,
    pub t: usize,
}

/// Edits `h` into a d-regular bipartite graph with at most 9t changes.
pub fn regularize_bipartite(h: &BipartiteGraph, d: usize) -> Result<RegularizeOutcome, StructureError> {
    let m = h.side();
    if d > m {
        return Err(StructureError::InfeasibleTarget { d, m });
    }
    let t = h.deviation(d);
    let mut g = h.clone();
    let mut deg_a: Vec<usize> = (0..m).map(|a| g.degree_a(a)).collect();
    let mut deg_b: Vec<usize> = (0..m).map(|b| g.degree_b(b)).collect();
    let mut e: usize = deg_a.iter().sum();
    // phase 1: reach e = dm, touching over-full vertices first
    while e > d * m {
        let a = (0..m).max_by_key(|&a| (deg_a[a], std::cmp::Reverse(a))).unwrap();
        let b = (0..m)
            .filter(|&b| g.has(a, b))
            .max_by_key(|&b| (deg_b[b], std::cmp::Reverse(b)))
            .unwrap();
        g.set(a, b, false);
        deg_a[a] -= 1;
        deg_b[b] -= 1;
        e -= 1;
    }
    while e < d * m {
        let a = (0..m).min_by_key(|&a| (deg_a[a], a)).unwrap();
        let b = (0..m).filter(|&b| !g.has(a, b)).min_by_key(|&b| (deg_b[b], b)).unwrap();
        g.set(a, b, true);
        deg_a[a] += 1;
        deg_b[b] += 1;
        e += 1;
    }
    // phase 2: a′x → ax swaps on side A, then the mirror on side B
    for side_a in [true, false] {
        loop {
            let (deg_s, has): (&Vec<usize>, Box<dyn Fn(&BipartiteGraph, usize, usize) -> bool>) = if side_a {
                (&deg_a, Box::new(|g: &BipartiteGraph, s, x| g.has(s, x)))
            } else {
                (&deg_b, Box::new(|g: &BipartiteGraph, s, x| g.has(x, s)))
            };
            let Some(low) = (0..m).find(|&s| deg_s[s] < d) else { break };
            let high = (0..m).find(|&s| deg_s[s] > d).expect("edge count is dm");
            let x = (0..m)
                .find(|&x| has(&g, high, x) && !has(&g, low, x))
                .expect("d(high) > d(low) leaves a private neighbour");
            if side_a {
                g.set(high, x, false);
                g.set(low, x, true);
                deg_a[high] -= 1;
                deg_a[low] += 1;
            } else {
                g.set(x, high, false);
                g.set(x, low, true);
                deg_b[high] -= 1;
                deg_b[low] += 1;
            }
        }
    }
    debug_assert!(g.is_regular(d));
    let mut script = EditScript::default();
    for a in 0..m {
        for b in 0..m {
            match (h.has(a, b), g.has(a, b)) {
                (false, true) => script.additions.push((a, b)),
                (true, false) => script.removals.push((a, b)),
                _ => {}
            }
        }
    }
    Ok(RegularizeOutcome { script, t })
}

/// Class labellings tried by the detector: identity, the two rotations,
/// then the three reflections.
pub const LABELLINGS: [[usize; 3]; 6] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];

/// Largest n for which every |←V1| is tried; above it a window around the
/// majority split is used.
const FULL_SPLIT_SEARCH: usize = 16;

#[derive(Debug, Clone)]
pub struct ClosenessReport {
    /// Model in role coordinates (role r = block r).
    pub model: GBetaModel,
    /// `role_assignment[r]` is the class of the input playing role V_{r+1}.
    pub role_assignment: [usize; 3],
    pub distance: usize,
    pub epsilon: Rational,
    /// (→V1, ←V1) in input labels.
    pub v1_split: (Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosenessDoc {
    pub distance: usize,
    pub epsilon: String,
    pub beta: String,
    pub role_assignment: [usize; 3],
    pub forward_v1: Vec<usize>,
    pub backward_v1: Vec<usize>,
    pub model_edges: Vec<[usize; 2]>,
}

impl ClosenessReport {
    /// Vertex map input → role coordinates.
    pub fn to_roles(&self) -> Vec<usize> {
        class_permutation_map(self.model.n(), self.role_assignment)
    }

    /// Vertex map role coordinates → input.
    pub fn from_roles(&self) -> Vec<usize> {
        invert(&self.to_roles())
    }

    pub fn relabel(&self, t: &TripartiteTournament) -> TripartiteTournament {
        t.permute_classes(self.role_assignment).0
    }

    /// The model tournament in input labels.
    pub fn model_tournament(&self) -> TripartiteTournament {
        let back = self.from_roles();
        let rt = self.model.tournament();
        TripartiteTournament::new(rt.graph().relabel(&back), self.model.n()).expect("relabelled model")
    }

    /// V2 ∪ ←V1 of the model, in input labels.
    pub fn nonexpanding_set(&self) -> Vec<usize> {
        let n = self.model.n();
        let back = self.from_roles();
        let mut s: Vec<usize> = (n..2 * n).chain(self.model.backward_v1()).map(|v| back[v]).collect();
        s.sort_unstable();
        s
    }

    pub fn to_doc(&self) -> ClosenessDoc {
        let b = self.model.beta();
        ClosenessDoc {
            distance: self.distance,
            epsilon: format!("{}/{}", self.epsilon.numer(), self.epsilon.denom()),
            beta: format!("{}/{}", b.numer(), b.denom()),
            role_assignment: self.role_assignment,
            forward_v1: self.v1_split.0.clone(),
            backward_v1: self.v1_split.1.clone(),
            model_edges: self.model_tournament().graph().edges().map(|(u, v)| [u, v]).collect(),
        }
    }
}

pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Best model for one labelling, in role coordinates.
fn best_for_labelling(t: &TripartiteTournament, sigma: [usize; 3]) -> (usize, GBetaModel) {
    let n = t.n();
    let (rt, _) = t.permute_classes(sigma);
    let g = rt.graph();
    // forward agreement of each V1 vertex: V3 → v and v → V2
    let fwd: Vec<usize> = (0..n)
        .map(|v| (2 * n..3 * n).filter(|&c| g.has_edge(c, v)).count() + (n..2 * n).filter(|&b| g.has_edge(v, b)).count())
        .collect();
    // gain of moving v to ←V1, in disagreeing pairs
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (fwd[v], v));
    let majority = (0..n).filter(|&v| 2 * n - fwd[v] > fwd[v]).count().min(n / 2);
    let ks: Vec<usize> = if n <= FULL_SPLIT_SEARCH {
        (0..=n / 2).collect()
    } else {
        let mut ks: Vec<usize> = (majority.saturating_sub(2)..=(majority + 2).min(n / 2)).collect();
        ks.push(0);
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    let t32 = |c: usize, b: usize| g.has_edge(2 * n + c, n + b);
    let mut best: Option<(usize, GBetaModel)> = None;
    for k in ks {
        let mut backward = vec![false; n];
        for &v in &order[..k] {
            backward[v] = true;
        }
        let (chosen, _) = min_cost_regular_bipartite(n, k, |c, b| i64::from(!t32(c, b)));
        let mut ccw = BitMatrix::new(n);
        for c in 0..n {
            for b in 0..n {
                if chosen[c][b] {
                    ccw.set(c, b, true);
                }
            }
        }
        let model = GBetaModel::new(n, backward, ccw).expect("flow output is k-regular");
        let d = digraph_edit_distance(g, model.tournament().graph());
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, model));
        }
    }
    best.expect("k = 0 is always tried")
}

/// Nearest 𝒢_β member over all six class labellings; the V3→V2 graph is
/// optimal for each split via min-cost flow.
pub fn nearest_gbeta(t: &TripartiteTournament) -> ClosenessReport {
    let n = t.n();
    let results: Vec<(usize, GBetaModel)> = LABELLINGS.par_iter().map(|&s| best_for_labelling(t, s)).collect();
    let (idx, (distance, model)) = results
        .into_iter()
        .enumerate()
        .min_by_key(|(i, (d, _))| (*d, *i))
        .unwrap();
    let sigma = LABELLINGS[idx];
    let back = invert(&class_permutation_map(n, sigma));
    let fw = model.forward_v1().into_iter().map(|v| back[v]).collect();
    let bw = model.backward_v1().into_iter().map(|v| back[v]).collect();
    ClosenessReport {
        epsilon: Rational::new(distance as i64, (9 * n * n) as i64),
        model,
        role_assignment: sigma,
        distance,
        v1_split: (fw, bw),
    }
}

/// Partition4 together with the classes A, B, C (roles V1, V2, V3).
#[derive(Debug, Clone)]
pub struct RolePartition {
    pub partition: Partition4,
    pub roles: [usize; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct AlmostRegOutcome {
    #[serde(skip)]
    pub model: GBetaModel,
    /// Labelling of the returned model (role r = class `roles[r]`).
    pub roles: [usize; 3],
    /// Directed edits in input labels; each orientation change appears as
    /// one removal plus one addition.
    pub script: EditScript,
    /// Number of reversed pairs (the lemma's "edge modifications").
    pub modifications: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub bound: f64,
    pub relocated: usize,
    pub relocation_bound: f64,
    pub within_bound: bool,
}

/// Edits `t` into a 𝒢_β member following the almost-regular construction.
pub fn to_gbeta_member(t: &TripartiteTournament, p: &RolePartition) -> Result<AlmostRegOutcome, StructureError> {
    let n = t.n();
    let m = 3 * n;
    let part = &p.partition;
    if !part.is_partition_of(m) {
        return Err(StructureError::MalformedPartition("sets do not partition V".into()));
    }
    let mut sorted = p.roles;
    sorted.sort_unstable();
    if sorted != [0, 1, 2] {
        return Err(StructureError::MalformedPartition("roles are not a permutation of the classes".into()));
    }
    let parts = t.parts();
    let mut cell = vec![0u8; m];
    for (tag, set) in [(0u8, &part.v11), (1, &part.v12), (2, &part.v21), (3, &part.v22)] {
        for &v in set {
            cell[v] = tag;
        }
    }
    let g = t.graph();
    // ε1 n² = e(V1*, V*2) + e(V2*, V*1)
    let row = |v: usize| cell[v] >> 1;
    let col = |v: usize| cell[v] & 1;
    let bad = g.edges().filter(|&(u, v)| row(u) != col(v)).count();
    let eps1 = bad as f64 / (n * n) as f64;
    let [a_cls, b_cls, c_cls] = p.roles;
    let sym = |cls: usize, ok: &dyn Fn(u8) -> bool| (0..m).filter(|&v| (parts.class_of(v) == cls) != ok(cell[v])).count();
    let d_a = sym(a_cls, &|c| c == 0 || c == 3);
    let d_b = sym(b_cls, &|c| c == 1);
    let d_c = sym(c_cls, &|c| c == 2);
    let eps2 = d_a.max(d_b).max(d_c) as f64 / n as f64;

    // relocation: B → V′12, C → V′21, A split between V′11 and V′22
    let mut back11 = vec![false; m];
    let mut relocated = 0;
    for v in parts.class(a_cls) {
        back11[v] = match cell[v] {
            0 => false,
            3 => false,
            _ => {
                relocated += 1;
                // bad edges if v is placed in V′11 (B → v → C) versus V′22
                let as11 = parts.class(b_cls).filter(|&b| g.has_edge(v, b)).count()
                    + parts.class(c_cls).filter(|&c| g.has_edge(c, v)).count();
                let as22 = 2 * n - as11;
                as11 < as22
            }
        } || cell[v] == 0;
    }
    for v in (0..m).filter(|&v| parts.class_of(v) != a_cls) {
        let target = if parts.class_of(v) == b_cls { 1 } else { 2 };
        if cell[v] != target {
            relocated += 1;
        }
    }
    let k11 = parts.class(a_cls).filter(|&v| back11[v]).count();
    // normalise |V′22| ≥ |V′11| by switching indices 1 ↔ 2
    let (roles, backward): ([usize; 3], Vec<bool>) = if n - k11 < k11 {
        ([a_cls, c_cls, b_cls], parts.class(a_cls).map(|v| !back11[v]).collect())
    } else {
        ([a_cls, b_cls, c_cls], parts.class(a_cls).map(|v| back11[v]).collect())
    };
    let k = backward.iter().filter(|&&b| b).count();
    let (rt, perm) = t.permute_classes(roles);
    let rg = rt.graph();
    let h = BipartiteGraph::from_fn(n, |c, b| rg.has_edge(2 * n + c, n + b));
    let reg = regularize_bipartite(&h, k)?;
    let fixed = h.apply(&reg.script);
    let mut ccw = BitMatrix::new(n);
    for c in 0..n {
        for b in 0..n {
            ccw.set(c, b, fixed.has(c, b));
        }
    }
    let model = GBetaModel::new(n, backward, ccw)?;
    let inv = invert(&perm);
    let mut script = EditScript::default();
    for (u, v) in rg.edges() {
        if !model.has_edge(u, v) {
            script.removals.push((inv[u], inv[v]));
            script.additions.push((inv[v], inv[u]));
        }
    }
    let modifications = script.removals.len();
    let bound = (10.0 * eps1 + 90.0 * eps2) * (n * n) as f64;
    Ok(AlmostRegOutcome {
        model,
        roles,
        modifications,
        within_bound: modifications as f64 <= bound + 1e-9,
        script,
        eps1,
        eps2,
        bound,
        relocated,
        relocation_bound: 3.0 * eps2 * n as f64,
    })
}

/// Partition4 read off a model: V11 = ←V1, V12 = V2, V21 = V3, V22 = →V1.
pub fn canonical_role_partition(report_roles: [usize; 3], model: &GBetaModel) -> RolePartition {
    let n = model.n();
    let back = invert(&class_permutation_map(n, report_roles));
    let map = |v: Vec<usize>| {
        let mut w: Vec<usize> = v.into_iter().map(|x| back[x]).collect();
        w.sort_unstable();
        w
    };
    RolePartition {
        partition: Partition4 {
            v11: map(model.backward_v1()),
            v12: map((n..2 * n).collect()),
            v21: map((2 * n..3 * n).collect()),
            v22: map(model.forward_v1()),
        },
        roles: report_roles,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalSet {
    pub gamma: String,
    pub vertices: Vec<usize>,
    /// e(G ∖ G′).
    pub bad_edges: usize,
    /// |U^γ|·γ·(3n)/2 ≤ e(G ∖ G′).
    pub counting_check: bool,
    /// 2ε(3n)/γ, the size bound implied by ε-closeness.
    pub epsilon_bound: Option<f64>,
    pub within_epsilon_bound: Option<bool>,
}

/// U^γ = {v : d⁺_{G∖G′}(v) + d⁻_{G∖G′}(v) ≥ γ·3n}; `t` and `model` share
/// labels.
pub fn exceptional_vertices(t: &TripartiteTournament, model: &GBetaModel, gamma: Rational, epsilon: Option<f64>) -> ExceptionalSet {
    let n = t.n();
    let m = 3 * n;
    let mut deg = vec![0usize; m];
    let mut bad_edges = 0;
    for (u, v) in t.graph().edges() {
        if !model.has_edge(u, v) {
            deg[u] += 1;
            deg[v] += 1;
            bad_edges += 1;
        }
    }
    let (num, den) = (*gamma.numer(), *gamma.denom());
    let vertices: Vec<usize> = (0..m).filter(|&v| deg[v] as i64 * den >= num * m as i64).collect();
    let lhs = Rational::from_integer(vertices.len() as i64) * gamma * Rational::from_integer(m as i64) / 2;
    let counting_check = lhs <= Rational::from_integer(bad_edges as i64);
    let g = to_f64(gamma);
    let epsilon_bound = epsilon.filter(|_| g > 0.0).map(|e| 2.0 * e * m as f64 / g);
    ExceptionalSet {
        gamma: format!("{}/{}", num, den),
        within_epsilon_bound: epsilon_bound.map(|b| vertices.len() as f64 <= b + 1e-9),
        vertices,
        bad_edges,
        counting_check,
        epsilon_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{blowup_c3, gen_gbeta, gen_random_regular_tournament, gen_t_triangle, perturb};
    use crate::oracle::exact_nearest_gbeta;
    use crate::tripartite::edit_distance;
    use crate::Seed;
    use rand::Rng;

    #[test]
    fn regularize_examples() {
        let k22 = BipartiteGraph::from_fn(2, |_, _| true);
        assert!(regularize_bipartite(&k22, 2).unwrap().script.is_empty());
        let mut h = k22.clone();
        h.set(0, 0, false);
        let out = regularize_bipartite(&h, 2).unwrap();
        assert_eq!(out.script.len(), 1);
        assert_eq!(out.t, 1);
        assert!(regularize_bipartite(&h, 3).is_err());
    }

    #[test]
    fn regularize_random_within_9t() {
        for s in 0..300u64 {
            let mut rng = Seed(s).rng();
            let base = crate::generators::random_regular_bipartite(8, 4, &mut rng);
            let mut h = BipartiteGraph::from_fn(8, |a, b| base.get(a, b));
            for _ in 0..10 {
                let (a, b) = (rng.gen_range(0..8), rng.gen_range(0..8));
                let cur = h.has(a, b);
                h.set(a, b, !cur);
            }
            let out = regularize_bipartite(&h, 4).unwrap();
            assert!(out.script.len() <= 9 * out.t);
            assert!(h.apply(&out.script).is_regular(4));
        }
    }

    #[test]
    fn nearest_examples() {
        let (m, t) = gen_gbeta(8, Rational::new(1, 4), Seed(3)).unwrap();
        let r = nearest_gbeta(&t);
        assert_eq!(r.distance, 0);
        assert_eq!(r.model.beta(), m.beta());
        assert_eq!(edit_distance(&r.model_tournament(), &t).unwrap(), 0);
        let r = nearest_gbeta(&gen_t_triangle(5));
        assert!(r.distance <= 6);
        let p = perturb(&t, 5, Seed(1)).unwrap();
        assert!(nearest_gbeta(&p).distance <= 10);
    }

    #[test]
    fn nearest_matches_oracle_small() {
        for s in 0..60u64 {
            let n = 2 + (s % 2) as usize;
            let t = gen_random_regular_tournament(n, Seed(s), 40);
            let r = nearest_gbeta(&t);
            assert_eq!(edit_distance(&r.model_tournament(), &t).unwrap(), r.distance);
            assert_eq!(r.distance, exact_nearest_gbeta(&t).unwrap(), "seed {s}");
        }
    }

    #[test]
    fn almostreg_examples() {
        let (m, t) = gen_gbeta(6, Rational::new(1, 3), Seed(4)).unwrap();
        let p = canonical_role_partition([0, 1, 2], &m);
        let out = to_gbeta_member(&t, &p).unwrap();
        assert!(out.script.is_empty());
        let tri = gen_t_triangle(5);
        let p = canonical_role_partition([0, 1, 2], &GBetaModel::c3(5));
        let out = to_gbeta_member(&tri, &p).unwrap();
        assert_eq!(out.script.len(), 6);
        assert!(out.within_bound);
        let applied = tri.reverse_edges(&out.script.removals).unwrap();
        assert_eq!(applied, blowup_c3(5));
    }

    #[test]
    fn exceptional_examples() {
        let (m, t) = gen_gbeta(6, Rational::new(1, 3), Seed(4)).unwrap();
        assert!(exceptional_vertices(&t, &m, Rational::new(1, 100), None).vertices.is_empty());
        let n = 4;
        let tri = gen_t_triangle(n);
        let u = exceptional_vertices(&tri, &GBetaModel::c3(n), Rational::new(2, 3 * n as i64), Some(6.0 / 144.0));
        assert_eq!(u.vertices, vec![0, n, 2 * n]);
        assert!(u.counting_check);
        let loose = exceptional_vertices(&tri, &GBetaModel::c3(n), Rational::new(1, 12), None);
        assert!(loose.vertices.iter().all(|v| u.vertices.contains(v)));
    }
}
