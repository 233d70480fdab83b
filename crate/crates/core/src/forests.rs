//! Linear-forest machinery for the non-expander pipeline: exceptional
//! covers, the cleaner, the host partition, path covers, balanced covers,
//! endpoint profiles, and the extension of a forest to V3→V2 paths.
//!
//! Everything here works in role coordinates: block r of the vertex set is
//! role V_{r+1}, and the model's →V1/←V1 split lives in block 0.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::digraph::{BitMatrix, Digraph, GraphError};
use crate::factorization::{merge_into_few_cycles, FactorError, FactorTargets};
use crate::forest::LinearForest;
use crate::generators::GBetaModel;
use crate::matching::hopcroft_karp;
use crate::rational::{to_f64, Rational};
use crate::seed::Seed;
use crate::structure::exceptional_vertices;
use crate::tripartite::{BipartiteCounts, Tripartition, TripartiteTournament};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForestError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot extend forest {forest} at vertex {vertex}")]
    ExtensionImpossible { vertex: usize, forest: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Constants of the non-expander pipeline. Asymptotic bounds are audited
/// as `formula × tolerance`; structural conditions are never relaxed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PipelineParams {
    #[serde(serialize_with = "ser_rational")]
    pub epsilon: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub gamma: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub beta: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub delta: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub eta: Rational,
    pub k: usize,
    pub ell: usize,
    pub tolerance: f64,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

impl PipelineParams {
    /// Desk-scale defaults: γ = 1/12, η = δ/2, K = 1, ℓ = ⌈(1−δ)n⌉.
    pub fn desk(n: usize, delta: Rational, epsilon: Rational, beta: Rational) -> Self {
        let one = Rational::from_integer(1);
        PipelineParams {
            epsilon,
            gamma: Rational::new(1, 12),
            beta,
            delta,
            eta: delta / 2,
            k: 1,
            ell: crate::rational::ceil_mul(one - delta, n).max(0) as usize,
            tolerance: 1.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), ForestError> {
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        for (name, v) in [("epsilon", self.epsilon), ("gamma", self.gamma), ("delta", self.delta), ("eta", self.eta)] {
            if v < zero || v > one {
                return Err(ForestError::InvalidParams(format!("{name} outside [0, 1]")));
            }
        }
        if self.beta < zero || self.beta * 2 > one {
            return Err(ForestError::InvalidParams("beta outside [0, 1/2]".into()));
        }
        if self.k == 0 {
            return Err(ForestError::InvalidParams("K must be positive".into()));
        }
        if self.ell > n {
            return Err(ForestError::InvalidParams(format!("ell = {} exceeds n = {n}", self.ell)));
        }
        if self.tolerance < 1.0 {
            return Err(ForestError::InvalidParams("tolerance multiplier below 1 would tighten bounds".into()));
        }
        Ok(())
    }

    /// `r^p · n` as a float.
    pub fn pow_n(r: Rational, p: f64, n: usize) -> f64 {
        to_f64(r).powf(p) * n as f64
    }
}

/// Optional replacements for the automatically chosen pipeline constants.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ParamOverrides {
    #[serde(serialize_with = "ser_opt_rational")]
    pub gamma: Option<Rational>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub eta: Option<Rational>,
    pub k: Option<usize>,
    pub ell: Option<usize>,
    pub tolerance: Option<f64>,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => ser_rational(r, s),
        None => s.serialize_none(),
    }
}

impl ParamOverrides {
    pub fn apply(&self, mut p: PipelineParams) -> PipelineParams {
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(e) = self.eta {
            p.eta = e;
        }
        if let Some(k) = self.k {
            p.k = k;
        }
        if let Some(l) = self.ell {
            p.ell = l;
        }
        if let Some(t) = self.tolerance {
            p.tolerance = t;
        }
        p
    }
}

/// One audited inequality; `slack` is positive when it holds.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
    pub hard: bool,
}

impl Check {
    pub fn le(name: &str, observed: f64, bound: f64, hard: bool) -> Self {
        Check { name: name.into(), observed, bound, slack: bound - observed, pass: observed <= bound + 1e-9, hard }
    }

    pub fn ge(name: &str, observed: f64, bound: f64, hard: bool) -> Self {
        Check { name: name.into(), observed, bound, slack: observed - bound, pass: observed + 1e-9 >= bound, hard }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        let x = if ok { 1.0 } else { 0.0 };
        Check { name: name.into(), observed: x, bound: 1.0, slack: x - 1.0, pass: ok, hard: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ForestFamily {
    #[serde(serialize_with = "ser_forests")]
    pub forests: Vec<LinearForest>,
    pub edge_disjoint: bool,
    pub audit: Vec<Vec<Check>>,
    /// Forests requested but not produced.
    pub shortfall: usize,
    /// Free-form notes (discarded factors, soft fallbacks).
    pub notes: Vec<String>,
}

fn ser_forests<S: serde::Serializer>(fs: &[LinearForest], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(fs.len()))?;
    for f in fs {
        seq.serialize_element(&f.paths())?;
    }
    seq.end()
}

impl ForestFamily {
    pub fn new(forests: Vec<LinearForest>, audit: Vec<Vec<Check>>, shortfall: usize, notes: Vec<String>) -> Self {
        let edge_disjoint = pairwise_disjoint(&forests);
        assert!(edge_disjoint, "forest family must be edge-disjoint");
        ForestFamily { forests, edge_disjoint, audit, shortfall, notes }
    }

    pub fn hard_pass(&self) -> bool {
        self.edge_disjoint && self.audit.iter().flatten().all(|c| !c.hard || c.pass)
    }

    pub fn soft_pass(&self) -> bool {
        self.audit.iter().flatten().all(|c| c.pass)
    }
}

pub fn pairwise_disjoint(forests: &[LinearForest]) -> bool {
    let mut seen = HashSet::new();
    forests.iter().flat_map(|f| f.edges().collect::<Vec<_>>()).all(|e| seen.insert(e))
}

fn counts(parts: Tripartition, f: &LinearForest) -> BipartiteCounts {
    BipartiteCounts::measure(parts, f.edges())
}

fn is_cw(n: usize, u: usize, v: usize) -> bool {
    v / n == (u / n + 1) % 3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EndpointProfile {
    /// |V_i^+(F)|: vertices of class i with out-degree 0.
    pub plus: [usize; 3],
    /// |V_i^-(F)|: vertices of class i with in-degree 0.
    pub minus: [usize; 3],
    pub forward_plus: Option<usize>,
    pub forward_minus: Option<usize>,
    pub backward_plus: Option<usize>,
    pub backward_minus: Option<usize>,
    pub classes_equal: bool,
    pub v1_split_equal: Option<bool>,
}

/// Endpoint census of a linear forest, split by →V1/←V1 when a model is
/// given.
pub fn endpoint_profile(parts: Tripartition, f: &LinearForest, model: Option<&GBetaModel>) -> EndpointProfile {
    let n = parts.n();
    let mut plus = [0; 3];
    let mut minus = [0; 3];
    for v in 0..3 * n {
        if f.out_degree(v) == 0 {
            plus[v / n] += 1;
        }
        if f.in_degree(v) == 0 {
            minus[v / n] += 1;
        }
    }
    let all = [plus[0], plus[1], plus[2], minus[0], minus[1], minus[2]];
    let classes_equal = all.iter().all(|&x| x == all[0]);
    let split = model.map(|m| {
        let count = |back: bool, out: bool| {
            (0..n)
                .filter(|&v| m.is_backward(v) == back)
                .filter(|&v| if out { f.out_degree(v) == 0 } else { f.in_degree(v) == 0 })
                .count()
        };
        (count(false, true), count(false, false), count(true, true), count(true, false))
    });
    EndpointProfile {
        plus,
        minus,
        forward_plus: split.map(|s| s.0),
        forward_minus: split.map(|s| s.1),
        backward_plus: split.map(|s| s.2),
        backward_minus: split.map(|s| s.3),
        classes_equal,
        v1_split_equal: split.map(|s| s.0 == s.1 && s.2 == s.3),
    }
}

/// Cycle factors of `g` extracted one after another, each with few long
/// cycles.
fn cycle_factors(g: &Digraph, count: usize, seed: Seed) -> Result<Vec<Vec<Vec<usize>>>, ForestError> {
    let mut rest = g.clone();
    let mut out = Vec::new();
    for i in 0..count {
        if rest.edge_count() == 0 {
            break;
        }
        let cover = merge_into_few_cycles(&rest, FactorTargets { restarts: 4, seed: seed.derive(i as u64) })?;
        rest = rest.without_edges(cover.factor.edges());
        out.push(cover.cycles);
    }
    Ok(out)
}

fn cycle_edge_list(cycles: &[Vec<usize>]) -> Vec<(usize, usize)> {
    cycles.iter().flat_map(|c| (0..c.len()).map(move |i| (c[i], c[(i + 1) % c.len()]))).collect()
}

/// Forests covering U^γ with all paths running V3 → V2, for β > 0.
pub fn cover_exceptional_gbeta(
    t: &TripartiteTournament,
    model: &GBetaModel,
    params: &PipelineParams,
    seed: Seed,
) -> Result<(ForestFamily, Vec<usize>), ForestError> {
    let n = t.n();
    params.validate(n)?;
    let parts = t.parts();
    let u = exceptional_vertices(t, model, params.gamma, Some(to_f64(params.epsilon))).vertices;
    let in_u: Vec<bool> = (0..3 * n).map(|v| u.contains(&v)).collect();
    let bad_cap = PipelineParams::pow_n(params.epsilon, 2.0 / 3.0, n) * params.tolerance;
    let size_cap = PipelineParams::pow_n(params.epsilon, 1.0 / 3.0, n) * params.tolerance;
    let factors = cycle_factors(t.graph(), n, seed)?;
    let mut forests = Vec::new();
    let mut audit = Vec::new();
    let mut notes = Vec::new();
    for (idx, cycles) in factors.iter().enumerate() {
        if forests.len() == params.ell {
            break;
        }
        let edges = cycle_edge_list(cycles);
        let bad = edges.iter().filter(|&&(a, b)| !model.has_edge(a, b)).count();
        if bad as f64 > bad_cap && bad > 0 {
            notes.push(format!("factor {idx}: {bad} bad edges, discarded"));
            continue;
        }
        let mut keep: HashSet<(usize, usize)> = edges.iter().copied().collect();
        // (1) V2 → V3 edges away from U
        keep.retain(|&(a, b)| !(a / n == 1 && b / n == 2 && !in_u[a] && !in_u[b]));
        // (2) U-free two-paths V2 → V1 → V3
        let succ = |x: usize, k: &HashSet<(usize, usize)>| edges.iter().find(|e| e.0 == x && k.contains(e)).map(|e| e.1);
        let pred = |x: usize, k: &HashSet<(usize, usize)>| edges.iter().find(|e| e.1 == x && k.contains(e)).map(|e| e.0);
        for a in 0..n {
            if in_u[a] {
                continue;
            }
            if let (Some(p), Some(s)) = (pred(a, &keep), succ(a, &keep)) {
                if p / n == 1 && s / n == 2 && !in_u[p] && !in_u[s] {
                    keep.remove(&(p, a));
                    keep.remove(&(a, s));
                }
            }
        }
        // (3) U-free components with at most two edges
        let comps = components(3 * n, &keep);
        for comp in comps {
            let e: Vec<(usize, usize)> = keep.iter().filter(|x| comp.contains(&x.0)).copied().collect();
            if e.len() <= 2 && !comp.iter().any(|&v| in_u[v]) {
                for x in e {
                    keep.remove(&x);
                }
            }
        }
        let mut kept: Vec<(usize, usize)> = keep.into_iter().collect();
        kept.sort_unstable();
        let forest = match LinearForest::from_edges(3 * n, kept) {
            Ok(f) => f,
            Err(_) => {
                notes.push(format!("factor {idx}: pruning left a cycle, discarded"));
                continue;
            }
        };
        let ends_ok = forest.paths().iter().all(|p| p[0] / n == 2 && p[p.len() - 1] / n == 1);
        if !ends_ok {
            notes.push(format!("factor {idx}: path with wrong end classes, discarded"));
            continue;
        }
        let c = counts(parts, &forest);
        audit.push(vec![
            Check::le("E1 e(F) <= eps^(1/3) n", forest.edge_count() as f64, size_cap, false),
            Check::holds("E2 U internal", u.iter().all(|&v| forest.is_internal(v))),
            Check::holds("E3 e(V3,V1) = e(V1,V2), e(V2,V1) = e(V1,V3)", c.get(2, 0) == c.get(0, 1) && c.get(1, 0) == c.get(0, 2)),
            Check::holds("E4 paths run V3 to V2", ends_ok),
        ]);
        forests.push(forest);
    }
    let shortfall = params.ell.saturating_sub(forests.len());
    if shortfall > 0 {
        notes.push(format!("only {} usable factors for {} forests", forests.len(), params.ell));
    }
    Ok((ForestFamily::new(forests, audit, shortfall, notes), u))
}

fn components(m: usize, edges: &HashSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    let mut touched = vec![false; m];
    for &(a, b) in edges {
        touched[a] = true;
        touched[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in (0..m).filter(|&v| touched[v]) {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Counterclockwise-balanced forests covering U^γ, for β = 0.
pub fn cover_exceptional_c3(
    t: &TripartiteTournament,
    params: &PipelineParams,
    seed: Seed,
) -> Result<(ForestFamily, Vec<usize>), ForestError> {
    let n = t.n();
    params.validate(n)?;
    let parts = t.parts();
    let model = GBetaModel::c3(n);
    let u = exceptional_vertices(t, &model, params.gamma, Some(to_f64(params.epsilon))).vertices;
    let in_u: Vec<bool> = (0..3 * n).map(|v| u.contains(&v)).collect();
    let ccw_cap = PipelineParams::pow_n(params.epsilon, 2.0 / 3.0, n) * params.tolerance;
    let factors = cycle_factors(t.graph(), n, seed)?;
    let mut forests = Vec::new();
    let mut audit = Vec::new();
    let mut notes = Vec::new();
    'factor: for (idx, cycles) in factors.iter().enumerate() {
        if forests.len() == params.ell {
            break;
        }
        let edges = cycle_edge_list(cycles);
        let ccw = edges.iter().filter(|&&(a, b)| !is_cw(n, a, b)).count();
        if ccw as f64 >= ccw_cap && ccw > 0 {
            notes.push(format!("factor {idx}: {ccw} counterclockwise edges, discarded"));
            continue;
        }
        let before = BipartiteCounts::measure(parts, edges.iter().copied()).counterclockwise();
        let mut kept = Vec::new();
        for c in cycles {
            let ce = cycle_edge_list(std::slice::from_ref(c));
            let removable = |&(a, b): &(usize, usize)| is_cw(n, a, b) && !in_u[a] && !in_u[b];
            if !ce.iter().any(removable) {
                notes.push(format!("factor {idx}: cycle through {} has no removable clockwise edge, discarded", c[0]));
                continue 'factor;
            }
            kept.extend(ce.into_iter().filter(|e| !removable(e)));
        }
        let forest = LinearForest::from_edges(3 * n, kept).expect("every cycle lost an edge");
        let c = counts(parts, &forest);
        audit.push(vec![
            Check::le("P1 e(F) <= gamma n", forest.edge_count() as f64, to_f64(params.gamma) * n as f64 * params.tolerance, false),
            Check::holds("P2 U internal", u.iter().all(|&v| forest.is_internal(v))),
            Check::holds("counterclockwise balanced", c.counterclockwise_balanced()),
            Check::holds("counterclockwise counts unchanged", c.counterclockwise() == before),
        ]);
        forests.push(forest);
    }
    let shortfall = params.ell.saturating_sub(forests.len());
    if shortfall > 0 {
        notes.push(format!("only {} usable factors for {} forests", forests.len(), params.ell));
    }
    Ok((ForestFamily::new(forests, audit, shortfall, notes), u))
}

/// Depth-first search for a short path from `start`. `forward` follows
/// out-edges (the path is returned in travel order either way, so a
/// backward search yields a path ending at `start`).
struct PathSearch<'a> {
    forward: bool,
    max_len: usize,
    budget: usize,
    neighbours: &'a dyn Fn(usize, bool) -> Vec<usize>,
    /// May `next` follow the walk so far?
    step_ok: &'a dyn Fn(&[usize], usize) -> bool,
    /// Is the walk so far a valid answer?
    done: &'a dyn Fn(&[usize]) -> bool,
}

impl PathSearch<'_> {
    fn run(&mut self, start: usize) -> Option<Vec<usize>> {
        for len in 1..=self.max_len {
            let mut walk = vec![start];
            if self.dfs(&mut walk, len) {
                if !self.forward {
                    walk.reverse();
                }
                return Some(walk);
            }
            if self.budget == 0 {
                return None;
            }
        }
        None
    }

    fn dfs(&mut self, walk: &mut Vec<usize>, len: usize) -> bool {
        if walk.len() == len + 1 {
            return (self.done)(walk);
        }
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let last = *walk.last().unwrap();
        for w in (self.neighbours)(last, self.forward) {
            if walk.contains(&w) || !(self.step_ok)(walk, w) {
                continue;
            }
            walk.push(w);
            if self.dfs(walk, len) {
                return true;
            }
            walk.pop();
        }
        false
    }
}

/// Orientation of the edge between consecutive walk entries, taking the
/// search direction into account.
fn walk_edge(forward: bool, a: usize, b: usize) -> (usize, usize) {
    if forward {
        (a, b)
    } else {
        (b, a)
    }
}

/// Extends each forest so that every vertex of U* is internal in all of
/// them, using balanced three-edge runs through G ∩ G′. Returns the new
/// family and U*.
pub fn clean_forests(
    t: &TripartiteTournament,
    model: &GBetaModel,
    family: &ForestFamily,
    params: &PipelineParams,
) -> Result<(ForestFamily, Vec<usize>), ForestError> {
    let n = t.n();
    let m = 3 * n;
    let g = t.graph();
    let parts = t.parts();
    let eps = params.gamma;
    let ell = family.forests.len();
    let mut deg_out = vec![0usize; m];
    let mut deg_in = vec![0usize; m];
    for f in &family.forests {
        for (a, b) in f.edges() {
            deg_out[a] += 1;
            deg_in[b] += 1;
        }
    }
    let heavy = PipelineParams::pow_n(eps, 1.0 / 3.0, n);
    let u_eps = exceptional_vertices(t, model, eps, None).vertices;
    let ustar: Vec<usize> = (0..m)
        .filter(|&v| deg_out[v].max(deg_in[v]) as f64 >= heavy || u_eps.contains(&v))
        .collect();
    let in_ustar: Vec<bool> = (0..m).map(|v| ustar.contains(&v)).collect();
    let mut used = BitMatrix::new(m);
    for f in &family.forests {
        for (a, b) in f.edges() {
            used.set(a, b, true);
        }
    }
    let y_cap = PipelineParams::pow_n(eps, 0.25, n) - 1.0;
    let mut presence = vec![0usize; m];
    let mut out = Vec::with_capacity(ell);
    let mut audit = Vec::with_capacity(ell);
    for (fi, base) in family.forests.iter().enumerate() {
        let mut f = base.clone();
        let mut added: Vec<(usize, usize)> = Vec::new();
        let mut avoid: Vec<bool> = (0..m)
            .map(|v| f.covers(v) || in_ustar[v] || presence[v] as f64 >= y_cap * params.tolerance)
            .collect();
        for &v in &ustar {
            for forward in [true, false] {
                let missing = if forward { f.out_degree(v) == 0 } else { f.in_degree(v) == 0 };
                if !missing {
                    continue;
                }
                let nb = |x: usize, fw: bool| -> Vec<usize> {
                    let list = if fw { g.out_neighbors(x) } else { g.in_neighbors(x) };
                    list.iter()
                        .copied()
                        .filter(|&y| {
                            let (a, b) = walk_edge(fw, x, y);
                            model.has_edge(a, b) && !used.get(a, b)
                        })
                        .collect()
                };
                let step_ok = |walk: &[usize], next: usize| {
                    if avoid[next] {
                        return false;
                    }
                    let orient = |a: usize, b: usize| {
                        let (p, q) = walk_edge(forward, a, b);
                        is_cw(n, p, q)
                    };
                    walk.len() < 2 || orient(walk[0], walk[1]) == orient(walk[walk.len() - 1], next)
                };
                let done = |walk: &[usize]| walk.len() == 4;
                let mut search =
                    PathSearch { forward, max_len: 3, budget: 20_000, neighbours: &nb, step_ok: &step_ok, done: &done };
                let path = search.run(v).ok_or(ForestError::ExtensionImpossible { vertex: v, forest: fi })?;
                for w in path.windows(2) {
                    f.add_edge(w[0], w[1])?;
                    used.set(w[0], w[1], true);
                    added.push((w[0], w[1]));
                }
                for &x in &path {
                    avoid[x] = true;
                }
            }
        }
        let add_counts = BipartiteCounts::measure(parts, added.iter().copied());
        audit.push(vec![
            Check::le("U1 e(F') <= eps^(1/2) n", f.edge_count() as f64, PipelineParams::pow_n(eps, 0.5, n) * params.tolerance, false),
            Check::holds("U2 additions balanced", add_counts.bidirectionally_balanced()),
            Check::holds("U2 additions in G and G'", added.iter().all(|&(a, b)| g.has_edge(a, b) && model.has_edge(a, b))),
        ]);
        for v in f.vertices() {
            presence[v] += 1;
        }
        out.push(f);
    }
    let mut du = vec![0usize; m];
    let mut di = vec![0usize; m];
    for f in &out {
        for (a, b) in f.edges() {
            du[a] += 1;
            di[b] += 1;
        }
    }
    let light_cap = PipelineParams::pow_n(eps, 0.25, n) * params.tolerance;
    let saturated = ustar.iter().all(|&v| du[v] == ell && di[v] == ell);
    let light_max = (0..m).filter(|&v| !in_ustar[v]).map(|v| du[v].max(di[v])).max().unwrap_or(0);
    for a in &mut audit {
        a.push(Check::holds("U3 U* saturated", saturated));
        a.push(Check::le("U3 degree outside U*", light_max as f64, light_cap, false));
    }
    let mut notes = family.notes.clone();
    notes.push(format!("|U*| = {}", ustar.len()));
    Ok((ForestFamily::new(out, audit, family.shortfall, notes), ustar))
}

#[derive(Debug, Clone, Serialize)]
pub struct HostPartition {
    #[serde(skip)]
    pub hosts: Vec<Digraph>,
    pub host_edges: Vec<usize>,
    /// W_ℓ, sorted.
    pub w: Vec<Vec<usize>>,
    /// X_ℓ = V ∖ W_ℓ.
    pub x: Vec<Vec<usize>>,
    /// Measured common degree of H_ℓ[X_ℓ] (mean semidegree).
    pub r: Vec<f64>,
    /// Edges inside slices of two different copies; in no host.
    pub collisions: Vec<(usize, usize)>,
    pub audit: Vec<Vec<Check>>,
}

impl HostPartition {
    pub fn pass_rate(&self, tag: &str) -> f64 {
        let all: Vec<&Check> = self.audit.iter().flatten().filter(|c| c.name.starts_with(tag)).collect();
        if all.is_empty() {
            return 1.0;
        }
        all.iter().filter(|c| c.pass).count() as f64 / all.len() as f64
    }
}

/// K³ edge-disjoint spanning hosts from K random slicings of each class.
/// With K = 1 the single host is G itself with W = V.
pub fn partition_host(g: &Digraph, n: usize, params: &PipelineParams, seed: Seed) -> Result<HostPartition, ForestError> {
    let k = params.k;
    if k == 0 || n < k * k {
        return Err(ForestError::InvalidParams(format!("need 1 <= K and n >= K^2, got K = {k}, n = {n}")));
    }
    let m = 3 * n;
    let k2 = k * k;
    let hosts_n = k * k2;
    let mut rng = seed.rng();
    // slice[i][v] = j with v ∈ S_{i,j}
    let mut slice = vec![vec![0usize; m]; k];
    for row in slice.iter_mut() {
        for cls in 0..3 {
            let mut vs: Vec<usize> = (cls * n..(cls + 1) * n).collect();
            vs.shuffle(&mut rng);
            for (pos, v) in vs.into_iter().enumerate() {
                row[v] = pos % k2;
            }
        }
    }
    let host_of = |i: usize, j: usize| i * k2 + j;
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); hosts_n];
    let mut collisions = Vec::new();
    let eta = to_f64(params.eta);
    for (u, v) in g.edges() {
        let same: Vec<usize> = (0..k).filter(|&i| slice[i][u] == slice[i][v]).collect();
        match same.len() {
            0 => {
                let iu: Vec<usize> = (0..k).map(|i| host_of(i, slice[i][u])).collect();
                let iv: Vec<usize> = (0..k).map(|i| host_of(i, slice[i][v])).collect();
                let near: Vec<usize> = iu.iter().chain(&iv).copied().collect();
                let x: f64 = rng.gen();
                let pe = eta / (2.0 * k as f64);
                let target = if x < pe * near.len() as f64 {
                    near[((x / pe) as usize).min(near.len() - 1)]
                } else {
                    let far: Vec<usize> = (0..hosts_n).filter(|h| !near.contains(h)).collect();
                    *far.choose(&mut rng).expect("K >= 2 leaves hosts outside I_u and I_v")
                };
                edges[target].push((u, v));
            }
            1 => edges[host_of(same[0], slice[same[0]][u])].push((u, v)),
            _ => collisions.push((u, v)),
        }
    }
    let mut hosts = Vec::with_capacity(hosts_n);
    let mut ws = Vec::new();
    let mut xs = Vec::new();
    let mut rs = Vec::new();
    let mut audit = Vec::new();
    for h in 0..hosts_n {
        let (i, j) = (h / k2, h % k2);
        let host = Digraph::from_edges(m, g.mode(), edges[h].iter().copied())?;
        let w: Vec<usize> = (0..m).filter(|&v| slice[i][v] == j).collect();
        let in_w: Vec<bool> = (0..m).map(|v| slice[i][v] == j).collect();
        let x: Vec<usize> = (0..m).filter(|&v| !in_w[v]).collect();
        let mut checks = Vec::new();
        let target = n as f64 / k2 as f64;
        for cls in 0..3 {
            let size = w.iter().filter(|&&v| v / n == cls).count();
            checks.push(Check::le(&format!("P1 |W^{}| - n/K^2", cls + 1), (size as f64 - target).abs(), 1.0, true));
        }
        let wk = |cls: usize| w.iter().filter(|&&v| v / n == cls).count().max(1) as f64;
        let mut p2_worst: f64 = 0.0;
        for &v in &w {
            for cls in 0..3 {
                for out in [true, false] {
                    let nb_h = if out { host.out_neighbors(v) } else { host.in_neighbors(v) };
                    let nb_g = if out { g.out_neighbors(v) } else { g.in_neighbors(v) };
                    let dh = nb_h.iter().filter(|&&y| in_w[y] && y / n == cls).count() as f64;
                    let dg = nb_g.iter().filter(|&&y| y / n == cls).count() as f64;
                    p2_worst = p2_worst.max((dh / wk(cls) - dg / n as f64).abs());
                }
            }
        }
        checks.push(Check::le("P2 W-degree deviation", p2_worst, 13.0 / k as f64 * params.tolerance, false));
        let xdeg: Vec<(usize, usize)> = x
            .iter()
            .map(|&v| {
                let o = host.out_neighbors(v).iter().filter(|&&y| !in_w[y]).count();
                let ii = host.in_neighbors(v).iter().filter(|&&y| !in_w[y]).count();
                (o, ii)
            })
            .collect();
        let r = if xdeg.is_empty() { 0.0 } else { xdeg.iter().map(|&(o, i)| (o + i) as f64).sum::<f64>() / (2 * xdeg.len()) as f64 };
        let p3 = xdeg.iter().map(|&(o, i)| (o as f64 - r).abs().max((i as f64 - r).abs())).fold(0.0, f64::max);
        checks.push(Check::le("P3 X-degree deviation", p3, (n as f64).powf(4.0 / 7.0) * params.tolerance, false));
        let p4 = x
            .iter()
            .map(|&v| {
                let o = host.out_neighbors(v).iter().filter(|&&y| in_w[y]).count();
                let ii = host.in_neighbors(v).iter().filter(|&&y| in_w[y]).count();
                o.min(ii)
            })
            .min()
            .unwrap_or(usize::MAX);
        let p4_bound = eta * w.len() as f64 / (30.0 * k as f64) / params.tolerance;
        checks.push(Check::ge("P4 X-to-W degree", if p4 == usize::MAX { p4_bound } else { p4 as f64 }, p4_bound, false));
        audit.push(checks);
        hosts.push(host);
        ws.push(w);
        xs.push(x);
        rs.push(r);
    }
    let total: usize = hosts.iter().map(Digraph::edge_count).sum();
    assert_eq!(total + collisions.len(), g.edge_count(), "host partition conserves edges");
    Ok(HostPartition { host_edges: hosts.iter().map(Digraph::edge_count).collect(), hosts, w: ws, x: xs, r: rs, collisions, audit })
}

/// `count` edge-disjoint linear forests in `h`: repeated maximum 1-factor
/// extraction on the split graph, with one edge dropped from each cycle.
pub fn path_cover(h: &Digraph, r: usize, count: usize, seed: Seed) -> ForestFamily {
    let m = h.vertex_count();
    let mut rest = h.clone();
    let mut rng = seed.rng();
    let mut forests = Vec::new();
    let mut audit = Vec::new();
    let rf = r as f64;
    let spread = rf.powf(0.6);
    let active: Vec<usize> = (0..m).filter(|&v| h.out_degree(v) + h.in_degree(v) > 0).collect();
    let mm = active.len().max(2) as f64;
    let pre = Check::le(
        "degree window r +- r^(3/5)",
        active
            .iter()
            .map(|&v| (h.out_degree(v) as f64 - rf).abs().max((h.in_degree(v) as f64 - rf).abs()))
            .fold(0.0, f64::max),
        spread,
        false,
    );
    for _ in 0..count {
        let mut adj: Vec<Vec<usize>> = (0..m).map(|v| rest.out_neighbors(v).to_vec()).collect();
        for row in &mut adj {
            row.shuffle(&mut rng);
        }
        let mt = hopcroft_karp(&adj, m);
        if mt.size == 0 {
            break;
        }
        let succ = mt.left.clone();
        let mut f = LinearForest::new(m);
        let mut seen = vec![false; m];
        for v in 0..m {
            if seen[v] || succ[v] == usize::MAX {
                continue;
            }
            // walk back to a path start or detect a cycle
            let mut s = v;
            loop {
                let p = mt.right[s];
                if p == usize::MAX || p == v {
                    break;
                }
                s = p;
            }
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                let y = succ[x];
                if y == usize::MAX {
                    break;
                }
                if y == s {
                    break; // dropping the closing edge of a cycle
                }
                f.add_edge(x, y).expect("matching yields paths and cycles");
                x = y;
            }
        }
        if f.is_empty() {
            break;
        }
        rest = rest.without_edges(f.edges());
        let target = mm - mm / mm.ln().powi(4);
        audit.push(vec![pre.clone(), Check::ge("e(F) >= m - m/log^4 m", f.edge_count() as f64, target, false)]);
        forests.push(f);
    }
    let shortfall = count - forests.len();
    let notes = if shortfall > 0 { vec![format!("{shortfall} forests short")] } else { Vec::new() };
    ForestFamily::new(forests, audit, shortfall, notes)
}

/// Inputs of the balanced-cover step.
pub struct BalancedCoverInput<'a> {
    /// Host; only edges inside `vprime` are used.
    pub h: &'a Digraph,
    pub t: &'a TripartiteTournament,
    pub model: &'a GBetaModel,
    pub vprime: &'a [usize],
    /// S_i per forest.
    pub forbidden: &'a [Vec<usize>],
    pub ustar: &'a [usize],
    /// Reserved edges R.
    pub reserved: &'a HashSet<(usize, usize)>,
    /// The lemma's ε (the pipeline passes 2γ^{1/4}).
    pub eps: Rational,
    pub tolerance: f64,
    pub seed: Seed,
}

/// Edge-disjoint bidirectionally balanced linear forests avoiding S_i,
/// inside (H ∩ G′) ∖ R: path covers, semidegree boosting by matchings,
/// then exact balancing by edge removal.
pub fn balanced_covers(inp: &BalancedCoverInput) -> ForestFamily {
    let t = inp.t;
    let n = t.n();
    let m = 3 * n;
    let parts = t.parts();
    let ell = inp.forbidden.len();
    let in_vp: Vec<bool> = (0..m).map(|v| inp.vprime.contains(&v)).collect();
    let base = inp.h.filter_edges(|a, b| in_vp[a] && in_vp[b] && inp.model.has_edge(a, b) && !inp.reserved.contains(&(a, b)));
    let r = if inp.vprime.is_empty() { 0 } else { base.edge_count() / inp.vprime.len() };
    let cover = path_cover(&base, r, ell, inp.seed);
    let mut notes = cover.notes.clone();
    let forb: Vec<Vec<bool>> = inp.forbidden.iter().map(|s| (0..m).map(|v| s.contains(&v)).collect()).collect();
    let in_ustar: Vec<bool> = (0..m).map(|v| inp.ustar.contains(&v)).collect();
    // forests beyond those produced stay empty
    let mut fs: Vec<LinearForest> = (0..ell)
        .map(|i| {
            let mut f = LinearForest::new(m);
            if let Some(src) = cover.forests.get(i) {
                for (a, b) in src.edges() {
                    if !forb[i][a] && !forb[i][b] {
                        f.add_edge(a, b).expect("subforest");
                    }
                }
            }
            f
        })
        .collect();
    let eps = inp.eps;
    let tol = inp.tolerance;
    // step 1: boosting
    let mut dout = vec![0usize; m];
    let mut din = vec![0usize; m];
    for f in &fs {
        for (a, b) in f.edges() {
            dout[a] += 1;
            din[b] += 1;
        }
    }
    let low = ell as f64 - PipelineParams::pow_n(eps, 0.25, n);
    let xplus: Vec<usize> = inp.vprime.iter().copied().filter(|&v| !in_ustar[v] && (dout[v] as f64) <= low).collect();
    let xminus: Vec<usize> = inp.vprime.iter().copied().filter(|&v| !in_ustar[v] && (din[v] as f64) <= low).collect();
    let mut taken = BitMatrix::new(m);
    for f in &fs {
        for (a, b) in f.edges() {
            taken.set(a, b, true);
        }
    }
    let mut l_out = vec![0usize; m];
    let mut l_in = vec![0usize; m];
    let y_cap = PipelineParams::pow_n(eps, 0.125, n) - 1.0;
    let mut rng = inp.seed.derive(1).rng();
    let mut boost_fail = 0usize;
    for (i, f) in fs.iter_mut().enumerate() {
        let y: Vec<bool> = (0..m).map(|v| l_out[v].max(l_in[v]) as f64 >= y_cap).collect();
        let mut tset = vec![false; m];
        for v in 0..m {
            if y[v] || xplus.contains(&v) || xminus.contains(&v) {
                tset[v] = true;
            }
        }
        for v in 0..m {
            if y[v] || xplus.contains(&v) {
                if let Some(s) = f.succ(v) {
                    tset[s] = true;
                }
            }
            if y[v] || xminus.contains(&v) {
                if let Some(p) = f.pred(v) {
                    tset[p] = true;
                }
            }
        }
        let mut matched = vec![false; m];
        for plus in [true, false] {
            let xs: Vec<usize> = if plus { &xplus } else { &xminus }
                .iter()
                .copied()
                .filter(|&v| !forb[i][v] && if plus { f.out_degree(v) == 0 } else { f.in_degree(v) == 0 })
                .collect();
            for x in xs {
                let mut cands: Vec<usize> = if plus { base.out_neighbors(x) } else { base.in_neighbors(x) }
                    .iter()
                    .copied()
                    .filter(|&y| {
                        let (a, b) = if plus { (x, y) } else { (y, x) };
                        !taken.get(a, b) && !forb[i][y] && !tset[y] && !matched[y]
                    })
                    .collect();
                cands.shuffle(&mut rng);
                let Some(&y) = cands.first() else {
                    boost_fail += 1;
                    continue;
                };
                // free y entirely, then attach it
                let mut dropped = Vec::new();
                if let Some(s) = f.succ(y) {
                    dropped.push((y, s));
                }
                if let Some(p) = f.pred(y) {
                    dropped.push((p, y));
                }
                for (a, b) in dropped {
                    f.remove_edge(a, b).expect("present");
                    l_out[a] += 1;
                    l_in[b] += 1;
                }
                let (a, b) = if plus { (x, y) } else { (y, x) };
                if f.add_edge(a, b).is_ok() {
                    taken.set(a, b, true);
                    matched[y] = true;
                    matched[x] = true;
                } else {
                    boost_fail += 1;
                }
            }
        }
    }
    if boost_fail > 0 {
        notes.push(format!("boosting: {boost_fail} vertices left unmatched"));
    }
    // step 2: exact balancing, removals avoiding heavy leftover vertices
    let mut lt_out = vec![0usize; m];
    let mut lt_in = vec![0usize; m];
    let ytil_cap = PipelineParams::pow_n(eps, 1.0 / 16.0, n) - 1.0;
    let mut touched_heavy = 0usize;
    for f in fs.iter_mut() {
        let heavy: Vec<bool> = (0..m).map(|v| lt_out[v].max(lt_in[v]) as f64 >= ytil_cap).collect();
        for cw in [true, false] {
            loop {
                let c = BipartiteCounts::measure(parts, f.edges());
                let cls = if cw { c.clockwise() } else { c.counterclockwise() };
                let target = *cls.iter().min().unwrap();
                let Some(src) = (0..3).find(|&s| cls[s] > target) else { break };
                let (from, to) = if cw { (src, (src + 1) % 3) } else { (src, (src + 2) % 3) };
                let (from, to) = if cw {
                    (from, to)
                } else {
                    // counterclockwise classes listed as V2→V1, V3→V2, V1→V3
                    ((src + 1) % 3, src)
                };
                let mut pool: Vec<(usize, usize)> = f.edges().filter(|&(a, b)| a / n == from && b / n == to).collect();
                pool.sort_by_key(|&(a, b)| (heavy[a] || heavy[b], a, b));
                let (a, b) = pool[0];
                if heavy[a] || heavy[b] {
                    touched_heavy += 1;
                }
                f.remove_edge(a, b).expect("present");
                lt_out[a] += 1;
                lt_in[b] += 1;
            }
        }
    }
    if touched_heavy > 0 {
        notes.push(format!("balancing touched heavy vertices {touched_heavy} times"));
    }
    let mut fo = vec![0usize; m];
    let mut fi = vec![0usize; m];
    for f in &fs {
        for (a, b) in f.edges() {
            fo[a] += 1;
            fi[b] += 1;
        }
    }
    let f4 = inp.vprime.iter().filter(|&&v| !in_ustar[v]).map(|&v| fo[v].min(fi[v])).min().unwrap_or(ell);
    let audit = fs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let c = BipartiteCounts::measure(parts, f.edges());
            vec![
                Check::ge("F1 e(F) >= |V'| - 5 eps^(1/8) n", f.edge_count() as f64, inp.vprime.len() as f64 - 5.0 * PipelineParams::pow_n(eps, 0.125, n) * tol, false),
                Check::holds("F2 inside (H and G') minus R", f.edges().all(|(a, b)| base.has_edge(a, b))),
                Check::holds("F3 avoids S_i", !f.vertices().iter().any(|&v| forb[i][v])),
                Check::ge("F4 union semidegree", f4 as f64, ell as f64 - 2.0 * PipelineParams::pow_n(eps, 1.0 / 16.0, n) * tol, false),
                Check::holds("bidirectionally balanced", c.bidirectionally_balanced()),
            ]
        })
        .collect();
    let _ = r;
    ForestFamily::new(fs, audit, cover.shortfall, notes)
}

/// Everything the endpoint extension needs for one forest.
pub struct ExtensionInput<'a> {
    pub n: usize,
    pub model: &'a GBetaModel,
    /// Available host edges H′.
    pub available: &'a Digraph,
    pub in_w: &'a [bool],
    pub forest: &'a LinearForest,
    pub budget: usize,
}

/// Extends `forest` with short paths inside W through H′ ∩ G′ so that
/// every X vertex is internal, every path starts in W3 and ends in W2,
/// and the counterclockwise bookkeeping is preserved.
pub fn extend_to_endpoints(inp: &ExtensionInput, index: usize) -> Result<LinearForest, ForestError> {
    let n = inp.n;
    let m = 3 * n;
    let f0 = inp.forest;
    let mut f = f0.clone();
    let in_w = inp.in_w;
    let mut busy: Vec<bool> = (0..m).map(|v| f0.covers(v)).collect();
    let mut targets = Vec::new();
    for v in 0..m {
        let (din, dout) = (f0.in_degree(v), f0.out_degree(v));
        let missing_out = dout == 0 && (din == 1 || !in_w[v]) && !(in_w[v] && v / n == 1 && din == 1);
        let missing_in = din == 0 && (dout == 1 || !in_w[v]) && !(in_w[v] && v / n == 2 && dout == 1);
        if missing_out || missing_in {
            targets.push((v, missing_out, missing_in));
        }
    }
    let g = inp.available;
    let model = inp.model;
    for (y, need_out, need_in) in targets {
        let all_ccw = y < n && model.is_backward(y);
        for forward in [true, false] {
            if (forward && !need_out) || (!forward && !need_in) {
                continue;
            }
            let nb = |x: usize, fw: bool| -> Vec<usize> {
                let list = if fw { g.out_neighbors(x) } else { g.in_neighbors(x) };
                list.iter()
                    .copied()
                    .filter(|&z| {
                        let (a, b) = walk_edge(fw, x, z);
                        model.has_edge(a, b)
                    })
                    .collect()
            };
            let step_ok = |_walk: &[usize], next: usize| in_w[next] && !busy[next];
            let done = |walk: &[usize]| {
                let last = *walk.last().unwrap();
                let end_ok = if forward { last / n == 1 } else { last / n == 2 };
                if !end_ok {
                    return false;
                }
                let mut ccw = [0usize; 3];
                let mut cw = 0;
                for w in walk.windows(2) {
                    let (a, b) = walk_edge(forward, w[0], w[1]);
                    if is_cw(n, a, b) {
                        cw += 1;
                    } else {
                        ccw[a / n] += 1;
                    }
                }
                if all_ccw {
                    cw == 0
                } else {
                    ccw[0] == ccw[1] && ccw[1] == ccw[2]
                }
            };
            let mut search = PathSearch { forward, max_len: 5, budget: inp.budget, neighbours: &nb, step_ok: &step_ok, done: &done };
            let path = search.run(y).ok_or(ForestError::ExtensionImpossible { vertex: y, forest: index })?;
            for w in path.windows(2) {
                f.add_edge(w[0], w[1])?;
            }
            for &x in &path {
                busy[x] = true;
            }
        }
    }
    Ok(f)
}
