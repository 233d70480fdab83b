//! Hamilton cycles in dense digraphs, perfect matchings, and the two
//! contraction-based closers that extend a V3→V2 matching to a Hamilton
//! cycle.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::digraph::{Digraph, Mode};
use crate::factorization::merge_pass;
use crate::matching::{hall_violator, hopcroft_karp, Matching};
use crate::rational::{ceil_mul, floor_mul, Rational};
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HamiltonError {
    #[error("minimum semidegree {min_semidegree} is below {required}")]
    PreconditionViolated { min_semidegree: usize, required: usize },
    #[error("no Hamilton cycle exists")]
    NoHamiltonCycle,
    #[error("search budget of {budget} expansions exhausted")]
    BudgetExhausted { budget: usize },
    #[error("degree audit failed: {0}")]
    DegreeShortfall(String),
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("no perfect matching for {side}; Hall violator {violator:?}")]
    MatchingInfeasible { side: &'static str, violator: Vec<usize> },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<HamiltonError>,
    },
}

impl HamiltonError {
    fn at(self, stage: &'static str) -> Self {
        HamiltonError::Stage { stage, source: Box::new(self) }
    }

    /// The error with stage tags stripped.
    pub fn root(&self) -> &HamiltonError {
        match self {
            HamiltonError::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GhOptions {
    pub override_precondition: bool,
    pub budget: usize,
    pub seed: Seed,
}

impl Default for GhOptions {
    fn default() -> Self {
        GhOptions { override_precondition: false, budget: 1_000_000, seed: Seed(0) }
    }
}

const EXACT_LIMIT: usize = 14;
const EXACT_FALLBACK_LIMIT: usize = 18;

/// Hamilton cycle by bitmask DP over paths starting at vertex 0.
fn held_karp(g: &Digraph) -> Option<Vec<usize>> {
    let m = g.vertex_count();
    let out: Vec<u32> = (0..m).map(|v| g.out_neighbors(v).iter().fold(0u32, |a, &w| a | 1 << w)).collect();
    let full = (1u32 << m) - 1;
    let mut ends = vec![0u32; 1 << m];
    ends[1] = 1;
    for mask in (1..=full).filter(|x| x & 1 == 1) {
        let mut e = ends[mask as usize];
        while e != 0 {
            let v = e.trailing_zeros() as usize;
            e &= e - 1;
            let mut next = out[v] & !mask;
            while next != 0 {
                let w = next.trailing_zeros();
                next &= next - 1;
                ends[(mask | 1 << w) as usize] |= 1 << w;
            }
        }
    }
    let last = (0..m).find(|&v| ends[full as usize] >> v & 1 == 1 && out[v] & 1 == 1)?;
    let mut cycle = vec![last];
    let (mut mask, mut cur) = (full, last);
    while mask != 1 {
        let prev = mask ^ (1 << cur);
        cur = (0..m)
            .find(|&u| ends[prev as usize] >> u & 1 == 1 && out[u] >> cur & 1 == 1)
            .expect("DP table is consistent");
        mask = prev;
        cycle.push(cur);
    }
    cycle.reverse();
    Some(cycle)
}

fn strongly_connected(g: &Digraph) -> bool {
    let m = g.vertex_count();
    let reach = |fwd: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            let nb = if fwd { g.out_neighbors(v) } else { g.in_neighbors(v) };
            for &w in nb {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// 1-factor followed by 2-edge splicing; works whenever the dense graph
/// has a cycle factor the splices can join.
fn factor_merge(g: &Digraph, rng: &mut impl Rng, tries: usize) -> Option<Vec<usize>> {
    let m = g.vertex_count();
    for t in 0..tries {
        let mut adj: Vec<Vec<usize>> = (0..m).map(|v| g.out_neighbors(v).to_vec()).collect();
        if t > 0 {
            for row in &mut adj {
                row.shuffle(rng);
            }
        }
        let mt = hopcroft_karp(&adj, m);
        if !mt.is_perfect() {
            return None;
        }
        let mut succ = mt.left;
        merge_pass(g, &mut succ);
        let mut cycle = vec![0];
        let mut x = succ[0];
        while x != 0 {
            cycle.push(x);
            x = succ[x];
        }
        if cycle.len() == m {
            return Some(cycle);
        }
    }
    None
}

/// Warnsdorff-ordered DFS with a shared expansion budget.
fn dfs_search(g: &Digraph, rng: &mut impl Rng, budget: &mut usize, limit: usize) -> Option<Vec<usize>> {
    let m = g.vertex_count();
    let start = rng.gen_range(0..m);
    let mut used = vec![false; m];
    let mut path = vec![start];
    used[start] = true;
    let mut spent = 0usize;
    fn rec(
        g: &Digraph,
        start: usize,
        used: &mut [bool],
        path: &mut Vec<usize>,
        rng: &mut impl Rng,
        budget: &mut usize,
        spent: &mut usize,
        limit: usize,
    ) -> bool {
        let m = used.len();
        let last = *path.last().unwrap();
        if path.len() == m {
            return g.has_edge(last, start);
        }
        if *budget == 0 || *spent >= limit {
            return false;
        }
        *budget -= 1;
        *spent += 1;
        let mut cand: Vec<(usize, u32, usize)> = g
            .out_neighbors(last)
            .iter()
            .filter(|&&w| !used[w])
            .map(|&w| (g.out_neighbors(w).iter().filter(|&&x| !used[x]).count(), rng.gen(), w))
            .collect();
        cand.sort_unstable();
        for (onward, _, w) in cand {
            if onward == 0 && path.len() + 1 < m {
                continue;
            }
            used[w] = true;
            path.push(w);
            if rec(g, start, used, path, rng, budget, spent, limit) {
                return true;
            }
            path.pop();
            used[w] = false;
            if *budget == 0 || *spent >= limit {
                return false;
            }
        }
        false
    }
    rec(g, start, &mut used, &mut path, rng, budget, &mut spent, limit).then_some(path)
}

/// Hamilton cycle in a digraph with δ⁰ ≥ ⌈m/2⌉ (audited unless
/// overridden). `NoHamiltonCycle` is definitive; `BudgetExhausted` is not.
pub fn ghouila_houri_hamilton(g: &Digraph, opts: &GhOptions) -> Result<Vec<usize>, HamiltonError> {
    let m = g.vertex_count();
    let required = m.div_ceil(2);
    let delta = g.min_semidegree();
    if delta < required && !opts.override_precondition {
        return Err(HamiltonError::PreconditionViolated { min_semidegree: delta, required });
    }
    if m < 2 || delta == 0 || !strongly_connected(g) {
        return Err(HamiltonError::NoHamiltonCycle);
    }
    if m <= EXACT_LIMIT {
        return held_karp(g).ok_or(HamiltonError::NoHamiltonCycle);
    }
    let mut rng = opts.seed.rng();
    if let Some(c) = factor_merge(g, &mut rng, 4) {
        return Ok(c);
    }
    let mut budget = opts.budget;
    let mut limit = 20 * m;
    while budget > 0 {
        if let Some(c) = dfs_search(g, &mut rng, &mut budget, limit) {
            return Ok(c);
        }
        limit = limit.saturating_mul(2);
    }
    if m <= EXACT_FALLBACK_LIMIT {
        return held_karp(g).ok_or(HamiltonError::NoHamiltonCycle);
    }
    Err(HamiltonError::BudgetExhausted { budget: opts.budget })
}

#[derive(Debug, Clone)]
pub struct MatchingOutcome {
    pub matching: Matching,
    pub perfect: bool,
    /// δ(H) ≥ m/2 held, so perfection was guaranteed.
    pub guaranteed: bool,
}

/// Maximum matching of a balanced bipartite graph given by left adjacency.
/// Panics if the minimum-degree guarantee holds yet no perfect matching
/// was found.
pub fn bipartite_perfect_matching(adj: &[Vec<usize>], right_count: usize) -> MatchingOutcome {
    let m = adj.len();
    let matching = hopcroft_karp(adj, right_count);
    let perfect = m == right_count && matching.size == m;
    let mut right_deg = vec![0usize; right_count];
    for row in adj {
        for &b in row {
            right_deg[b] += 1;
        }
    }
    let min_deg = adj.iter().map(Vec::len).chain(right_deg).min().unwrap_or(0);
    let guaranteed = m == right_count && 2 * min_deg >= m;
    assert!(!guaranteed || perfect, "minimum degree m/2 forces a perfect matching");
    MatchingOutcome { matching, perfect, guaranteed }
}

/// Vertex role in a closing instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    /// →V1: V3 → v → V2.
    Forward1,
    /// ←V1: V2 → v → V3.
    Backward1,
    Two,
    Three,
}

#[derive(Debug, Clone, Copy)]
pub struct ClosingOptions {
    /// Level at which the degree conditions are audited.
    pub eps: Rational,
    /// Fail on an audit shortfall instead of attempting anyway.
    pub strict: bool,
    pub retries: usize,
    pub seed: Seed,
    pub budget: usize,
}

impl Default for ClosingOptions {
    fn default() -> Self {
        ClosingOptions { eps: Rational::new(1, 10), strict: false, retries: 8, seed: Seed(0), budget: 200_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeCondition {
    pub name: String,
    pub observed: usize,
    pub required: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeAudit {
    pub conditions: Vec<DegreeCondition>,
    pub pass: bool,
}

impl DegreeAudit {
    fn new(conditions: Vec<DegreeCondition>) -> Self {
        DegreeAudit { pass: conditions.iter().all(|c| c.pass), conditions }
    }

    fn failures(&self) -> String {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} = {} < {}", c.name, c.observed, c.required))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn at_least(name: &str, observed: usize, required: usize) -> DegreeCondition {
    DegreeCondition { name: name.into(), observed, required, pass: observed >= required }
}

fn at_most(name: &str, observed: usize, bound: usize) -> DegreeCondition {
    DegreeCondition { name: name.into(), observed, required: bound, pass: observed <= bound }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosingOutcome {
    pub cycle: Vec<usize>,
    pub audit: DegreeAudit,
    pub attempts: usize,
}

struct Sides {
    fwd: Vec<usize>,
    bwd: Vec<usize>,
    two: Vec<usize>,
    three: Vec<usize>,
}

fn split_roles(g: &Digraph, roles: &[Role], m_pairs: &[(usize, usize)]) -> Result<Sides, HamiltonError> {
    if roles.len() != g.vertex_count() {
        return Err(HamiltonError::Malformed(format!("{} roles for {} vertices", roles.len(), g.vertex_count())));
    }
    let pick = |r: Role| (0..roles.len()).filter(|&v| roles[v] == r).collect::<Vec<_>>();
    let s = Sides { fwd: pick(Role::Forward1), bwd: pick(Role::Backward1), two: pick(Role::Two), three: pick(Role::Three) };
    if s.two.len() != s.three.len() || s.two.is_empty() {
        return Err(HamiltonError::Malformed(format!("|V2| = {} and |V3| = {} must be equal and positive", s.two.len(), s.three.len())));
    }
    let mut seen = HashSet::new();
    for &(c, b) in m_pairs {
        if c >= roles.len() || b >= roles.len() || roles[c] != Role::Three || roles[b] != Role::Two {
            return Err(HamiltonError::Malformed(format!("matching pair ({c}, {b}) is not V3→V2")));
        }
        if !seen.insert(c) || !seen.insert(b) {
            return Err(HamiltonError::Malformed(format!("matching pair ({c}, {b}) shares a vertex")));
        }
    }
    Ok(s)
}

fn degree_into(g: &Digraph, v: usize, set: &[bool], out: bool) -> usize {
    let nb = if out { g.out_neighbors(v) } else { g.in_neighbors(v) };
    nb.iter().filter(|&&w| set[w]).count()
}

fn role_mask(roles: &[Role], wanted: &[Role]) -> Vec<bool> {
    roles.iter().map(|r| wanted.contains(r)).collect()
}

fn min_over(vs: &[usize], f: impl Fn(usize) -> usize) -> usize {
    vs.iter().map(|&v| f(v)).min().unwrap_or(usize::MAX)
}

fn audit_gbeta(g: &Digraph, roles: &[Role], s: &Sides, k: usize, eps: Rational) -> DegreeAudit {
    let n = s.two.len();
    let req = ceil_mul(Rational::from_integer(1) - eps, n).max(0) as usize;
    let size_cap = floor_mul(Rational::from_integer(1) - eps * 8, n).max(0) as usize;
    let mk = |w: &[Role]| role_mask(roles, w);
    let (v2, v3) = (mk(&[Role::Two]), mk(&[Role::Three]));
    let (b3, f3) = (mk(&[Role::Backward1, Role::Three]), mk(&[Role::Forward1, Role::Three]));
    let (f2, b2) = (mk(&[Role::Forward1, Role::Two]), mk(&[Role::Backward1, Role::Two]));
    let d1 = min_over(&s.fwd, |v| degree_into(g, v, &v2, true).min(degree_into(g, v, &v3, false)));
    let d2 = min_over(&s.bwd, |v| degree_into(g, v, &v3, true).min(degree_into(g, v, &v2, false)));
    let d3 = min_over(&s.two, |v| degree_into(g, v, &b3, true).min(degree_into(g, v, &f3, false)));
    let d4 = min_over(&s.three, |v| degree_into(g, v, &f2, true).min(degree_into(g, v, &b2, false)));
    let cap = |x: usize| if x == usize::MAX { req } else { x };
    DegreeAudit::new(vec![
        at_least("D1", cap(d1), req),
        at_least("D2", cap(d2), req),
        at_least("D3", cap(d3), req),
        at_least("D4", cap(d4), req),
        at_most("|fwd V1|", s.fwd.len(), size_cap),
        at_most("|bwd V1|", s.bwd.len(), size_cap),
        at_most("|M|", k, floor_mul(eps, n).max(0) as usize),
    ])
}

fn audit_c3(g: &Digraph, roles: &[Role], s: &Sides, eps: Rational) -> DegreeAudit {
    let n = s.two.len();
    let req = ceil_mul(Rational::from_integer(1) - eps, n).max(0) as usize;
    let v1 = role_mask(roles, &[Role::Forward1, Role::Backward1]);
    let v2 = role_mask(roles, &[Role::Two]);
    let v3 = role_mask(roles, &[Role::Three]);
    let ones: Vec<usize> = s.fwd.iter().chain(&s.bwd).copied().collect();
    let cap = |x: usize| if x == usize::MAX { req } else { x };
    let c1 = min_over(&ones, |v| degree_into(g, v, &v2, true).min(degree_into(g, v, &v3, false)));
    let c2 = min_over(&s.two, |v| degree_into(g, v, &v3, true).min(degree_into(g, v, &v1, false)));
    let c3 = min_over(&s.three, |v| degree_into(g, v, &v1, true).min(degree_into(g, v, &v2, false)));
    DegreeAudit::new(vec![
        at_least("V1 semidegree", cap(c1), req),
        at_least("V2 semidegree", cap(c2), req),
        at_least("V3 semidegree", cap(c3), req),
        at_least("|V1|", ones.len(), req),
    ])
}

/// Hamilton cycle of `h`, treating a single vertex as closed when
/// `self_loop` holds.
fn contracted_cycle(h: &Digraph, self_loop: bool, opts: &GhOptions) -> Result<Vec<usize>, HamiltonError> {
    if h.vertex_count() == 1 {
        return if self_loop { Ok(vec![0]) } else { Err(HamiltonError::NoHamiltonCycle) };
    }
    ghouila_houri_hamilton(h, opts)
}

/// Contracts each path to one node (entered at its first vertex, left
/// from its last) alongside free vertices, finds a Hamilton cycle, and
/// expands it back.
fn close_paths(
    g: &Digraph,
    paths: &[Vec<usize>],
    free: &[usize],
    opts: &GhOptions,
) -> Result<Vec<usize>, HamiltonError> {
    let np = paths.len();
    let total = np + free.len();
    let first = |i: usize| if i < np { paths[i][0] } else { free[i - np] };
    let last = |i: usize| if i < np { *paths[i].last().unwrap() } else { free[i - np] };
    let mut edges = Vec::new();
    for i in 0..total {
        for j in 0..total {
            if i != j && (i < np || j < np) && g.has_edge(last(i), first(j)) {
                edges.push((i, j));
            }
        }
    }
    let h = Digraph::from_edges(total, Mode::General, edges).expect("contraction creates no multi-edges");
    let self_loop = total == 1 && g.has_edge(last(0), first(0));
    let c = contracted_cycle(&h, self_loop, opts)?;
    let mut out = Vec::with_capacity(g.vertex_count());
    for i in c {
        if i < np {
            out.extend_from_slice(&paths[i]);
        } else {
            out.push(free[i - np]);
        }
    }
    Ok(out)
}

fn verify_closing(g: &Digraph, cycle: &[usize], m_pairs: &[(usize, usize)]) -> Result<(), HamiltonError> {
    let m = g.vertex_count();
    let virt: HashSet<(usize, usize)> = m_pairs.iter().copied().collect();
    let mut seen = vec![false; m];
    for &v in cycle {
        if seen[v] {
            return Err(HamiltonError::Malformed(format!("vertex {v} repeated")));
        }
        seen[v] = true;
    }
    if cycle.len() != m {
        return Err(HamiltonError::Malformed("cycle is not spanning".into()));
    }
    let edges: HashSet<(usize, usize)> = (0..m).map(|i| (cycle[i], cycle[(i + 1) % m])).collect();
    if let Some(e) = edges.iter().find(|e| !g.has_edge(e.0, e.1) && !virt.contains(e)) {
        return Err(HamiltonError::Malformed(format!("edge {e:?} not in host")));
    }
    if let Some(e) = m_pairs.iter().find(|e| !edges.contains(e)) {
        return Err(HamiltonError::Malformed(format!("prescribed pair {e:?} missing")));
    }
    Ok(())
}

/// Hamilton cycle through →V1 ∪ ←V1 ∪ V2 ∪ V3 containing every pair of
/// `m_pairs`. Pairs need not be edges of `g`; they are used as given.
pub fn close_gbeta(
    g: &Digraph,
    roles: &[Role],
    m_pairs: &[(usize, usize)],
    opts: &ClosingOptions,
) -> Result<ClosingOutcome, HamiltonError> {
    let s = split_roles(g, roles, m_pairs)?;
    let n = s.two.len();
    let k = m_pairs.len();
    if k >= n {
        return Err(HamiltonError::Malformed(format!("|M| = {k} must be below |V2| = {n}")));
    }
    let audit = audit_gbeta(g, roles, &s, k, opts.eps);
    if opts.strict && !audit.pass {
        return Err(HamiltonError::DegreeShortfall(audit.failures()));
    }
    let in_m: HashSet<usize> = m_pairs.iter().flat_map(|&(c, b)| [c, b]).collect();
    let mut rng = opts.seed.rng();
    let mut last_err = HamiltonError::NoHamiltonCycle;
    for attempt in 0..=opts.retries {
        let gh = GhOptions { override_precondition: !opts.strict, budget: opts.budget, seed: opts.seed.derive(attempt as u64) };
        // ←M pairs b_i → c_{i+1} after listing the M pairs first
        let mut bs: Vec<usize> = m_pairs.iter().map(|p| p.1).collect();
        let mut cs: Vec<usize> = m_pairs.iter().map(|p| p.0).collect();
        let mut rest_b: Vec<usize> = s.two.iter().copied().filter(|v| !in_m.contains(v)).collect();
        let mut rest_c: Vec<usize> = s.three.iter().copied().filter(|v| !in_m.contains(v)).collect();
        if attempt > 0 {
            rest_b.shuffle(&mut rng);
            rest_c.shuffle(&mut rng);
        }
        bs.extend(rest_b);
        cs.extend(rest_c);
        // stage 1: nodes i ∈ k..n enter at b_i and leave from c_{i+1}; node
        // n−1 absorbs the chain through M
        let nodes: Vec<Vec<usize>> = (k..n)
            .map(|i| {
                let out = if i + 1 < n { cs[i + 1] } else { cs[k % n] };
                vec![bs[i], out]
            })
            .collect();
        let stage1 = match close_paths(&g.filter_edges(|u, v| forward_edge(roles, u, v)), &nodes, &s.fwd, &gh) {
            Ok(c) => c,
            Err(e) => {
                last_err = e.at("stage 1");
                continue;
            }
        };
        // cut the ←M links: each remaining run is c → [→V1] → b
        let mut paths: Vec<Vec<usize>> = m_pairs.iter().map(|&(c, b)| vec![c, b]).collect();
        let start = stage1.iter().position(|&v| roles[v] == Role::Three).expect("stage 1 visits V3");
        let mut cur = Vec::new();
        for t in 0..stage1.len() {
            let v = stage1[(start + t) % stage1.len()];
            cur.push(v);
            if roles[v] == Role::Two {
                paths.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() || paths.len() != n {
            last_err = HamiltonError::Malformed("stage 1 de-contraction is not a V3→V2 path forest".into()).at("stage 1");
            continue;
        }
        let back = g.filter_edges(|u, v| backward_edge(roles, u, v));
        match close_paths(&back, &paths, &s.bwd, &gh) {
            Ok(cycle) => {
                verify_closing(g, &cycle, m_pairs).map_err(|e| e.at("verify"))?;
                return Ok(ClosingOutcome { cycle, audit, attempts: attempt + 1 });
            }
            Err(e) => last_err = e.at("stage 2"),
        }
    }
    Err(last_err)
}

/// Edges of the forward auxiliary graph: V3 → →V1 ∪ V2 and →V1 → V2.
fn forward_edge(roles: &[Role], u: usize, v: usize) -> bool {
    matches!(
        (roles[u], roles[v]),
        (Role::Three, Role::Forward1) | (Role::Three, Role::Two) | (Role::Forward1, Role::Two)
    )
}

/// Edges of the backward auxiliary graph: V2 → ←V1 ∪ V3 and ←V1 → V3.
fn backward_edge(roles: &[Role], u: usize, v: usize) -> bool {
    matches!(
        (roles[u], roles[v]),
        (Role::Two, Role::Backward1) | (Role::Two, Role::Three) | (Role::Backward1, Role::Three)
    )
}

/// Hamilton cycle through V1 ∪ V2 ∪ V3 containing `m_pairs`, which must
/// have exactly |V2| − |V1| pairs. Both V1 roles count as V1.
pub fn close_c3(
    g: &Digraph,
    roles: &[Role],
    m_pairs: &[(usize, usize)],
    opts: &ClosingOptions,
) -> Result<ClosingOutcome, HamiltonError> {
    let s = split_roles(g, roles, m_pairs)?;
    let n = s.two.len();
    let ones: Vec<usize> = s.fwd.iter().chain(&s.bwd).copied().collect();
    if ones.len() + m_pairs.len() != n {
        return Err(HamiltonError::Malformed(format!(
            "|M| = {} but |V2| − |V1| = {}",
            m_pairs.len(),
            n as i64 - ones.len() as i64
        )));
    }
    let audit = audit_c3(g, roles, &s, opts.eps);
    if opts.strict && !audit.pass {
        return Err(HamiltonError::DegreeShortfall(audit.failures()));
    }
    let in_m: HashSet<usize> = m_pairs.iter().flat_map(|&(c, b)| [c, b]).collect();
    let free3: Vec<usize> = s.three.iter().copied().filter(|v| !in_m.contains(v)).collect();
    let free2: Vec<usize> = s.two.iter().copied().filter(|v| !in_m.contains(v)).collect();
    let mut rng = opts.seed.rng();
    let mut last_err = HamiltonError::NoHamiltonCycle;
    for attempt in 0..=opts.retries {
        let gh = GhOptions { override_precondition: !opts.strict, budget: opts.budget, seed: opts.seed.derive(attempt as u64) };
        let local = |vs: &[usize], targets: &[usize], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<usize>> {
            vs.iter()
                .map(|&u| {
                    let mut row: Vec<usize> = (0..targets.len()).filter(|&j| g.has_edge(u, targets[j])).collect();
                    if attempt > 0 {
                        row.shuffle(rng);
                    }
                    row
                })
                .collect()
        };
        let adj1 = local(&free3, &ones, &mut rng);
        let m1 = bipartite_perfect_matching(&adj1, ones.len());
        if !m1.perfect {
            let viol = hall_violator(&adj1, &m1.matching).unwrap_or_default();
            return Err(HamiltonError::MatchingInfeasible { side: "V3 → V1", violator: viol.into_iter().map(|i| free3[i]).collect() });
        }
        let adj2 = local(&ones, &free2, &mut rng);
        let m2 = bipartite_perfect_matching(&adj2, free2.len());
        if !m2.perfect {
            let viol = hall_violator(&adj2, &m2.matching).unwrap_or_default();
            return Err(HamiltonError::MatchingInfeasible { side: "V1 → V2", violator: viol.into_iter().map(|i| ones[i]).collect() });
        }
        let mut paths: Vec<Vec<usize>> = m_pairs.iter().map(|&(c, b)| vec![c, b]).collect();
        for (i, &c) in free3.iter().enumerate() {
            let a = m1.matching.left[i];
            let b = m2.matching.left[a];
            paths.push(vec![c, ones[a], free2[b]]);
        }
        let cross = g.filter_edges(|u, v| roles[u] == Role::Two && roles[v] == Role::Three);
        match close_paths(&cross, &paths, &[], &gh) {
            Ok(cycle) => {
                verify_closing(g, &cycle, m_pairs).map_err(|e| e.at("verify"))?;
                return Ok(ClosingOutcome { cycle, audit, attempts: attempt + 1 });
            }
            Err(e) => last_err = e.at("contracted cycle"),
        }
    }
    Err(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{blowup_c3, gen_gbeta};
    use crate::oracle;
    use crate::tripartite::TripartiteDigraph;

    fn random_digraph(m: usize, p: f64, rng: &mut impl Rng) -> Digraph {
        let mut edges = Vec::new();
        for u in 0..m {
            for v in 0..m {
                if u != v && rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        Digraph::from_edges(m, Mode::General, edges).unwrap()
    }

    #[test]
    fn gh_examples() {
        let c = ghouila_houri_hamilton(&Digraph::complete(4), &GhOptions::default()).unwrap();
        assert!(Digraph::complete(4).is_hamilton_cycle(&c));
        let mut edges = Vec::new();
        for base in [0, 4] {
            for u in 0..4 {
                for v in 0..4 {
                    if u != v {
                        edges.push((base + u, base + v));
                    }
                }
            }
        }
        let two = Digraph::from_edges(8, Mode::General, edges).unwrap();
        assert!(matches!(ghouila_houri_hamilton(&two, &GhOptions::default()), Err(HamiltonError::PreconditionViolated { .. })));
        let over = GhOptions { override_precondition: true, ..Default::default() };
        assert_eq!(ghouila_houri_hamilton(&two, &over), Err(HamiltonError::NoHamiltonCycle));
    }

    #[test]
    fn gh_agrees_with_oracle() {
        let mut rng = Seed(11).rng();
        let over = GhOptions { override_precondition: true, ..Default::default() };
        for _ in 0..2000 {
            let m = rng.gen_range(2..=10);
            let g = random_digraph(m, rng.gen_range(0.05..0.95), &mut rng);
            let ours = ghouila_houri_hamilton(&g, &over);
            let truth = oracle::is_hamiltonian(&g).unwrap();
            match ours {
                Ok(c) => assert!(truth && g.is_hamilton_cycle(&c)),
                Err(e) => assert!(!truth && e == HamiltonError::NoHamiltonCycle),
            }
        }
    }

    #[test]
    fn gh_dense_large() {
        let mut rng = Seed(5).rng();
        for _ in 0..20 {
            let g = random_digraph(60, 0.7, &mut rng);
            if g.min_semidegree() >= 30 {
                let c = ghouila_houri_hamilton(&g, &GhOptions::default()).unwrap();
                assert!(g.is_hamilton_cycle(&c));
            }
        }
    }

    #[test]
    fn matching_examples() {
        let full: Vec<Vec<usize>> = (0..5).map(|_| (0..5).collect()).collect();
        assert!(bipartite_perfect_matching(&full, 5).perfect);
        let star: Vec<Vec<usize>> = (0..5).map(|_| vec![0]).collect();
        assert_eq!(bipartite_perfect_matching(&star, 5).matching.size, 1);
        let mut rng = Seed(2).rng();
        for _ in 0..1000 {
            let adj: Vec<Vec<usize>> = (0..10).map(|_| (0..10).filter(|_| rng.gen_bool(0.6)).collect()).collect();
            let out = bipartite_perfect_matching(&adj, 10);
            assert!(!out.guaranteed || out.perfect);
        }
    }

    fn roles_of(model: &crate::generators::GBetaModel) -> Vec<Role> {
        let n = model.n();
        (0..3 * n)
            .map(|v| match v / n {
                0 if model.is_backward(v) => Role::Backward1,
                0 => Role::Forward1,
                1 => Role::Two,
                _ => Role::Three,
            })
            .collect()
    }

    #[test]
    fn close_gbeta_on_models() {
        let (model, t) = gen_gbeta(12, Rational::new(1, 4), Seed(7)).unwrap();
        let roles = roles_of(&model);
        let g = t.graph();
        let out = close_gbeta(g, &roles, &[], &ClosingOptions::default()).unwrap();
        assert!(g.is_hamilton_cycle(&out.cycle));
        let ccw = model.ccw_edges();
        let pairs = vec![ccw[0], (ccw.iter().find(|e| e.0 != ccw[0].0 && e.1 != ccw[0].1).unwrap()).to_owned()];
        let out = close_gbeta(g, &roles, &pairs, &ClosingOptions::default()).unwrap();
        for p in &pairs {
            assert!(crate::digraph::cycle_edges(&out.cycle).any(|e| e == *p));
        }
        let c3 = crate::generators::GBetaModel::c3(6);
        let out = close_gbeta(blowup_c3(6).graph(), &roles_of(&c3), &[], &ClosingOptions::default()).unwrap();
        assert!(blowup_c3(6).graph().is_hamilton_cycle(&out.cycle));
    }

    #[test]
    fn close_c3_examples() {
        let n = 6;
        let g = TripartiteDigraph::complete(n);
        let roles: Vec<Role> = (0..3 * n).map(|v| [Role::Forward1, Role::Two, Role::Three][v / n]).collect();
        let out = close_c3(g.graph(), &roles, &[], &ClosingOptions::default()).unwrap();
        assert!(g.graph().is_hamilton_cycle(&out.cycle));
        // drop three V1 vertices and prescribe three V3→V2 pairs
        let keep: Vec<usize> = (3..3 * n).collect();
        let sub = blowup_c3(n).graph().induced(&keep);
        let sub_roles: Vec<Role> = keep.iter().map(|&v| roles[v]).collect();
        let pairs = vec![(12 - 3, 6 - 3), (13 - 3, 8 - 3), (14 - 3, 7 - 3)];
        let out = close_c3(&sub, &sub_roles, &pairs, &ClosingOptions::default()).unwrap();
        for p in &pairs {
            assert!(crate::digraph::cycle_edges(&out.cycle).any(|e| e == *p));
        }
        assert!(matches!(close_c3(&sub, &sub_roles, &pairs[..2], &ClosingOptions::default()), Err(HamiltonError::Malformed(_))));
    }
}
