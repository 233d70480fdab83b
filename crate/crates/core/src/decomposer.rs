//! Top-level packing pipelines and certificates.
//!
//! `decompose_directed` peels Hamilton cycles off a dense regular
//! tripartite digraph. `approx_decompose_oriented` dispatches a regular
//! tripartite tournament either to the same extraction engine or, when a
//! non-expansion witness exists, to `pipeline_gbeta`, which runs the
//! forest assembly and closes one Hamilton cycle per forest.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::digraph::{cycle_edges, Digraph, GraphError};
use crate::expansion::{class_union_hints, find_non_expansion_witness, is_robust_outexpander_exact, ExpansionParams};
use crate::factorization::{merge_into_few_cycles, FactorTargets};
use crate::forest::LinearForest;
use crate::forests::{
    balanced_covers, clean_forests, cover_exceptional_c3, cover_exceptional_gbeta, endpoint_profile, extend_to_endpoints,
    partition_host, BalancedCoverInput, Check, ExtensionInput, ForestError, ForestFamily, ParamOverrides, PipelineParams,
};
use crate::generators::GBetaModel;
use crate::hamiltonicity::{close_c3, close_gbeta, ghouila_houri_hamilton, ClosingOptions, GhOptions, Role};
use crate::oracle::{max_hamilton_packing_exact, OracleError};
use crate::rational::{ceil_mul, to_f64, Rational};
use crate::seed::Seed;
use crate::structure::{nearest_gbeta, ClosenessReport};
use crate::tripartite::{BipartiteCounts, Tripartition, TripartiteDigraph, TripartiteTournament};

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error("input is not regular")]
    NotRegular,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateLabel {
    Exact,
    Extraction,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct CycleBalance {
    pub clockwise: [usize; 3],
    pub counterclockwise: [usize; 3],
    pub balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct PackingCertificate {
    pub host_hash: String,
    pub n: usize,
    pub label: CertificateLabel,
    pub cycles: Vec<Vec<usize>>,
    pub claimed_count: usize,
    pub verified: bool,
    pub balance: Vec<CycleBalance>,
}

/// SHA-256 over the vertex count, mode and sorted edge list.
pub fn host_hash(g: &Digraph) -> String {
    let mut h = Sha256::new();
    h.update(format!("{};{:?};", g.vertex_count(), g.mode()));
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.sort_unstable();
    for (u, v) in edges {
        h.update(format!("{u},{v};"));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    HostMismatch,
    ClaimedCount { claimed: usize, actual: usize },
    Coverage { cycle: usize, detail: String },
    MissingEdge { cycle: usize, edge: (usize, usize) },
    Collision { cycle: usize, edge: (usize, usize), first: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackingReport {
    pub pass: bool,
    pub count: usize,
    pub leftover_edges: usize,
    pub violation: Option<Violation>,
    pub balance: Vec<CycleBalance>,
}

fn balance_of(n: usize, cycle: &[usize]) -> CycleBalance {
    let c = BipartiteCounts::measure(Tripartition::new(n), cycle_edges(cycle));
    CycleBalance { clockwise: c.clockwise(), counterclockwise: c.counterclockwise(), balanced: c.bidirectionally_balanced() }
}

/// Full re-check of a certificate against `g`; stops at the first
/// violation.
pub fn verify_packing(g: &Digraph, n: usize, cert: &PackingCertificate) -> PackingReport {
    let fail = |v: Violation| PackingReport { pass: false, count: 0, leftover_edges: g.edge_count(), violation: Some(v), balance: Vec::new() };
    if cert.host_hash != host_hash(g) || cert.n != n || g.vertex_count() != 3 * n {
        return fail(Violation::HostMismatch);
    }
    if cert.claimed_count != cert.cycles.len() {
        return fail(Violation::ClaimedCount { claimed: cert.claimed_count, actual: cert.cycles.len() });
    }
    let m = 3 * n;
    let mut owner: std::collections::HashMap<(usize, usize), usize> = Default::default();
    let mut balance = Vec::new();
    for (i, c) in cert.cycles.iter().enumerate() {
        if c.len() != m {
            return fail(Violation::Coverage { cycle: i, detail: format!("length {} instead of {m}", c.len()) });
        }
        let mut seen = vec![false; m];
        for &v in c {
            if v >= m || seen[v] {
                return fail(Violation::Coverage { cycle: i, detail: format!("vertex {v} out of range or repeated") });
            }
            seen[v] = true;
        }
        for e in cycle_edges(c) {
            if !g.has_edge(e.0, e.1) {
                return fail(Violation::MissingEdge { cycle: i, edge: e });
            }
            if let Some(&first) = owner.get(&e) {
                return fail(Violation::Collision { cycle: i, edge: e, first });
            }
            owner.insert(e, i);
        }
        balance.push(balance_of(n, c));
    }
    PackingReport { pass: true, count: cert.cycles.len(), leftover_edges: g.edge_count() - owner.len(), violation: None, balance }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOutcome {
    Ok,
    SoftFail,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub stage: String,
    pub outcome: StageOutcome,
    pub millis: f64,
    pub detail: serde_json::Value,
}

/// Append-only stage log.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineTrace {
    events: Vec<TraceEvent>,
}

impl PipelineTrace {
    pub fn push(&mut self, stage: &str, outcome: StageOutcome, started: Instant, detail: serde_json::Value) {
        self.events.push(TraceEvent { stage: stage.into(), outcome, millis: started.elapsed().as_secs_f64() * 1e3, detail });
    }

    pub fn extend(&mut self, other: PipelineTrace) {
        self.events.extend(other.events);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub certificate: PackingCertificate,
    pub report: PackingReport,
    pub target: usize,
    pub success: bool,
    /// Every hard structural audit of every intermediate forest passed
    /// (pipeline runs only).
    pub hard_audits_pass: Option<bool>,
    pub trace: PipelineTrace,
}

/// Verifies `cycles` greedily, dropping any that is invalid or collides
/// with an earlier one, and wraps the rest in a verified certificate.
fn issue(
    g: &Digraph,
    n: usize,
    cycles: Vec<Vec<usize>>,
    label: CertificateLabel,
    target: usize,
    hard: Option<bool>,
    mut trace: PipelineTrace,
) -> Decomposition {
    let started = Instant::now();
    let mut used = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = 0;
    for c in cycles {
        let ok = g.is_hamilton_cycle(&c) && cycle_edges(&c).all(|e| !used.contains(&e));
        if ok {
            used.extend(cycle_edges(&c));
            kept.push(c);
        } else {
            dropped += 1;
        }
    }
    let mut cert = PackingCertificate {
        host_hash: host_hash(g),
        n,
        label,
        claimed_count: kept.len(),
        cycles: kept,
        verified: false,
        balance: Vec::new(),
    };
    let report = verify_packing(g, n, &cert);
    assert!(report.pass, "issued certificate must verify: {:?}", report.violation);
    assert_eq!(report.leftover_edges + cert.cycles.len() * 3 * n, g.edge_count(), "edge conservation");
    cert.verified = true;
    cert.balance = report.balance.clone();
    trace.push(
        "verify",
        if dropped == 0 { StageOutcome::Ok } else { StageOutcome::SoftFail },
        started,
        serde_json::json!({"count": report.count, "dropped": dropped, "leftover_edges": report.leftover_edges}),
    );
    Decomposition { success: cert.cycles.len() >= target, certificate: cert, report, target, hard_audits_pass: hard, trace }
}

fn strongly_connected(g: &Digraph) -> bool {
    let m = g.vertex_count();
    let reach = |out: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            let nb = if out { g.out_neighbors(v) } else { g.in_neighbors(v) };
            for &w in nb {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    m > 0 && reach(true) && reach(false)
}

/// Exact search is used up to this many vertices.
const EXACT_VERTICES: usize = 12;
/// Give up on exact search when the cycle list grows beyond this.
const EXACT_CYCLE_CAP: usize = 3_000_000;

type Bits = [u64; 4];

/// All Hamilton cycles through vertex 0, or None past `cap`.
fn all_cycles(g: &Digraph, cap: usize) -> Option<Vec<Vec<usize>>> {
    let m = g.vertex_count();
    let out: Vec<u32> = (0..m).map(|v| g.out_neighbors(v).iter().fold(0u32, |a, &w| a | 1 << w)).collect();
    let mut res = Vec::new();
    let mut path = vec![0usize];
    fn go(out: &[u32], m: usize, used: u32, path: &mut Vec<usize>, res: &mut Vec<Vec<usize>>, cap: usize) -> bool {
        let last = *path.last().unwrap();
        if path.len() == m {
            if out[last] & 1 != 0 {
                res.push(path.clone());
            }
            return res.len() <= cap;
        }
        let mut opts = out[last] & !used;
        while opts != 0 {
            let w = opts.trailing_zeros() as usize;
            opts &= opts - 1;
            path.push(w);
            if !go(out, m, used | 1 << w, path, res, cap) {
                return false;
            }
            path.pop();
        }
        true
    }
    go(&out, m, 1, &mut path, &mut res, cap).then_some(res)
}

struct ExactSearch {
    bits: Vec<Bits>,
    /// Cycles grouped by the out-edge of vertex 0 they use.
    by_first: Vec<Vec<usize>>,
    budget: usize,
    goal: usize,
    best: Vec<usize>,
}

impl ExactSearch {
    fn subset(a: &Bits, b: &Bits) -> bool {
        (0..4).all(|i| a[i] & !b[i] == 0)
    }

    fn rec(&mut self, residual: Bits, open: &mut Vec<usize>, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() > self.best.len() {
            self.best = chosen.clone();
        }
        if chosen.len() >= self.goal {
            return true;
        }
        if self.budget == 0 || open.is_empty() {
            return false;
        }
        self.budget -= 1;
        // most constrained remaining out-edge of vertex 0
        let mut pick: Option<(usize, Vec<usize>)> = None;
        for (slot, &grp) in open.iter().enumerate() {
            let cands: Vec<usize> = self.by_first[grp].iter().copied().filter(|&c| Self::subset(&self.bits[c], &residual)).collect();
            if pick.as_ref().is_none_or(|(_, p)| cands.len() < p.len()) {
                pick = Some((slot, cands));
            }
        }
        let (slot, cands) = pick.unwrap();
        let grp = open.remove(slot);
        for c in cands {
            let b = self.bits[c];
            let next = [residual[0] & !b[0], residual[1] & !b[1], residual[2] & !b[2], residual[3] & !b[3]];
            chosen.push(c);
            if self.rec(next, open, chosen) {
                return true;
            }
            chosen.pop();
            if self.budget == 0 {
                break;
            }
        }
        open.insert(slot, grp);
        false
    }
}

/// Exact packing search for small hosts: a Hamilton packing of size
/// `goal` if one exists within `budget` nodes, else the best found.
/// None when the host is too large for the cycle list.
fn exact_packing(g: &Digraph, goal: usize, budget: usize) -> Option<(Vec<Vec<usize>>, bool)> {
    let m = g.vertex_count();
    if m > EXACT_VERTICES || g.edge_count() > 256 {
        return None;
    }
    let cycles = all_cycles(g, EXACT_CYCLE_CAP)?;
    let mut index = vec![usize::MAX; m * m];
    for (i, (u, v)) in g.edges().enumerate() {
        index[u * m + v] = i;
    }
    let bits: Vec<Bits> = cycles
        .iter()
        .map(|c| {
            let mut b = [0u64; 4];
            for (u, v) in cycle_edges(c) {
                let i = index[u * m + v];
                b[i / 64] |= 1 << (i % 64);
            }
            b
        })
        .collect();
    let firsts = g.out_neighbors(0).to_vec();
    let by_first: Vec<Vec<usize>> = firsts.iter().map(|&w| (0..cycles.len()).filter(|&c| cycles[c][1] == w).collect()).collect();
    let mut full = [0u64; 4];
    for i in 0..g.edge_count() {
        full[i / 64] |= 1 << (i % 64);
    }
    let mut s = ExactSearch { bits, by_first, budget, goal, best: Vec::new() };
    let mut open: Vec<usize> = (0..firsts.len()).collect();
    let done = s.rec(full, &mut open, &mut Vec::new());
    Some((s.best.iter().map(|&i| cycles[i].clone()).collect(), done))
}

/// Distinct Hamilton cycles of `r` from seeded cycle merging, then seeded
/// Ghouila–Houri searches.
fn candidate_cycles(r: &Digraph, want: usize, seed: Seed) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<(usize, usize)>> = HashSet::new();
    let mut add = |c: Vec<usize>, out: &mut Vec<Vec<usize>>| {
        let mut key: Vec<(usize, usize)> = cycle_edges(&c).collect();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(c);
        }
    };
    if r.regular_degree() == Some(1) {
        let succ: Vec<usize> = (0..r.vertex_count()).map(|v| r.out_neighbors(v)[0]).collect();
        let mut c = vec![0];
        while succ[*c.last().unwrap()] != 0 && c.len() <= r.vertex_count() {
            c.push(succ[*c.last().unwrap()]);
        }
        if c.len() == r.vertex_count() {
            out.push(c);
        }
        return out;
    }
    for t in 0..3 * want as u64 {
        if out.len() >= want {
            return out;
        }
        if let Ok(cover) = merge_into_few_cycles(r, FactorTargets { restarts: 2, seed: seed.derive(t) }) {
            if cover.cycles.len() == 1 {
                add(cover.cycles[0].clone(), &mut out);
            }
        }
    }
    for t in 0..want as u64 {
        if out.len() >= want {
            break;
        }
        let gh = GhOptions { override_precondition: true, budget: 50_000, seed: seed.derive(1000 + t) };
        if let Ok(c) = ghouila_houri_hamilton(r, &gh) {
            add(c, &mut out);
        }
    }
    out
}

struct Extraction {
    goal: usize,
    width: usize,
    budget: usize,
    best: Vec<Vec<usize>>,
}

impl Extraction {
    fn rec(&mut self, r: &Digraph, chosen: &mut Vec<Vec<usize>>, seed: Seed) -> bool {
        if chosen.len() > self.best.len() {
            self.best = chosen.clone();
        }
        if chosen.len() >= self.goal || r.edge_count() == 0 {
            return chosen.len() >= self.goal;
        }
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let width = if chosen.is_empty() { self.width + 1 } else { self.width };
        for (i, c) in candidate_cycles(r, width, seed).into_iter().enumerate() {
            let rest = r.without_edges(cycle_edges(&c));
            assert!(rest.regular_degree().is_some(), "residual stays regular after removing a Hamilton cycle");
            chosen.push(c);
            if self.rec(&rest, chosen, seed.derive(i as u64 + 1)) {
                return true;
            }
            chosen.pop();
            if self.budget == 0 {
                break;
            }
        }
        false
    }
}

/// Repeated Hamilton-cycle extraction with backtracking; exact search on
/// small hosts. Returns (cycles, exact?).
fn extract_packing(g: &Digraph, goal: usize, budget: usize, seed: Seed) -> (Vec<Vec<usize>>, bool) {
    if let Some((cycles, _)) = exact_packing(g, goal, budget.saturating_mul(50)) {
        return (cycles, true);
    }
    let mut e = Extraction { goal, width: 2, budget, best: Vec::new() };
    e.rec(g, &mut Vec::new(), seed);
    (e.best, false)
}

#[derive(Debug, Clone, Copy)]
pub struct DirectedOptions {
    pub seed: Seed,
    /// Search nodes for the extraction engine.
    pub budget: usize,
}

impl Default for DirectedOptions {
    fn default() -> Self {
        DirectedOptions { seed: Seed(0), budget: 400 }
    }
}

fn expansion_note(g: &Digraph, seed: Seed) -> serde_json::Value {
    let p = ExpansionParams::new(Rational::new(1, 50), Rational::new(1, 5)).expect("fixed parameters");
    let m = g.vertex_count();
    if m <= 15 {
        match is_robust_outexpander_exact(g, &p) {
            Ok(d) => serde_json::json!({"method": "exact", "expander": d.is_expander()}),
            Err(e) => serde_json::json!({"method": "exact", "error": e.to_string()}),
        }
    } else {
        let w = find_non_expansion_witness(g, &p, 20_000, &class_union_hints(m / 3), seed);
        serde_json::json!({"method": "witness search", "witness_found": w.is_some()})
    }
}

/// Hamilton decomposition of a d-regular tripartite digraph by repeated
/// extraction. Partial certificates are returned on a stall; a full claim
/// is made only when the residual is empty.
pub fn decompose_directed(g: &TripartiteDigraph, eps: Rational, opts: &DirectedOptions) -> Result<Decomposition, DecomposeError> {
    let n = g.n();
    let host = g.graph();
    let d = host.regular_degree().ok_or(DecomposeError::NotRegular)?;
    let mut trace = PipelineTrace::default();
    let started = Instant::now();
    let need = ceil_mul(Rational::from_integer(1) + eps, n);
    trace.push(
        "precondition",
        if d as i64 >= need { StageOutcome::Ok } else { StageOutcome::SoftFail },
        started,
        serde_json::json!({"degree": d, "required": need, "expansion": expansion_note(host, opts.seed)}),
    );
    let started = Instant::now();
    if d == 0 || !strongly_connected(host) {
        trace.push("extraction", StageOutcome::Fail, started, serde_json::json!({"reason": "not strongly connected: no Hamilton cycle"}));
        return Ok(issue(host, n, Vec::new(), CertificateLabel::Extraction, d, None, trace));
    }
    let (cycles, exact) = extract_packing(host, d, opts.budget, opts.seed);
    let label = if exact { CertificateLabel::Exact } else { CertificateLabel::Extraction };
    trace.push(
        "extraction",
        if cycles.len() == d { StageOutcome::Ok } else { StageOutcome::SoftFail },
        started,
        serde_json::json!({"cycles": cycles.len(), "degree": d, "exact": exact}),
    );
    Ok(issue(host, n, cycles, label, d, None, trace))
}

#[derive(Debug, Clone, Copy)]
pub struct OrientedOptions {
    pub seed: Seed,
    pub overrides: ParamOverrides,
    pub extraction_budget: usize,
    pub witness_budget: usize,
    /// Hosts with at most this many vertices use the exact oracle packing.
    pub exact_vertices: usize,
}

impl Default for OrientedOptions {
    fn default() -> Self {
        OrientedOptions { seed: Seed(0), overrides: ParamOverrides::default(), extraction_budget: 200, witness_budget: 20_000, exact_vertices: 12 }
    }
}

fn target_count(delta: Rational, n: usize) -> usize {
    ceil_mul(Rational::from_integer(1) - delta, n).max(0) as usize
}

/// Approximate Hamilton decomposition of a regular tripartite tournament.
pub fn approx_decompose_oriented(t: &TripartiteTournament, delta: Rational, opts: &OrientedOptions) -> Result<Decomposition, DecomposeError> {
    let n = t.n();
    let g = t.graph();
    let d = g.regular_degree().ok_or(DecomposeError::NotRegular)?;
    let target = target_count(delta, n);
    let mut trace = PipelineTrace::default();
    let started = Instant::now();
    if g.vertex_count() <= opts.exact_vertices {
        let (k, cycles) = max_hamilton_packing_exact(g, d)?;
        trace.push("exact packing", StageOutcome::Ok, started, serde_json::json!({"k": k}));
        return Ok(issue(g, n, cycles, CertificateLabel::Exact, target, None, trace));
    }
    let p = ExpansionParams::new(Rational::new(1, 50), Rational::new(1, 5)).expect("fixed parameters");
    let witness = find_non_expansion_witness(g, &p, opts.witness_budget, &class_union_hints(n), opts.seed.derive(11));
    trace.push(
        "dispatch",
        StageOutcome::Ok,
        started,
        serde_json::json!({"witness": witness.as_ref().map(|w| w.set.clone()), "branch": if witness.is_some() { "pipeline" } else { "extraction" }}),
    );
    let run_extraction = |trace: &mut PipelineTrace| {
        let started = Instant::now();
        let (cycles, exact) = extract_packing(g, d, opts.extraction_budget, opts.seed.derive(12));
        trace.push("extraction", StageOutcome::Ok, started, serde_json::json!({"cycles": cycles.len(), "exact": exact}));
        cycles
    };
    let run_pipeline = |trace: &mut PipelineTrace| -> Result<(Vec<Vec<usize>>, Option<bool>), DecomposeError> {
        let started = Instant::now();
        let report = nearest_gbeta(t);
        trace.push("structure", StageOutcome::Ok, started, serde_json::to_value(report.to_doc()).unwrap_or_default());
        let out = pipeline_gbeta(t, &report, delta, &opts.overrides, opts.seed.derive(13))?;
        trace.extend(out.trace);
        Ok((out.certificate.cycles, out.hard_audits_pass))
    };
    let (first, second): (Vec<Vec<usize>>, Option<(Vec<Vec<usize>>, Option<bool>)>);
    let mut hard = None;
    if witness.is_some() {
        let (c, h) = run_pipeline(&mut trace)?;
        hard = h;
        first = c;
        second = (first.len() < target).then(|| (run_extraction(&mut trace), None));
    } else {
        first = run_extraction(&mut trace);
        second = if first.len() < target { Some(run_pipeline(&mut trace)?) } else { None };
    }
    let (label_first, label_second) = if witness.is_some() {
        (CertificateLabel::Pipeline, CertificateLabel::Extraction)
    } else {
        (CertificateLabel::Extraction, CertificateLabel::Pipeline)
    };
    let (cycles, label) = match second {
        Some((c, h)) if c.len() > first.len() => {
            if h.is_some() {
                hard = h;
            }
            (c, label_second)
        }
        _ => (first, label_first),
    };
    Ok(issue(g, n, cycles, label, target, hard, trace))
}

fn roles_of(model: &GBetaModel, v: usize) -> Role {
    let n = model.n();
    match v / n {
        0 if model.is_backward(v) => Role::Backward1,
        0 => Role::Forward1,
        1 => Role::Two,
        _ => Role::Three,
    }
}

fn family_event(trace: &mut PipelineTrace, stage: &str, fam: &ForestFamily, started: Instant) {
    let outcome = if !fam.hard_pass() {
        StageOutcome::Fail
    } else if !fam.soft_pass() || fam.shortfall > 0 {
        StageOutcome::SoftFail
    } else {
        StageOutcome::Ok
    };
    let failed: Vec<&Check> = fam.audit.iter().flatten().filter(|c| !c.pass).collect();
    trace.push(
        stage,
        outcome,
        started,
        serde_json::json!({
            "forests": fam.forests.len(),
            "edges": fam.forests.iter().map(LinearForest::edge_count).collect::<Vec<_>>(),
            "shortfall": fam.shortfall,
            "failed_checks": failed,
            "notes": fam.notes,
        }),
    );
}

/// Shared read-only context of the per-host closing stage.
struct HostCtx<'a> {
    g: &'a Digraph,
    n: usize,
    model: &'a GBetaModel,
    c3_route: bool,
    forests: &'a [LinearForest],
    ustar: &'a [usize],
    reserved: &'a HashSet<(usize, usize)>,
    tr: &'a TripartiteTournament,
    params: &'a PipelineParams,
    top_up: usize,
    seed: Seed,
}

struct HostOutput {
    cycles: Vec<Vec<usize>>,
    trace: PipelineTrace,
    hard: bool,
}

/// Closes one forest inside W: extension, W*, matching of endpoints,
/// closing, splice. Returns the Hamilton cycle in role coordinates.
fn close_forest(ctx: &HostCtx, avail: &Digraph, in_w: &[bool], forest: &LinearForest, idx: usize, seed: Seed) -> Result<(Vec<usize>, bool), String> {
    let n = ctx.n;
    let m = 3 * n;
    let inp = ExtensionInput { n, model: ctx.model, available: avail, in_w, forest, budget: 200_000 };
    let ext = extend_to_endpoints(&inp, idx).map_err(|e| format!("extension: {e}"))?;
    let paths: Vec<Vec<usize>> = ext.paths().into_iter().filter(|p| p.len() > 1).collect();
    let ends_ok = paths.iter().all(|p| p[0] / n == 2 && p[p.len() - 1] / n == 1 && in_w[p[0]] && in_w[p[p.len() - 1]]);
    let x_ok = (0..m).all(|v| in_w[v] || ext.is_internal(v));
    let hard = ends_ok && x_ok;
    if !hard {
        return Err("extension left a path with wrong end classes".into());
    }
    let wstar: Vec<usize> = (0..m).filter(|&v| in_w[v] && !ext.is_internal(v)).collect();
    let mut local = vec![usize::MAX; m];
    for (i, &v) in wstar.iter().enumerate() {
        local[v] = i;
    }
    let sub = avail.without_edges(ext.edges()).induced(&wstar);
    let roles: Vec<Role> = wstar
        .iter()
        .map(|&v| if ctx.c3_route && v < n { Role::Forward1 } else { roles_of(ctx.model, v) })
        .collect();
    let pairs: Vec<(usize, usize)> = paths.iter().map(|p| (local[p[0]], local[p[p.len() - 1]])).collect();
    let opts = ClosingOptions { seed, ..Default::default() };
    let closed = if ctx.c3_route { close_c3(&sub, &roles, &pairs, &opts) } else { close_gbeta(&sub, &roles, &pairs, &opts) };
    let local_cycle = closed.map_err(|e| format!("closing: {e}"))?.cycle;
    let mut cycle = Vec::with_capacity(m);
    let path_from: std::collections::HashMap<usize, &Vec<usize>> = paths.iter().map(|p| (p[0], p)).collect();
    let k = local_cycle.len();
    for i in 0..k {
        let v = wstar[local_cycle[i]];
        let next = wstar[local_cycle[(i + 1) % k]];
        match path_from.get(&v) {
            Some(p) if *p.last().unwrap() == next => cycle.extend_from_slice(&p[..p.len() - 1]),
            _ => cycle.push(v),
        }
    }
    if !ctx.g.is_hamilton_cycle(&cycle) {
        return Err("spliced cycle is not Hamiltonian".into());
    }
    Ok((cycle, hard))
}

fn run_host(ctx: &HostCtx, host: &Digraph, w: &[usize], x: &[usize], ids: &[usize], h: usize) -> HostOutput {
    let n = ctx.n;
    let m = 3 * n;
    let mut trace = PipelineTrace::default();
    let mut hard = true;
    let in_w: Vec<bool> = (0..m).map(|v| w.binary_search(&v).is_ok()).collect();
    let started = Instant::now();
    let forbidden: Vec<Vec<usize>> = ids.iter().map(|&i| ctx.forests[i].vertices()).collect();
    let leftovers: Vec<LinearForest> = if x.is_empty() {
        vec![LinearForest::new(m); ids.len()]
    } else {
        let eps = 2.0 * to_f64(ctx.params.gamma).powf(0.25);
        let inp = BalancedCoverInput {
            h: host,
            t: ctx.tr,
            model: ctx.model,
            vprime: x,
            forbidden: &forbidden,
            ustar: ctx.ustar,
            reserved: ctx.reserved,
            eps: Rational::new((eps.min(1.0) * 1e6).round() as i64, 1_000_000),
            tolerance: ctx.params.tolerance,
            seed: ctx.seed.derive(h as u64),
        };
        let fam = balanced_covers(&inp);
        hard &= fam.hard_pass();
        for f in &fam.forests {
            let p = endpoint_profile(ctx.tr.parts(), f, Some(ctx.model));
            hard &= p.classes_equal;
        }
        family_event(&mut trace, &format!("host {h}: balanced covers"), &fam, started);
        fam.forests
    };
    let mut forests = Vec::with_capacity(ids.len());
    for (j, &i) in ids.iter().enumerate() {
        let mut gi = ctx.forests[i].clone();
        for (a, b) in leftovers[j].edges() {
            gi.add_edge(a, b).expect("leftover forest avoids V(F'_i)");
        }
        forests.push(gi);
    }
    let mut avail = host.clone();
    for f in &forests {
        avail = avail.without_edges(f.edges());
    }
    let mut cycles = Vec::new();
    let mut queue: Vec<(usize, LinearForest)> = ids.iter().copied().zip(forests).collect();
    let mut extra = 0;
    let mut k = 0;
    loop {
        let (idx, forest) = if k < queue.len() {
            queue[k].clone()
        } else if cycles.len() < ctx.top_up && extra < ctx.top_up {
            extra += 1;
            (usize::MAX, LinearForest::new(m))
        } else {
            break;
        };
        k += 1;
        let started = Instant::now();
        let stage = if idx == usize::MAX { format!("host {h}: top-up closing {extra}") } else { format!("host {h}: forest {idx}") };
        match close_forest(ctx, &avail, &in_w, &forest, idx.min(m), ctx.seed.derive(((h as u64) << 32) | k as u64)) {
            Ok((cycle, ok)) => {
                hard &= ok;
                avail = avail.without_edges(cycle_edges(&cycle));
                trace.push(&stage, StageOutcome::Ok, started, serde_json::json!({"forest_edges": forest.edge_count()}));
                cycles.push(cycle);
            }
            Err(reason) => {
                trace.push(&stage, StageOutcome::Fail, started, serde_json::json!({"reason": reason}));
                if idx == usize::MAX {
                    break;
                }
            }
        }
    }
    queue.clear();
    HostOutput { cycles, trace, hard }
}

/// Assembly for tournaments close to 𝒢_β: exceptional covers, cleaning,
/// host partition, balanced covers, extension, closing and splicing.
pub fn pipeline_gbeta(
    t: &TripartiteTournament,
    report: &ClosenessReport,
    delta: Rational,
    overrides: &ParamOverrides,
    seed: Seed,
) -> Result<Decomposition, DecomposeError> {
    let n = t.n();
    let target = target_count(delta, n);
    let mut trace = PipelineTrace::default();
    let started = Instant::now();
    let tr = report.relabel(t);
    let g = tr.graph();
    let eps = report.epsilon;
    let threshold = 8.0 * to_f64(eps).powf(0.25);
    let c3_route = report.model.beta_n() == 0 || to_f64(report.model.beta()) < threshold;
    let model = if c3_route { GBetaModel::c3(n) } else { report.model.clone() };
    let (eps_used, beta_used) = if c3_route { (eps + report.model.beta(), Rational::from_integer(0)) } else { (eps, model.beta()) };
    let p = overrides.apply(PipelineParams::desk(n, delta, eps_used.min(Rational::from_integer(1)), beta_used));
    p.validate(n)?;
    trace.push(
        "regime",
        StageOutcome::Ok,
        started,
        serde_json::json!({"route": if c3_route { "beta = 0" } else { "beta > 0" }, "beta_threshold": threshold, "params": p}),
    );
    let mut hard = true;
    let started = Instant::now();
    let (fam, u) = if c3_route {
        cover_exceptional_c3(&tr, &p, seed.derive(1))?
    } else {
        cover_exceptional_gbeta(&tr, &model, &p, seed.derive(1))?
    };
    hard &= fam.hard_pass();
    family_event(&mut trace, "exceptional covers", &fam, started);
    let started = Instant::now();
    let (clean, ustar) = match clean_forests(&tr, &model, &fam, &p) {
        Ok(x) => {
            hard &= x.0.hard_pass();
            family_event(&mut trace, "clean forests", &x.0, started);
            x
        }
        Err(e) => {
            trace.push("clean forests", StageOutcome::Fail, started, serde_json::json!({"error": e.to_string(), "fallback": "uncleaned forests"}));
            (fam.clone(), u.clone())
        }
    };
    let reserved: HashSet<(usize, usize)> = clean.forests.iter().flat_map(|f| f.edges().collect::<Vec<_>>()).collect();
    let started = Instant::now();
    let hp = partition_host(&g.without_edges(reserved.iter().copied()), n, &p, seed.derive(2))?;
    trace.push(
        "partition",
        if hp.audit.iter().flatten().all(|c| c.pass) { StageOutcome::Ok } else { StageOutcome::SoftFail },
        started,
        serde_json::json!({"hosts": hp.hosts.len(), "host_edges": hp.host_edges, "collisions": hp.collisions.len(), "r": hp.r}),
    );
    hard &= hp.audit.iter().flatten().all(|c| !c.hard || c.pass);
    let hosts = hp.hosts.len();
    let ctx = HostCtx {
        g,
        n,
        model: &model,
        c3_route,
        forests: &clean.forests,
        ustar: &ustar,
        reserved: &reserved,
        tr: &tr,
        params: &p,
        top_up: if hosts == 1 { target } else { 0 },
        seed: seed.derive(3),
    };
    let outputs: Vec<HostOutput> = (0..hosts)
        .into_par_iter()
        .map(|h| {
            let ids: Vec<usize> = (0..clean.forests.len()).filter(|i| i % hosts == h).collect();
            run_host(&ctx, &hp.hosts[h], &hp.w[h], &hp.x[h], &ids, h)
        })
        .collect();
    let back = report.from_roles();
    let mut cycles = Vec::new();
    for out in outputs {
        hard &= out.hard;
        trace.extend(out.trace);
        cycles.extend(out.cycles.into_iter().map(|c| c.into_iter().map(|v| back[v]).collect::<Vec<_>>()));
    }
    Ok(issue(t.graph(), n, cycles, CertificateLabel::Pipeline, target, Some(hard), trace))
}
