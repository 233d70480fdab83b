//! 1-factors of regular digraphs, full 1-factorizations, and greedy
//! cycle merging.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::digraph::{Digraph, GraphError, Mode};
use crate::forest::CycleFactor;
use crate::matching::hopcroft_karp;
use crate::seed::Seed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactorError {
    #[error("graph is not regular")]
    NonRegular,
    #[error("graph is 0-regular")]
    ZeroDegree,
}

impl From<FactorError> for GraphError {
    fn from(e: FactorError) -> Self {
        GraphError::invariant("regular", e.to_string())
    }
}

fn regular(g: &Digraph) -> Result<usize, FactorError> {
    match g.regular_degree() {
        None => Err(FactorError::NonRegular),
        Some(0) => Err(FactorError::ZeroDegree),
        Some(d) => Ok(d),
    }
}

fn factor_from_adj(adj: &[Vec<usize>]) -> CycleFactor {
    let m = hopcroft_karp(adj, adj.len());
    assert!(m.is_perfect(), "regular split graph has a perfect matching");
    CycleFactor::from_successors(m.left).expect("matching of a loopless graph")
}

/// A spanning 1-regular subgraph via a perfect matching of the split graph.
pub fn extract_one_factor(g: &Digraph) -> Result<CycleFactor, FactorError> {
    regular(g)?;
    let adj: Vec<Vec<usize>> = (0..g.vertex_count()).map(|v| g.out_neighbors(v).to_vec()).collect();
    Ok(factor_from_adj(&adj))
}

/// d edge-disjoint 1-factors whose union is E(G).
pub fn one_factorization(g: &Digraph) -> Result<Vec<CycleFactor>, FactorError> {
    let d = regular(g)?;
    let mut rest = g.clone();
    let mut out = Vec::with_capacity(d);
    for _ in 0..d {
        let f = extract_one_factor(&rest)?;
        rest = rest.without_edges(f.edges());
        out.push(f);
    }
    debug_assert_eq!(rest.edge_count(), 0);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct FactorTargets {
    /// Randomized restarts after the first attempt when a target is missed.
    pub restarts: usize,
    pub seed: Seed,
}

impl Default for FactorTargets {
    fn default() -> Self {
        FactorTargets { restarts: 16, seed: Seed(0) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MergeReport {
    pub degree: usize,
    pub cycle_count: usize,
    pub min_length: usize,
    /// ⌊m/(d+1)⌋, or ⌊m/(2d+1)⌋ for oriented hosts.
    pub count_target: usize,
    pub count_target_general: usize,
    /// ⌈d/2⌉.
    pub min_length_target: usize,
    pub count_pass: bool,
    pub min_length_pass: bool,
    pub attempts: usize,
    pub splices: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleCover {
    #[serde(skip)]
    pub factor: CycleFactor,
    pub cycles: Vec<Vec<usize>>,
    pub report: MergeReport,
}

/// Joins cycles of `succ` by 2-edge exchanges until none applies; returns
/// the number of splices.
pub(crate) fn merge_pass(g: &Digraph, succ: &mut [usize]) -> usize {
    let m = succ.len();
    let mut splices = 0;
    loop {
        let mut label = vec![usize::MAX; m];
        let mut lens = Vec::new();
        for v in 0..m {
            if label[v] != usize::MAX {
                continue;
            }
            let id = lens.len();
            let mut x = v;
            let mut len = 0;
            while label[x] == usize::MAX {
                label[x] = id;
                len += 1;
                x = succ[x];
            }
            lens.push(len);
        }
        if lens.len() == 1 {
            return splices;
        }
        let mut pairs: Vec<(usize, usize)> = (0..lens.len())
            .flat_map(|a| (a + 1..lens.len()).map(move |b| (a, b)))
            .collect();
        pairs.sort_by_key(|&(a, b)| std::cmp::Reverse(lens[a] + lens[b]));
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); lens.len()];
        for v in 0..m {
            members[label[v]].push(v);
        }
        let mut moved = false;
        'search: for (a, b) in pairs {
            for &u in &members[a] {
                let v = succ[u];
                for &x in &members[b] {
                    let y = succ[x];
                    if g.has_edge(u, y) && g.has_edge(x, v) {
                        succ[u] = y;
                        succ[x] = v;
                        splices += 1;
                        moved = true;
                        break 'search;
                    }
                }
            }
        }
        if !moved {
            return splices;
        }
    }
}

/// Cycle cover with few long cycles: a 1-factor, then greedy splicing,
/// with randomized restarts while a target is missed. Never fails on
/// regular input; target misses are reported in the result.
pub fn merge_into_few_cycles(g: &Digraph, targets: FactorTargets) -> Result<CycleCover, FactorError> {
    let d = regular(g)?;
    let m = g.vertex_count();
    let count_target_general = m / (d + 1);
    let count_target = if g.mode() == Mode::Oriented { m / (2 * d + 1) } else { count_target_general };
    let min_length_target = d.div_ceil(2);
    let mut best: Option<(CycleFactor, usize)> = None;
    let mut attempts = 0;
    let mut rng = targets.seed.rng();
    for attempt in 0..=targets.restarts {
        attempts += 1;
        let mut adj: Vec<Vec<usize>> = (0..m).map(|v| g.out_neighbors(v).to_vec()).collect();
        if attempt > 0 {
            for row in &mut adj {
                row.shuffle(&mut rng);
            }
        }
        let mut succ = factor_from_adj(&adj).successors().to_vec();
        let splices = merge_pass(g, &mut succ);
        let factor = CycleFactor::from_successors(succ).expect("splices preserve 1-regularity");
        debug_assert!(factor.edges().all(|(u, v)| g.has_edge(u, v)));
        let score = |f: &CycleFactor| {
            let cs = f.cycles();
            (cs.len(), std::cmp::Reverse(cs.iter().map(Vec::len).min().unwrap_or(0)))
        };
        if best.as_ref().is_none_or(|(b, _)| score(&factor) < score(b)) {
            best = Some((factor, splices));
        }
        let (b, _) = best.as_ref().unwrap();
        let cs = b.cycles();
        if cs.len() <= count_target.max(1) && cs.iter().all(|c| c.len() >= min_length_target) {
            break;
        }
    }
    let (factor, splices) = best.unwrap();
    let cycles = factor.cycles();
    let min_length = cycles.iter().map(Vec::len).min().unwrap_or(0);
    Ok(CycleCover {
        report: MergeReport {
            degree: d,
            cycle_count: cycles.len(),
            min_length,
            count_target,
            count_target_general,
            min_length_target,
            count_pass: cycles.len() <= count_target.max(1),
            min_length_pass: min_length >= min_length_target,
            attempts,
            splices,
        },
        factor,
        cycles,
    })
}
