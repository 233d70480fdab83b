//! Robust outneighbourhoods, exact and heuristic expander checks, and the
//! four-part partition read off a non-expansion witness.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::digraph::Digraph;
use crate::rational::{ceil_mul, floor_mul, to_f64, Rational};
use crate::seed::Seed;

pub const EXACT_CUTOFF: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExpansionError {
    #[error("invalid parameters: need 0 < nu <= tau < 1/2 (nu = {nu}, tau = {tau})")]
    BadParams { nu: Rational, tau: Rational },
    #[error("{size} vertices exceeds the exhaustive cutoff {cutoff}; use the heuristic search")]
    OverCutoff { size: usize, cutoff: usize },
    #[error("set is not a non-expansion witness: {0}")]
    InvalidWitness(String),
    #[error("degenerate witness: {0} is empty")]
    Degenerate(&'static str),
    #[error("graph is not regular")]
    NonRegular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionParams {
    pub nu: Rational,
    pub tau: Rational,
}

impl ExpansionParams {
    pub fn new(nu: Rational, tau: Rational) -> Result<Self, ExpansionError> {
        let zero = Rational::from_integer(0);
        if nu <= zero || nu > tau || tau * 2 >= Rational::from_integer(1) {
            return Err(ExpansionError::BadParams { nu, tau });
        }
        Ok(ExpansionParams { nu, tau })
    }

    /// ⌈ν·m⌉.
    pub fn threshold(&self, m: usize) -> usize {
        ceil_mul(self.nu, m) as usize
    }

    /// Admissible sizes `⌈τm⌉..=⌊(1−τ)m⌋`.
    pub fn window(&self, m: usize) -> (usize, usize) {
        let lo = ceil_mul(self.tau, m) as usize;
        let hi = floor_mul(Rational::from_integer(1) - self.tau, m) as usize;
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpansionWitness {
    pub set: Vec<usize>,
    pub rn_size: usize,
    pub deficiency: i64,
}

/// `{v : d⁻(v, S) ≥ ⌈ν·|V(G)|⌉}`.
pub fn robust_outneighbourhood(g: &Digraph, s: &[usize], nu: Rational) -> Vec<usize> {
    let m = g.vertex_count();
    let thr = ceil_mul(nu, m).max(0) as usize;
    let mut hits = vec![0usize; m];
    for &u in s {
        for &v in g.out_neighbors(u) {
            hits[v] += 1;
        }
    }
    (0..m).filter(|&v| hits[v] >= thr).collect()
}

/// Recomputes |RN| for `set` from scratch and checks the witness conditions.
pub fn validate_witness(g: &Digraph, set: &[usize], p: &ExpansionParams) -> Result<ExpansionWitness, ExpansionError> {
    let m = g.vertex_count();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != set.len() || sorted.iter().any(|&v| v >= m) {
        return Err(ExpansionError::InvalidWitness("repeated or out-of-range vertex".into()));
    }
    let (lo, hi) = p.window(m);
    if sorted.len() < lo || sorted.len() > hi {
        return Err(ExpansionError::InvalidWitness(format!(
            "|S| = {} outside [{lo}, {hi}]",
            sorted.len()
        )));
    }
    let rn = robust_outneighbourhood(g, &sorted, p.nu).len();
    let deficiency = sorted.len() as i64 + p.threshold(m) as i64 - rn as i64;
    if deficiency < 1 {
        return Err(ExpansionError::InvalidWitness(format!(
            "|RN| = {rn} already reaches |S| + ceil(nu n) = {}",
            sorted.len() + p.threshold(m)
        )));
    }
    Ok(ExpansionWitness {
        set: sorted,
        rn_size: rn,
        deficiency,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum ExpansionDecision {
    Expander,
    NonExpander { witness: ExpansionWitness },
}

impl ExpansionDecision {
    pub fn is_expander(&self) -> bool {
        matches!(self, ExpansionDecision::Expander)
    }

    pub fn witness(&self) -> Option<&ExpansionWitness> {
        match self {
            ExpansionDecision::NonExpander { witness } => Some(witness),
            ExpansionDecision::Expander => None,
        }
    }
}

/// Exhaustive decision over all admissible sets. On failure the witness has
/// the largest deficiency, ties broken by the smallest bitmask.
pub fn is_robust_outexpander_exact(g: &Digraph, p: &ExpansionParams) -> Result<ExpansionDecision, ExpansionError> {
    let m = g.vertex_count();
    if m > EXACT_CUTOFF {
        return Err(ExpansionError::OverCutoff {
            size: m,
            cutoff: EXACT_CUTOFF,
        });
    }
    let thr = p.threshold(m) as u32;
    let (lo, hi) = p.window(m);
    if lo > hi {
        return Ok(ExpansionDecision::Expander);
    }
    let out: Vec<Vec<usize>> = (0..m).map(|v| g.out_neighbors(v).to_vec()).collect();
    let high = m.min(6);
    let low = m - high;
    let best = (0u32..1 << high)
        .into_par_iter()
        .filter_map(|prefix| {
            let base = prefix << low;
            let mut cnt = vec![0u32; m];
            let mut size = 0usize;
            for b in 0..high {
                if prefix >> b & 1 == 1 {
                    size += 1;
                    for &w in &out[low + b] {
                        cnt[w] += 1;
                    }
                }
            }
            let mut rn = cnt.iter().filter(|&&c| c >= thr).count() as i64;
            let mut gray = 0u32;
            let mut best: Option<(i64, u32)> = None;
            let mut consider = |gray: u32, size: usize, rn: i64| {
                if size >= lo && size <= hi {
                    let def = size as i64 + thr as i64 - rn;
                    let mask = base | gray;
                    if def >= 1 && best.is_none_or(|(d, bm)| def > d || (def == d && mask < bm)) {
                        best = Some((def, mask));
                    }
                }
            };
            consider(0, size, rn);
            for i in 1u32..1 << low {
                let b = i.trailing_zeros() as usize;
                gray ^= 1 << b;
                if gray >> b & 1 == 1 {
                    size += 1;
                    for &w in &out[b] {
                        cnt[w] += 1;
                        if cnt[w] == thr {
                            rn += 1;
                        }
                    }
                } else {
                    size -= 1;
                    for &w in &out[b] {
                        if cnt[w] == thr {
                            rn -= 1;
                        }
                        cnt[w] -= 1;
                    }
                }
                consider(gray, size, rn);
            }
            best
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    match best {
        None => Ok(ExpansionDecision::Expander),
        Some((_, mask)) => {
            let set: Vec<usize> = (0..m).filter(|&v| mask >> v & 1 == 1).collect();
            let witness = validate_witness(g, &set, p)?;
            Ok(ExpansionDecision::NonExpander { witness })
        }
    }
}

struct LocalState<'a> {
    g: &'a Digraph,
    thr: usize,
    in_set: Vec<bool>,
    cnt: Vec<usize>,
    rn: i64,
    size: usize,
}

impl<'a> LocalState<'a> {
    fn new(g: &'a Digraph, thr: usize, set: &[bool]) -> Self {
        let m = g.vertex_count();
        let mut s = LocalState {
            g,
            thr,
            in_set: vec![false; m],
            cnt: vec![0; m],
            rn: 0,
            size: 0,
        };
        for v in 0..m {
            if set[v] {
                s.flip(v);
            }
        }
        s
    }

    /// Change of |RN| − |S| if `v` is flipped.
    fn delta(&self, v: usize) -> i64 {
        let outs = self.g.out_neighbors(v);
        if self.in_set[v] {
            1 - outs.iter().filter(|&&w| self.cnt[w] == self.thr).count() as i64
        } else {
            outs.iter().filter(|&&w| self.cnt[w] + 1 == self.thr).count() as i64 - 1
        }
    }

    fn flip(&mut self, v: usize) {
        let adding = !self.in_set[v];
        self.in_set[v] = adding;
        for &w in self.g.out_neighbors(v) {
            if adding {
                self.cnt[w] += 1;
                if self.cnt[w] == self.thr {
                    self.rn += 1;
                }
            } else {
                if self.cnt[w] == self.thr {
                    self.rn -= 1;
                }
                self.cnt[w] -= 1;
            }
        }
        if adding {
            self.size += 1;
        } else {
            self.size -= 1;
        }
    }

    fn deficiency(&self) -> i64 {
        self.size as i64 + self.thr as i64 - self.rn
    }
}

/// Seeded local search for a non-expansion witness. Never returns an
/// unverified set.
pub fn find_non_expansion_witness(
    g: &Digraph,
    p: &ExpansionParams,
    budget: usize,
    hints: &[Vec<usize>],
    seed: Seed,
) -> Option<ExpansionWitness> {
    let m = g.vertex_count();
    let thr = p.threshold(m);
    let (lo, hi) = p.window(m);
    if lo > hi {
        return None;
    }
    let restarts = (budget / 1000).max(1);
    let per_restart = (budget / restarts).max(m);
    let mut rng = seed.rng();
    let mut best: Option<(i64, Vec<usize>)> = None;
    for r in 0..restarts {
        let mut init = vec![false; m];
        if r < hints.len() {
            for &v in &hints[r] {
                init[v] = true;
            }
        } else if !hints.is_empty() && rng.gen_bool(0.5) {
            for &v in &hints[rng.gen_range(0..hints.len())] {
                init[v] = true;
            }
            for _ in 0..rng.gen_range(1..=m.div_ceil(6)) {
                let v = rng.gen_range(0..m);
                init[v] = !init[v];
            }
        } else {
            let size = rng.gen_range(lo..=hi);
            for v in rand::seq::index::sample(&mut rng, m, size) {
                init[v] = true;
            }
        }
        let mut st = LocalState::new(g, thr, &init);
        let mut spent = 0;
        // move into the admissible window first
        while st.size < lo || st.size > hi {
            let grow = st.size < lo;
            let v = (0..m)
                .filter(|&v| st.in_set[v] != grow)
                .min_by_key(|&v| (st.delta(v), v))
                .expect("a vertex to flip");
            st.flip(v);
            spent += m;
        }
        loop {
            let d = st.deficiency();
            if d >= 1 {
                let set: Vec<usize> = (0..m).filter(|&v| st.in_set[v]).collect();
                if best.as_ref().is_none_or(|(bd, bs)| d > *bd || (d == *bd && set < *bs)) {
                    best = Some((d, set));
                }
            }
            if spent >= per_restart {
                break;
            }
            let mut choice: Option<(i64, usize)> = None;
            for v in 0..m {
                let next = if st.in_set[v] { st.size - 1 } else { st.size + 1 };
                if next < lo || next > hi {
                    continue;
                }
                let dv = st.delta(v);
                spent += 1;
                if dv < 0 && choice.is_none_or(|(bd, _)| dv < bd) {
                    choice = Some((dv, v));
                }
            }
            match choice {
                Some((_, v)) => st.flip(v),
                None => break,
            }
        }
    }
    best.and_then(|(_, set)| validate_witness(g, &set, p).ok())
}

/// Class unions V_i and V_i ∪ V_j of a balanced tripartition.
pub fn class_union_hints(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for i in 0..3 {
        out.push((i * n..(i + 1) * n).collect());
    }
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        out.push((i * n..(i + 1) * n).chain(j * n..(j + 1) * n).collect());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition4 {
    pub v11: Vec<usize>,
    pub v12: Vec<usize>,
    pub v21: Vec<usize>,
    pub v22: Vec<usize>,
}

impl Partition4 {
    fn join(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
        v.sort_unstable();
        v
    }

    pub fn row1(&self) -> Vec<usize> {
        Self::join(&self.v11, &self.v12)
    }

    pub fn row2(&self) -> Vec<usize> {
        Self::join(&self.v21, &self.v22)
    }

    pub fn col1(&self) -> Vec<usize> {
        Self::join(&self.v11, &self.v21)
    }

    pub fn col2(&self) -> Vec<usize> {
        Self::join(&self.v12, &self.v22)
    }

    /// Disjoint and covering `0..m`.
    pub fn is_partition_of(&self, m: usize) -> bool {
        let mut seen = vec![false; m];
        for &v in self.v11.iter().chain(&self.v12).chain(&self.v21).chain(&self.v22) {
            if v >= m || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        seen.iter().all(|&s| s)
    }
}

/// V11 = S ∩ RN, V12 = S ∖ RN, V21 = RN ∖ S, V22 = the rest.
pub fn extract_partition4(g: &Digraph, w: &ExpansionWitness, p: &ExpansionParams) -> Result<Partition4, ExpansionError> {
    let w = validate_witness(g, &w.set, p)?;
    let m = g.vertex_count();
    let mut in_s = vec![false; m];
    for &v in &w.set {
        in_s[v] = true;
    }
    let mut in_rn = vec![false; m];
    for v in robust_outneighbourhood(g, &w.set, p.nu) {
        in_rn[v] = true;
    }
    let mut part = Partition4 {
        v11: vec![],
        v12: vec![],
        v21: vec![],
        v22: vec![],
    };
    for v in 0..m {
        match (in_s[v], in_rn[v]) {
            (true, true) => part.v11.push(v),
            (true, false) => part.v12.push(v),
            (false, true) => part.v21.push(v),
            (false, false) => part.v22.push(v),
        }
    }
    for (name, set) in [
        ("V1*", part.row1()),
        ("V2*", part.row2()),
        ("V*1", part.col1()),
        ("V*2", part.col2()),
    ] {
        if set.is_empty() {
            return Err(ExpansionError::Degenerate(name));
        }
    }
    Ok(part)
}

#[derive(Debug, Clone, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Inequality {
    fn at_most(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            slack: rhs - lhs,
            pass: lhs <= rhs + 1e-9,
        }
    }

    fn at_least(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            slack: lhs - rhs,
            pass: lhs + 1e-9 >= rhs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Partition4Report {
    pub degree: usize,
    /// min(|V1*|, |V*1|, |V2*|, |V*2|) ≥ d − ν^{1/2}n̂.
    pub sizes: Inequality,
    /// Same minimum against d − 3ν^{1/2}n̂.
    pub sizes_weak: Inequality,
    pub wrong_direction_edges: Inequality,
    pub diagonal_balance: Inequality,
    pub pass: bool,
}

pub fn verify_partition4(g: &Digraph, part: &Partition4, nu: Rational, alpha: Rational) -> Result<Partition4Report, ExpansionError> {
    let d = g.regular_degree().ok_or(ExpansionError::NonRegular)?;
    let m = g.vertex_count();
    if !part.is_partition_of(m) {
        return Err(ExpansionError::InvalidWitness("sets do not partition V".into()));
    }
    let (nu_f, alpha_f, mf) = (to_f64(nu), to_f64(alpha), m as f64);
    let rows = [part.row1(), part.col1(), part.row2(), part.col2()];
    let min_size = rows.iter().map(Vec::len).min().unwrap() as f64;
    let mut membership = vec![0u8; m];
    for &v in &part.v11 {
        membership[v] = 0b00;
    }
    for &v in &part.v12 {
        membership[v] = 0b01;
    }
    for &v in &part.v21 {
        membership[v] = 0b10;
    }
    for &v in &part.v22 {
        membership[v] = 0b11;
    }
    let row = |v: usize| membership[v] >> 1;
    let col = |v: usize| membership[v] & 1;
    // e(V1*, V*2) + e(V2*, V*1)
    let bad = g.edges().filter(|&(u, v)| row(u) != col(v)).count();
    let sizes = Inequality::at_least(min_size, d as f64 - nu_f.sqrt() * mf);
    let sizes_weak = Inequality::at_least(min_size, d as f64 - 3.0 * nu_f.sqrt() * mf);
    let wrong = Inequality::at_most(bad as f64, 4.0 * nu_f * mf * mf);
    let diag = Inequality::at_most(
        (part.v12.len() as f64 - part.v21.len() as f64).abs(),
        4.0 * nu_f / alpha_f * mf,
    );
    let pass = sizes.pass && wrong.pass && diag.pass;
    Ok(Partition4Report {
        degree: d,
        sizes,
        sizes_weak,
        wrong_direction_edges: wrong,
        diagonal_balance: diag,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{blowup_c3, gen_gbeta, gen_random_regular_tripartite_digraph, gen_t_triangle};
    use crate::oracle::exact_expansion_check;
    use crate::tripartite::TripartiteDigraph;
    use crate::Mode;
    use proptest::prelude::*;

    fn params(nu: (i64, i64), tau: (i64, i64)) -> ExpansionParams {
        ExpansionParams::new(Rational::new(nu.0, nu.1), Rational::new(tau.0, tau.1)).unwrap()
    }

    #[test]
    fn rn_examples() {
        let g = Digraph::complete(6);
        assert!(robust_outneighbourhood(&g, &[], Rational::new(1, 10)).is_empty());
        assert_eq!(robust_outneighbourhood(&g, &[0, 1], Rational::new(1, 10)).len(), 6);
        let (model, t) = gen_gbeta(4, Rational::new(1, 4), Seed(3)).unwrap();
        let s: Vec<usize> = (4..8).chain(model.backward_v1()).collect();
        let rn = robust_outneighbourhood(t.graph(), &s, Rational::new(1, 20));
        assert!(rn.iter().all(|&v| v >= 8 || model.is_backward(v)));
    }

    #[test]
    fn gbeta_is_not_an_expander() {
        let p = params((1, 50), (1, 4));
        for n in 2..=7 {
            let (model, t) = gen_gbeta(n, Rational::new((n / 2) as i64, n as i64), Seed(n as u64)).unwrap();
            let d = is_robust_outexpander_exact(t.graph(), &p).unwrap();
            assert!(d.witness().unwrap().deficiency >= 1);
            let s: Vec<usize> = (n..2 * n).chain(model.backward_v1()).collect();
            assert!(validate_witness(t.graph(), &s, &p).is_ok());
            let found = find_non_expansion_witness(t.graph(), &p, 5000, &class_union_hints(n), Seed(1));
            assert!(found.is_some());
        }
    }

    #[test]
    fn complete_tripartite_expands() {
        let p = params((1, 50), (1, 5));
        for n in 2..=7 {
            let g = TripartiteDigraph::complete(n);
            assert!(is_robust_outexpander_exact(g.graph(), &p).unwrap().is_expander());
            assert!(find_non_expansion_witness(g.graph(), &p, 3000, &class_union_hints(n), Seed(2)).is_none());
        }
        let g = gen_random_regular_tripartite_digraph(5, 7, Seed(11)).unwrap();
        assert!(is_robust_outexpander_exact(g.graph(), &p).unwrap().is_expander());
        assert!(is_robust_outexpander_exact(&Digraph::complete(25), &p).is_err());
    }

    #[test]
    fn t_triangle_witness() {
        let p = params((1, 10), (1, 4));
        let t = gen_t_triangle(4);
        let w = find_non_expansion_witness(t.graph(), &p, 5000, &class_union_hints(4), Seed(3)).unwrap();
        assert_eq!(validate_witness(t.graph(), &w.set, &p).unwrap(), w);
    }

    #[test]
    fn partitions() {
        let p = params((1, 50), (1, 4));
        let n = 4;
        let t = blowup_c3(n);
        let w = validate_witness(t.graph(), &(4..8).collect::<Vec<_>>(), &p).unwrap();
        let part = extract_partition4(t.graph(), &w, &p).unwrap();
        assert!(part.v11.is_empty());
        assert_eq!(part.v12, (4..8).collect::<Vec<_>>());
        assert_eq!(part.v21, (8..12).collect::<Vec<_>>());
        assert_eq!(part.v22, (0..4).collect::<Vec<_>>());
        let rep = verify_partition4(t.graph(), &part, Rational::new(1, 1000), Rational::new(1, 3)).unwrap();
        assert_eq!(rep.wrong_direction_edges.lhs, 0.0);
        assert!(rep.pass);

        let (model, g) = gen_gbeta(8, Rational::new(1, 4), Seed(7)).unwrap();
        let s: Vec<usize> = (8..16).chain(model.backward_v1()).collect();
        let w = validate_witness(g.graph(), &s, &p).unwrap();
        let part = extract_partition4(g.graph(), &w, &p).unwrap();
        assert_eq!(part.v11, model.backward_v1());
        assert_eq!(part.v22, model.forward_v1());
        assert_eq!(part.v21, (16..24).collect::<Vec<_>>());
        let rep = verify_partition4(g.graph(), &part, Rational::new(1, 50), Rational::new(1, 3)).unwrap();
        assert!(rep.pass, "{rep:?}");

        let k = Digraph::complete(8);
        let part = Partition4 { v11: vec![0, 1], v12: vec![2, 3], v21: vec![4, 5], v22: vec![6, 7] };
        let rep = verify_partition4(&k, &part, Rational::new(1, 1000), Rational::new(7, 8)).unwrap();
        assert!(!rep.wrong_direction_edges.pass);
        let bogus = ExpansionWitness { set: vec![0, 1, 2], rn_size: 0, deficiency: 5 };
        assert!(extract_partition4(&k, &bogus, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn exact_agrees_with_oracle(m in 3usize..=10, bits in proptest::collection::vec(proptest::bool::weighted(0.5), 100), grid in 0usize..4) {
            let g = Digraph::from_fn(m, Mode::General, |u, v| bits[u * 10 + v]);
            let (nu, tau) = [((1, 50), (1, 5)), ((1, 10), (1, 4)), ((1, 5), (1, 3)), ((3, 10), (2, 5))][grid];
            let p = params(nu, tau);
            let exact = is_robust_outexpander_exact(&g, &p).unwrap();
            prop_assert_eq!(exact.is_expander(), exact_expansion_check(&g, p.nu, p.tau).unwrap());
            if let Some(w) = exact.witness() {
                // larger ν keeps the same window, so the witness still fails
                let bigger = ExpansionParams { nu: p.tau, tau: p.tau };
                prop_assert!(validate_witness(&g, &w.set, &bigger).is_ok());
            }
        }
    }
}
