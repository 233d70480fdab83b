//! Brute-force referees. Nothing here calls into the modules being
//! refereed: each routine reads the edge list once into its own bitmask
//! adjacency and works from that.

use crate::digraph::Digraph;
use crate::rational::Rational;
use crate::tripartite::TripartiteTournament;

pub const HAMILTON_CAP: usize = 15;
pub const PACKING_CAP: usize = 12;
pub const NEAREST_CAP: usize = 3;
pub const EXPANSION_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("graph has {size} vertices, oracle cap is {cap}")]
    OverCap { size: usize, cap: usize },
}

fn check_cap(size: usize, cap: usize) -> Result<(), OracleError> {
    if size > cap {
        Err(OracleError::OverCap { size, cap })
    } else {
        Ok(())
    }
}

fn out_masks(g: &Digraph) -> Vec<u32> {
    let mut masks = vec![0u32; g.vertex_count()];
    for (u, v) in g.edges() {
        masks[u] |= 1 << v;
    }
    masks
}

/// Visits every Hamilton cycle starting at vertex 0; the callback returns
/// `false` to stop early.
fn visit_cycles(masks: &[u32], f: &mut dyn FnMut(&[usize]) -> bool) {
    let m = masks.len();
    if m == 1 {
        return;
    }
    let full: u32 = if m == 32 { u32::MAX } else { (1 << m) - 1 };
    let mut path = vec![0usize];
    fn rec(masks: &[u32], full: u32, used: u32, path: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        let last = *path.last().unwrap();
        if used == full {
            if masks[last] & 1 != 0 {
                return f(path);
            }
            return true;
        }
        let mut cand = masks[last] & !used;
        while cand != 0 {
            let w = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            path.push(w);
            let go_on = rec(masks, full, used | (1 << w), path, f);
            path.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
    rec(masks, full, 1, &mut path, f);
}

/// All Hamilton cycles, each rotated to start at vertex 0.
pub fn enumerate_hamilton_cycles(g: &Digraph) -> Result<Vec<Vec<usize>>, OracleError> {
    check_cap(g.vertex_count(), HAMILTON_CAP)?;
    let masks = out_masks(g);
    let mut out = Vec::new();
    visit_cycles(&masks, &mut |c| {
        out.push(c.to_vec());
        true
    });
    Ok(out)
}

pub fn is_hamiltonian(g: &Digraph) -> Result<bool, OracleError> {
    check_cap(g.vertex_count(), HAMILTON_CAP)?;
    let masks = out_masks(g);
    let mut found = false;
    visit_cycles(&masks, &mut |_| {
        found = true;
        false
    });
    Ok(found)
}

type EdgeBits = [u64; 3];

fn cycle_bits(cycle: &[usize], m: usize) -> EdgeBits {
    let mut bits = [0u64; 3];
    for i in 0..cycle.len() {
        let idx = cycle[i] * m + cycle[(i + 1) % cycle.len()];
        bits[idx / 64] |= 1 << (idx % 64);
    }
    bits
}

fn disjoint(a: &EdgeBits, b: &EdgeBits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn union(a: &EdgeBits, b: &EdgeBits) -> EdgeBits {
    [a[0] | b[0], a[1] | b[1], a[2] | b[2]]
}

/// Maximum number of pairwise edge-disjoint Hamilton cycles, stopping once
/// `cap` is reached.
pub fn max_hamilton_packing_exact(g: &Digraph, cap: usize) -> Result<(usize, Vec<Vec<usize>>), OracleError> {
    let m = g.vertex_count();
    check_cap(m, PACKING_CAP)?;
    let cycles = enumerate_hamilton_cycles(g)?;
    // Every cycle of a packing leaves vertex 0 along a different edge, so
    // group by that edge and take at most one cycle per group, in order.
    let mut groups: Vec<Vec<(EdgeBits, usize)>> = vec![Vec::new(); m];
    for (i, c) in cycles.iter().enumerate() {
        groups[c[1]].push((cycle_bits(c, m), i));
    }
    groups.retain(|grp| !grp.is_empty());
    let mut best: Vec<usize> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    struct Search<'a> {
        groups: &'a [Vec<(EdgeBits, usize)>],
        cap: usize,
    }
    fn rec(s: &Search, gi: usize, used: EdgeBits, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
        if chosen.len() > best.len() {
            *best = chosen.clone();
        }
        if best.len() >= s.cap || gi == s.groups.len() {
            return;
        }
        if chosen.len() + (s.groups.len() - gi) <= best.len() {
            return;
        }
        for (bits, idx) in &s.groups[gi] {
            if disjoint(bits, &used) {
                chosen.push(*idx);
                rec(s, gi + 1, union(bits, &used), chosen, best);
                chosen.pop();
                if best.len() >= s.cap {
                    return;
                }
            }
        }
        rec(s, gi + 1, used, chosen, best);
    }
    let search = Search { groups: &groups, cap };
    rec(&search, 0, [0; 3], &mut chosen, &mut best);
    Ok((best.len(), best.into_iter().map(|i| cycles[i].clone()).collect()))
}

/// Exact minimum of |E(T) △ E(G′)| over every member G′ of every 𝒢_β
/// (β ≤ 1/2) under every labelling of the classes.
pub fn exact_nearest_gbeta(t: &TripartiteTournament) -> Result<usize, OracleError> {
    let n = t.n();
    check_cap(n, NEAREST_CAP)?;
    let g = t.graph();
    let mut arc = vec![vec![false; 3 * n]; 3 * n];
    for (u, v) in g.edges() {
        arc[u][v] = true;
    }
    let labelings = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];
    // regular bipartite graphs by degree, as n*n bit patterns
    let mut regular: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for pattern in 0u32..(1 << (n * n)) {
        let row = |i: usize| (0..n).filter(|&j| pattern >> (i * n + j) & 1 == 1).count();
        let col = |j: usize| (0..n).filter(|&i| pattern >> (i * n + j) & 1 == 1).count();
        let k = row(0);
        if (0..n).all(|i| row(i) == k && col(i) == k) {
            regular[k].push(pattern);
        }
    }
    let mut best = usize::MAX;
    for lab in labelings {
        // lab[r] is the actual class playing role r
        let v = |r: usize, j: usize| lab[r] * n + j;
        for split in 0u32..(1 << n) {
            let k = split.count_ones() as usize;
            if 2 * k > n {
                continue;
            }
            let back = |j: usize| split >> j & 1 == 1;
            let mut base = 0;
            for a in 0..n {
                for b in 0..n {
                    // role1 vs role2: forward a → b; backward b → a
                    let want12 = !back(a);
                    if arc[v(0, a)][v(1, b)] != want12 {
                        base += 2;
                    }
                    // role1 vs role3: forward c → a; backward a → c
                    let want13 = back(a);
                    if arc[v(0, a)][v(2, b)] != want13 {
                        base += 2;
                    }
                }
            }
            for &pattern in &regular[k] {
                let mut d = base;
                for c in 0..n {
                    for b in 0..n {
                        let want32 = pattern >> (c * n + b) & 1 == 1;
                        if arc[v(2, c)][v(1, b)] != want32 {
                            d += 2;
                        }
                    }
                }
                best = best.min(d);
            }
        }
    }
    Ok(best)
}

/// Naive robust outexpander decision over every subset.
pub fn exact_expansion_check(g: &Digraph, nu: Rational, tau: Rational) -> Result<bool, OracleError> {
    let m = g.vertex_count();
    check_cap(m, EXPANSION_CAP)?;
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let (nn, nd) = (*nu.numer(), *nu.denom());
    let (tn, td) = (*tau.numer(), *tau.denom());
    let mi = m as i64;
    let threshold = (nn * mi + nd - 1) / nd;
    for s in 0u32..(1 << m) {
        let size = s.count_ones() as i64;
        // τm ≤ |S| ≤ (1−τ)m
        if size * td < tn * mi || size * td > (td - tn) * mi {
            continue;
        }
        let mut hits = vec![0i64; m];
        for &(u, v) in &edges {
            if s >> u & 1 == 1 {
                hits[v] += 1;
            }
        }
        let rn = hits.iter().filter(|&&h| h >= threshold).count() as i64;
        if rn < size + threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::Mode;
    use crate::generators::{blowup_c3, gen_gbeta, gen_t_triangle};
    use crate::Seed;

    #[test]
    fn enumeration_counts() {
        let tri = Digraph::from_edges(3, Mode::Oriented, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(enumerate_hamilton_cycles(&tri).unwrap().len(), 1);
        assert_eq!(enumerate_hamilton_cycles(&Digraph::complete(4)).unwrap().len(), 6);
        assert_eq!(enumerate_hamilton_cycles(blowup_c3(2).graph()).unwrap().len(), 4);
        assert!(enumerate_hamilton_cycles(&Digraph::complete(16)).is_err());
    }

    #[test]
    fn packings() {
        assert_eq!(max_hamilton_packing_exact(blowup_c3(2).graph(), 2).unwrap().0, 1);
        assert_eq!(max_hamilton_packing_exact(blowup_c3(3).graph(), 3).unwrap().0, 3);
        let t = gen_t_triangle(2);
        let (k, cycles) = max_hamilton_packing_exact(t.graph(), 2).unwrap();
        assert!(k <= 1);
        for c in cycles {
            for i in 0..c.len() {
                let (u, v) = (c[i], c[(i + 1) % c.len()]);
                assert!(t.parts().is_clockwise(u, v));
            }
        }
    }

    #[test]
    fn nearest() {
        let (_, t) = gen_gbeta(3, Rational::new(1, 3), Seed(2)).unwrap();
        assert_eq!(exact_nearest_gbeta(&t).unwrap(), 0);
        assert!(exact_nearest_gbeta(&gen_t_triangle(2)).unwrap() <= 6);
    }

    #[test]
    fn expansion_extremes() {
        let (nu, tau) = (Rational::new(1, 10), Rational::new(1, 5));
        for m in 5..10 {
            assert!(exact_expansion_check(&Digraph::complete(m), nu, tau).unwrap());
            assert!(!exact_expansion_check(&Digraph::empty(m, Mode::General), nu, tau).unwrap());
        }
        // m = 3 with τ = 2/5 has an empty size window
        assert!(exact_expansion_check(&Digraph::empty(3, Mode::General), nu, Rational::new(2, 5)).unwrap());
    }
}
