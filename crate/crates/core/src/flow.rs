//! Min-cost flow by successive shortest paths with Johnson potentials.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    arcs: Vec<Arc>,
    head: Vec<Vec<usize>>,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        MinCostFlow {
            arcs: Vec::new(),
            head: vec![Vec::new(); nodes],
        }
    }

    /// Adds an arc with non-negative cost; returns its id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        assert!(cost >= 0, "costs must be non-negative");
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.head[from].push(id);
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.head[to].push(id + 1);
        id
    }

    pub fn flow_on(&self, arc: usize) -> i64 {
        self.arcs[arc + 1].cap
    }

    /// Sends up to `limit` units from `s` to `t`; returns (flow, cost).
    pub fn run(&mut self, s: usize, t: usize, limit: i64) -> (i64, i64) {
        let n = self.head.len();
        let mut pot = vec![0i64; n];
        let (mut flow, mut cost) = (0, 0);
        while flow < limit {
            let mut dist = vec![i64::MAX; n];
            let mut prev = vec![usize::MAX; n];
            dist[s] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, s))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &id in &self.head[u] {
                    let a = &self.arcs[id];
                    if a.cap <= 0 {
                        continue;
                    }
                    let nd = d + a.cost + pot[u] - pot[a.to];
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        prev[a.to] = id;
                        heap.push(Reverse((nd, a.to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] != i64::MAX {
                    pot[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let id = prev[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let id = prev[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                cost += push * self.arcs[id].cost;
                v = self.arcs[id ^ 1].to;
            }
            flow += push;
        }
        (flow, cost)
    }
}

/// k-regular bipartite subgraph of K_{n,n} minimising the total weight of
/// chosen pairs, `weight(a, b) ∈ {0, 1}`-style non-negative costs. Returns
/// the chosen adjacency as `chosen[a][b]` and the cost.
pub fn min_cost_regular_bipartite(n: usize, k: usize, weight: impl Fn(usize, usize) -> i64) -> (Vec<Vec<bool>>, i64) {
    let s = 2 * n;
    let t = 2 * n + 1;
    let mut f = MinCostFlow::new(2 * n + 2);
    for a in 0..n {
        f.add_arc(s, a, k as i64, 0);
        f.add_arc(n + a, t, k as i64, 0);
    }
    let mut ids = vec![vec![0; n]; n];
    for a in 0..n {
        for b in 0..n {
            ids[a][b] = f.add_arc(a, n + b, 1, weight(a, b));
        }
    }
    let (flow, cost) = f.run(s, t, (n * k) as i64);
    assert_eq!(flow, (n * k) as i64, "K_{{n,n}} always has a k-regular subgraph");
    let chosen = (0..n)
        .map(|a| (0..n).map(|b| f.flow_on(ids[a][b]) == 1).collect())
        .collect();
    (chosen, cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_problem() {
        // permutation minimising cost: brute force over 4! permutations
        let w = [[4, 1, 3, 2], [2, 0, 5, 3], [3, 2, 2, 1], [0, 3, 1, 4]];
        let (chosen, cost) = min_cost_regular_bipartite(4, 1, |a, b| w[a][b]);
        let mut best = i64::MAX;
        let mut p = [0, 1, 2, 3];
        fn perms(p: &mut [usize; 4], i: usize, w: &[[i64; 4]; 4], best: &mut i64) {
            if i == 4 {
                *best = (*best).min((0..4).map(|a| w[a][p[a]]).sum());
                return;
            }
            for j in i..4 {
                p.swap(i, j);
                perms(p, i + 1, w, best);
                p.swap(i, j);
            }
        }
        perms(&mut p, 0, &w, &mut best);
        assert_eq!(cost, best);
        for row in &chosen {
            assert_eq!(row.iter().filter(|&&x| x).count(), 1);
        }
    }

    #[test]
    fn regular_degree() {
        let (chosen, _) = min_cost_regular_bipartite(6, 3, |a, b| ((a * 7 + b * 3) % 2) as i64);
        for i in 0..6 {
            assert_eq!(chosen[i].iter().filter(|&&x| x).count(), 3);
            assert_eq!((0..6).filter(|&a| chosen[a][i]).count(), 3);
        }
    }
}
