//! Hopcroft–Karp maximum matching on a bipartite graph given by left-side
//! adjacency lists.

use std::collections::VecDeque;

pub const UNMATCHED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `left[a]` is the right partner of left vertex `a`, or `UNMATCHED`.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub size: usize,
}

impl Matching {
    pub fn is_perfect(&self) -> bool {
        self.size == self.left.len() && self.size == self.right.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != UNMATCHED)
            .map(|(a, &b)| (a, b))
    }
}

/// Maximum matching; `adj[a]` lists right neighbours of left vertex `a`.
pub fn hopcroft_karp(adj: &[Vec<usize>], right_count: usize) -> Matching {
    let n = adj.len();
    let mut ml = vec![UNMATCHED; n];
    let mut mr = vec![UNMATCHED; right_count];
    let mut dist = vec![0usize; n];
    let mut size = 0;
    // greedy warm start
    for a in 0..n {
        if let Some(&b) = adj[a].iter().find(|&&b| mr[b] == UNMATCHED) {
            ml[a] = b;
            mr[b] = a;
            size += 1;
        }
    }
    loop {
        let mut queue = VecDeque::new();
        let mut found = false;
        for a in 0..n {
            if ml[a] == UNMATCHED {
                dist[a] = 0;
                queue.push_back(a);
            } else {
                dist[a] = usize::MAX;
            }
        }
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                let a2 = mr[b];
                if a2 == UNMATCHED {
                    found = true;
                } else if dist[a2] == usize::MAX {
                    dist[a2] = dist[a] + 1;
                    queue.push_back(a2);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n];
        for a in 0..n {
            if ml[a] == UNMATCHED && augment(a, adj, &mut ml, &mut mr, &mut dist, &mut it) {
                size += 1;
            }
        }
    }
    Matching { left: ml, right: mr, size }
}

fn augment(
    start: usize,
    adj: &[Vec<usize>],
    ml: &mut [usize],
    mr: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    // iterative DFS along the layered graph
    let mut stack = vec![start];
    let mut via: Vec<usize> = Vec::new();
    while let Some(&a) = stack.last() {
        if it[a] < adj[a].len() {
            let b = adj[a][it[a]];
            it[a] += 1;
            let a2 = mr[b];
            if a2 == UNMATCHED {
                via.push(b);
                for (k, &x) in stack.iter().enumerate() {
                    let y = via[k];
                    ml[x] = y;
                    mr[y] = x;
                }
                return true;
            }
            if dist[a2] == dist[a] + 1 {
                via.push(b);
                stack.push(a2);
            }
        } else {
            dist[a] = usize::MAX;
            stack.pop();
            via.pop();
        }
    }
    false
}

/// A left set S with |N(S)| < |S| when the matching is not left-perfect:
/// the left vertices reachable by alternating paths from an unmatched one.
pub fn hall_violator(adj: &[Vec<usize>], m: &Matching) -> Option<Vec<usize>> {
    let start = m.left.iter().position(|&b| b == UNMATCHED)?;
    let mut seen_l = vec![false; adj.len()];
    let mut seen_r = vec![false; m.right.len()];
    let mut queue = VecDeque::from([start]);
    seen_l[start] = true;
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if !seen_r[b] {
                seen_r[b] = true;
                let a2 = m.right[b];
                if a2 != UNMATCHED && !seen_l[a2] {
                    seen_l[a2] = true;
                    queue.push_back(a2);
                }
            }
        }
    }
    Some((0..adj.len()).filter(|&a| seen_l[a]).collect())
}
