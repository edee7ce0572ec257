//! Shortest closed tour through a small point set.
//!
//! Exact Held-Karp dynamic programming up to [`EXACT_LIMIT`] points,
//! nearest-neighbour construction refined by 2-opt above that. Both scan
//! candidates in fixed index order, so results are deterministic.

use crate::dense::RowMatrix;
use crate::semspace::euclidean_distance;

/// Largest point count solved exactly.
pub const EXACT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Visiting order, starting at point 0; the tour closes back to it.
    pub order: Vec<usize>,
    pub length: f64,
}

pub fn euclidean_distances(points: &[Vec<f64>]) -> RowMatrix {
    let n = points.len();
    let mut d = RowMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let x = euclidean_distance(&points[i], &points[j]);
            d[(i, j)] = x;
            d[(j, i)] = x;
        }
    }
    d
}

/// Length of the closed tour visiting points in `order`.
pub fn closed_length(dist: &RowMatrix, order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in order.windows(2) {
        total += dist[(w[0], w[1])];
    }
    total + dist[(order[order.len() - 1], order[0])]
}

/// Shortest closed tour, exact when the instance is small enough.
pub fn shortest_tour(dist: &RowMatrix) -> Tour {
    if dist.nrows() <= EXACT_LIMIT {
        held_karp(dist)
    } else {
        nearest_neighbour_two_opt(dist)
    }
}

fn trivial(n: usize, dist: &RowMatrix) -> Option<Tour> {
    if n <= 3 {
        let order: Vec<usize> = (0..n).collect();
        let length = closed_length(dist, &order);
        return Some(Tour { order, length });
    }
    None
}

/// Exact dynamic program over subsets; `O(2ⁿ n²)`.
pub fn held_karp(dist: &RowMatrix) -> Tour {
    let n = dist.nrows();
    assert_eq!(n, dist.ncols());
    assert!(n <= 20, "Held-Karp is limited to 20 points");
    if let Some(t) = trivial(n, dist) {
        return t;
    }
    // Node 0 is the fixed start; subsets range over nodes 1..n (bit k-1 for node k).
    let m = n - 1;
    let full = 1usize << m;
    let mut cost = vec![f64::INFINITY; full * m];
    let mut parent = vec![usize::MAX; full * m];
    for k in 0..m {
        cost[(1 << k) * m + k] = dist[(0, k + 1)];
    }
    for set in 1..full {
        for last in 0..m {
            if set & (1 << last) == 0 {
                continue;
            }
            let here = cost[set * m + last];
            if !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if set & (1 << next) != 0 {
                    continue;
                }
                let grown = set | (1 << next);
                let c = here + dist[(last + 1, next + 1)];
                if c < cost[grown * m + next] {
                    cost[grown * m + next] = c;
                    parent[grown * m + next] = last;
                }
            }
        }
    }
    let all = full - 1;
    let mut best = f64::INFINITY;
    let mut last = 0;
    for k in 0..m {
        let c = cost[all * m + k] + dist[(k + 1, 0)];
        if c < best {
            best = c;
            last = k;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut set = all;
    let mut node = last;
    while node != usize::MAX {
        rev.push(node + 1);
        let p = parent[set * m + node];
        set &= !(1 << node);
        node = p;
    }
    let mut order = vec![0];
    order.extend(rev.into_iter().rev());
    Tour {
        length: closed_length(dist, &order),
        order,
    }
}

/// Greedy nearest-neighbour tour from point 0, then first-improvement 2-opt
/// until no move shortens the tour.
pub fn nearest_neighbour_two_opt(dist: &RowMatrix) -> Tour {
    let n = dist.nrows();
    if let Some(t) = trivial(n, dist) {
        return t;
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in 0..n {
            if !visited[j] && dist[(cur, j)] < best_d {
                best_d = dist[(cur, j)];
                best = j;
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }

    let eps = 1e-12;
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, d) = (order[j], order[(j + 1) % n]);
                let delta = dist[(a, c)] + dist[(b, d)] - dist[(a, b)] - dist[(c, d)];
                if delta < -eps {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Tour {
        length: closed_length(dist, &order),
        order,
    }
}
