//! Shortest-augmenting-path assignment with dual potentials (Hungarian
//! family) on sparse rectangular instances.
//!
//! Every row must be assigned to a distinct column. Rows are inserted one at
//! a time; each insertion runs Dijkstra over reduced costs
//! `c(i, j) - u[i] - v[j]`, which stay nonnegative, and then repairs the
//! potentials so that matched edges are tight. Worst case `O(n · m log m)`
//! for `n` rows and `m` edges, `O(n³)` on dense square inputs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::{Add, Sub};

/// Lexicographic cost: `primary` first, then `secondary`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    pub primary: f64,
    pub secondary: i64,
}

impl Cost {
    pub const ZERO: Cost = Cost {
        primary: 0.0,
        secondary: 0,
    };
    const INF: Cost = Cost {
        primary: f64::INFINITY,
        secondary: 0,
    };

    pub fn new(primary: f64, secondary: i64) -> Self {
        Cost { primary, secondary }
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.secondary.cmp(&other.secondary))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost::new(self.primary + rhs.primary, self.secondary + rhs.secondary)
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost::new(self.primary - rhs.primary, self.secondary - rhs.secondary)
    }
}

/// Sparse instance: `adjacency[row]` lists `(column, cost)` with costs ≥ 0.
#[derive(Debug, Clone, Default)]
pub struct SparseInstance {
    pub columns: usize,
    pub adjacency: Vec<Vec<(usize, Cost)>>,
}

const NONE: usize = usize::MAX;

/// Minimum-cost assignment of every row to a distinct column.
///
/// Returns the column of each row, or `Err(row)` for the first row that
/// cannot be inserted (no augmenting path exists).
pub fn min_cost_assignment(instance: &SparseInstance) -> Result<Vec<usize>, usize> {
    let rows = instance.adjacency.len();
    let cols = instance.columns;
    let mut u = vec![Cost::ZERO; rows];
    let mut v = vec![Cost::ZERO; cols];
    let mut col_of_row = vec![NONE; rows];
    let mut row_of_col = vec![NONE; cols];

    let mut dist = vec![Cost::INF; cols];
    let mut pred = vec![NONE; cols];
    let mut done = vec![false; cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<(Cost, usize)>> = BinaryHeap::new();

    for start in 0..rows {
        for &j in &touched {
            dist[j] = Cost::INF;
            pred[j] = NONE;
            done[j] = false;
        }
        touched.clear();
        finalized.clear();
        heap.clear();

        let relax = |i: usize,
                     base: Cost,
                     u: &[Cost],
                     v: &[Cost],
                     dist: &mut [Cost],
                     pred: &mut [usize],
                     done: &[bool],
                     touched: &mut Vec<usize>,
                     heap: &mut BinaryHeap<Reverse<(Cost, usize)>>| {
            for &(j, c) in &instance.adjacency[i] {
                if done[j] {
                    continue;
                }
                let mut reduced = c - u[i] - v[j];
                if reduced.primary < 0.0 && reduced.primary > -1e-9 {
                    reduced.primary = 0.0;
                }
                let nd = base + reduced;
                if nd < dist[j] {
                    if dist[j] == Cost::INF {
                        touched.push(j);
                    }
                    dist[j] = nd;
                    pred[j] = i;
                    heap.push(Reverse((nd, j)));
                }
            }
        };

        relax(
            start, Cost::ZERO, &u, &v, &mut dist, &mut pred, &done, &mut touched, &mut heap,
        );
        let mut sink = NONE;
        while let Some(Reverse((d, j))) = heap.pop() {
            if done[j] || d != dist[j] {
                continue;
            }
            done[j] = true;
            finalized.push(j);
            let owner = row_of_col[j];
            if owner == NONE {
                sink = j;
                break;
            }
            relax(
                owner, d, &u, &v, &mut dist, &mut pred, &done, &mut touched, &mut heap,
            );
        }
        if sink == NONE {
            return Err(start);
        }

        let total = dist[sink];
        for &j in &finalized {
            let delta = total - dist[j];
            v[j] = v[j] - delta;
            let owner = row_of_col[j];
            if owner != NONE {
                u[owner] = u[owner] + delta;
            }
        }
        u[start] = u[start] + total;

        let mut j = sink;
        loop {
            let i = pred[j];
            let previous = col_of_row[i];
            col_of_row[i] = j;
            row_of_col[j] = i;
            if i == start {
                break;
            }
            j = previous;
        }
    }
    Ok(col_of_row)
}

/// Maximum-weight perfect matching of a square dense weight matrix.
/// Returns the column of each row.
pub fn max_weight_square(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    let top = weights
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let adjacency = weights
        .iter()
        .map(|row| {
            assert_eq!(row.len(), n, "weight matrix must be square");
            row.iter()
                .enumerate()
                .map(|(j, &w)| (j, Cost::new(top - w, 0)))
                .collect()
        })
        .collect();
    min_cost_assignment(&SparseInstance {
        columns: n,
        adjacency,
    })
    .expect("a complete square instance always has a perfect matching")
}
