//! Capacity-constrained unbalanced assignment.
//!
//! Base rows (left) may each receive up to `cap` groups (right); each group
//! is assigned at most once and only along an edge of the problem. The
//! maximum allows groups to stay unmatched; the minimum must match every
//! group that has an edge.
//!
//! Both are reduced to a balanced assignment: every left vertex is
//! duplicated once per unit of capacity and every group gets a private
//! zero-weight padding column standing for "unmatched". The reduced instance
//! is solved per connected component with [`solver::min_cost_assignment`].

mod oracle;
pub mod solver;

use std::collections::HashMap;

pub use oracle::{brute_force, brute_force_bounds, OracleBounds, ENUMERATION_LIMIT};

use crate::error::{Error, Result};
use crate::exec::Execution;
use solver::{Cost, SparseInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub base: usize,
    pub group: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub left_count: usize,
    pub right_count: usize,
    /// Sorted by `(base, group)`.
    pub edges: Vec<WeightedEdge>,
    pub cap: usize,
}

impl AssignmentProblem {
    pub fn new(
        left_count: usize,
        right_count: usize,
        mut edges: Vec<WeightedEdge>,
        cap: usize,
    ) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Config("cap must be at least 1".into()));
        }
        edges.sort_by_key(|e| (e.base, e.group));
        for e in &edges {
            if e.base >= left_count || e.group >= right_count {
                return Err(Error::Config(format!(
                    "edge ({}, {}) outside {left_count}x{right_count}",
                    e.base, e.group
                )));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::Config(format!(
                    "edge ({}, {}) has weight {}; weights must be finite and nonnegative",
                    e.base, e.group, e.weight
                )));
            }
        }
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].base, w[0].group) == (w[1].base, w[1].group))
        {
            return Err(Error::Config(format!(
                "duplicate edge ({}, {})",
                w[0].base, w[0].group
            )));
        }
        Ok(AssignmentProblem {
            left_count,
            right_count,
            edges,
            cap,
        })
    }

    pub fn with_cap(&self, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::Config("cap must be at least 1".into()));
        }
        Ok(AssignmentProblem {
            cap,
            ..self.clone()
        })
    }

    /// Largest left degree; a cap at least this large never binds.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.left_count];
        for e in &self.edges {
            deg[e.base] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn coverable_groups(&self) -> Vec<bool> {
        let mut covered = vec![false; self.right_count];
        for e in &self.edges {
            covered[e.group] = true;
        }
        covered
    }

    pub fn weight(&self, base: usize, group: usize) -> Option<f64> {
        self.edges
            .binary_search_by_key(&(base, group), |e| (e.base, e.group))
            .ok()
            .map(|i| self.edges[i].weight)
    }

    /// `r,g,weight` CSV of the weighted instance.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,g,weight\n");
        for e in &self.edges {
            out.push_str(&format!("{},{},{}\n", e.base, e.group, e.weight));
        }
        out
    }

    /// Connected components that contain at least one edge, each as the
    /// list of edge indices, in order of their smallest edge.
    fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.left_count + self.right_count).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e.base);
            let b = find(&mut parent, self.left_count + e.group);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let root = find(&mut parent, e.base);
            let c = *index.entry(root).or_insert_with(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[c].push(i);
        }
        comps
    }
}

/// A solved assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Base row of each group, `None` when unmatched.
    pub assigned: Vec<Option<usize>>,
    pub total_weight: f64,
    pub coverage: usize,
}

impl Assignment {
    fn from_assigned(problem: &AssignmentProblem, assigned: Vec<Option<usize>>) -> Self {
        let mut total_weight = 0.0;
        let mut coverage = 0;
        for (g, r) in assigned.iter().enumerate() {
            if let Some(r) = *r {
                total_weight += problem
                    .weight(r, g)
                    .expect("assignment uses an edge of the problem");
                coverage += 1;
            }
        }
        Assignment {
            assigned,
            total_weight,
            coverage,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assigned
            .iter()
            .enumerate()
            .filter_map(|(g, r)| r.map(|r| (r, g)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coverage {
    /// Groups may stay unmatched; among optima prefer more matched groups.
    Optional,
    /// Every group with an edge must be matched.
    Required,
}

/// Maximum total weight with each group matched at most once and each base
/// row receiving at most `cap` groups.
pub fn solve_max(problem: &AssignmentProblem) -> Assignment {
    solve_max_with(problem, Execution::default())
}

pub fn solve_max_with(problem: &AssignmentProblem, exec: Execution) -> Assignment {
    let assigned = maximize(problem, Coverage::Optional, exec)
        .expect("optional coverage is always feasible");
    Assignment::from_assigned(problem, assigned)
}

/// Minimum total weight over assignments that match every group having at
/// least one edge, with each base row receiving at most `cap` groups.
///
/// Weights are transformed to `max_weight - w` and the result maximized
/// under full coverage; with coverage fixed the two objectives differ by a
/// constant.
pub fn solve_min(problem: &AssignmentProblem) -> Result<Assignment> {
    solve_min_with(problem, Execution::default())
}

pub fn solve_min_with(problem: &AssignmentProblem, exec: Execution) -> Result<Assignment> {
    let top = problem.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let flipped = AssignmentProblem {
        edges: problem
            .edges
            .iter()
            .map(|e| WeightedEdge {
                weight: top - e.weight,
                ..*e
            })
            .collect(),
        ..problem.clone()
    };
    let assigned = maximize(&flipped, Coverage::Required, exec).map_err(|e| match e {
        Error::Infeasible { cap, .. } => Error::Infeasible {
            coverable: problem.coverable_groups().iter().filter(|&&c| c).count(),
            cap,
        },
        other => other,
    })?;
    Ok(Assignment::from_assigned(problem, assigned))
}

fn maximize(
    problem: &AssignmentProblem,
    coverage: Coverage,
    exec: Execution,
) -> Result<Vec<Option<usize>>> {
    let components = problem.components();
    let solved = exec.map(&components, |edge_ids| {
        solve_component(problem, edge_ids, coverage)
    });
    let mut assigned = vec![None; problem.right_count];
    for part in solved {
        for (g, r) in part? {
            assigned[g] = Some(r);
        }
    }
    Ok(assigned)
}

/// Solves one connected component; returns `(group, base)` pairs.
fn solve_component(
    problem: &AssignmentProblem,
    edge_ids: &[usize],
    coverage: Coverage,
) -> Result<Vec<(usize, usize)>> {
    // Local numbering in order of first appearance (edges are sorted by base).
    let mut local_base: HashMap<usize, usize> = HashMap::new();
    let mut bases: Vec<usize> = Vec::new();
    let mut local_group: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<usize> = Vec::new();
    let mut degree: Vec<usize> = Vec::new();
    for &i in edge_ids {
        let e = problem.edges[i];
        let b = *local_base.entry(e.base).or_insert_with(|| {
            bases.push(e.base);
            degree.push(0);
            bases.len() - 1
        });
        degree[b] += 1;
        local_group.entry(e.group).or_insert_with(|| {
            groups.push(e.group);
            groups.len() - 1
        });
    }
    groups.sort_unstable();
    for (k, &g) in groups.iter().enumerate() {
        local_group.insert(g, k);
    }

    // Left vertex b owns copies first_copy[b] .. first_copy[b] + copies[b].
    // Copies beyond the degree can never be used, so min(cap, degree).
    let mut first_copy = Vec::with_capacity(bases.len());
    let mut columns = 0;
    for &d in &degree {
        first_copy.push(columns);
        columns += problem.cap.min(d);
    }

    let top = edge_ids
        .iter()
        .map(|&i| problem.edges[i].weight)
        .fold(0.0, f64::max);
    let mut adjacency: Vec<Vec<(usize, Cost)>> = vec![Vec::new(); groups.len()];
    for &i in edge_ids {
        let e = problem.edges[i];
        let b = local_base[&e.base];
        let g = local_group[&e.group];
        let cost = Cost::new(top - e.weight, 0);
        for c in 0..problem.cap.min(degree[b]) {
            adjacency[g].push((first_copy[b] + c, cost));
        }
    }
    if coverage == Coverage::Optional {
        // Private padding column per group: weight 0, one unmatched group.
        for (g, adj) in adjacency.iter_mut().enumerate() {
            adj.push((columns + g, Cost::new(top, 1)));
        }
        columns += groups.len();
    }
    let copy_owner: Vec<usize> = first_copy
        .iter()
        .zip(&degree)
        .enumerate()
        .flat_map(|(b, (_, &d))| std::iter::repeat_n(b, problem.cap.min(d)))
        .collect();

    let instance = SparseInstance { columns, adjacency };
    let cols = solver::min_cost_assignment(&instance).map_err(|_| Error::Infeasible {
        coverable: groups.len(),
        cap: problem.cap,
    })?;
    Ok(cols
        .into_iter()
        .enumerate()
        .filter(|&(_, col)| col < copy_owner.len())
        .map(|(g, col)| (groups[g], bases[copy_owner[col]]))
        .collect())
}
