//! Exhaustive enumeration of assignments, used as a test oracle.

use super::AssignmentProblem;
use crate::error::{Error, Result};

/// Refuse to enumerate more than this many assignments.
pub const ENUMERATION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBounds {
    /// Maximum over all cap-respecting assignments, unmatched groups allowed.
    pub upper: f64,
    /// Minimum over cap-respecting assignments that match every group with
    /// an edge; `None` when no such assignment exists.
    pub lower: Option<f64>,
}

/// `(l, u)` by enumeration; `Infeasible` if no full-coverage assignment
/// exists.
pub fn brute_force_bounds(problem: &AssignmentProblem) -> Result<(f64, f64)> {
    let bounds = brute_force(problem)?;
    let lower = bounds.lower.ok_or(Error::Infeasible {
        coverable: problem.coverable_groups().iter().filter(|&&c| c).count(),
        cap: problem.cap,
    })?;
    Ok((lower, bounds.upper))
}

pub fn brute_force(problem: &AssignmentProblem) -> Result<OracleBounds> {
    // options[g] = (base, weight) candidates of each coverable group
    let mut options: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.right_count];
    for e in &problem.edges {
        options[e.group].push((e.base, e.weight));
    }
    options.retain(|o| !o.is_empty());
    let count: f64 = options.iter().map(|o| (o.len() + 1) as f64).product();
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let mut state = Enumeration {
        options: &options,
        load: vec![0; problem.left_count],
        cap: problem.cap,
        upper: f64::NEG_INFINITY,
        lower: None,
    };
    state.visit(0, 0.0, true);
    Ok(OracleBounds {
        upper: state.upper,
        lower: state.lower,
    })
}

struct Enumeration<'a> {
    options: &'a [Vec<(usize, f64)>],
    load: Vec<usize>,
    cap: usize,
    upper: f64,
    lower: Option<f64>,
}

impl Enumeration<'_> {
    fn visit(&mut self, g: usize, total: f64, full: bool) {
        if g == self.options.len() {
            self.upper = self.upper.max(total);
            if full {
                self.lower = Some(self.lower.map_or(total, |l| l.min(total)));
            }
            return;
        }
        self.visit(g + 1, total, false);
        for &(r, w) in &self.options[g] {
            if self.load[r] < self.cap {
                self.load[r] += 1;
                self.visit(g + 1, total + w, full);
                self.load[r] -= 1;
            }
        }
    }
}
