//! Range-propagation baselines.
//!
//! Each base row is bounded on its own from the pair weights of its
//! candidates, ignoring that a group can be matched only once. The upper
//! contribution of a row is `multiplier × max weight`, the lower one its
//! smallest qualifying weight.

use serde::{Deserialize, Serialize};

use crate::candidate::{self, CandidateSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::query::{self, Aggregate, BoundQuery, Diagnostics, ResultInterval};
use crate::tables::{EntityGroup, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Multiplier is the candidate count of the row.
    MaxSum,
    /// Multiplier is `min(candidate count, N)`.
    MaxSumConstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub variant: Variant,
    #[serde(default = "default_percentile")]
    pub cap_percentile: f64,
}

fn default_percentile() -> f64 {
    0.75
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            variant: Variant::MaxSum,
            cap_percentile: default_percentile(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cap_percentile > 0.0 && self.cap_percentile <= 1.0) {
            return Err(Error::Config(format!(
                "cap_percentile must lie in (0, 1], got {}",
                self.cap_percentile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct RowRange {
    candidates: usize,
    max: f64,
    min: Option<f64>,
}

fn row_ranges(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    exec: Execution,
) -> Result<Vec<RowRange>> {
    if q.agg() == Aggregate::Avg {
        return Err(Error::Config("the Max-Sum baselines bound SUM and COUNT only".into()));
    }
    let (_, weights) = query::weighted_problem(q, base, aug, groups, psi, 1, exec)?;
    let mut rows = vec![RowRange::default(); psi.base_count];
    for (e, w) in psi.edges.iter().zip(weights) {
        let row = &mut rows[e.base];
        row.candidates += 1;
        row.max = row.max.max(w.weight);
        if w.qualifying > 0 {
            row.min = Some(row.min.map_or(w.weight, |m: f64| m.min(w.weight)));
        }
    }
    Ok(rows)
}

fn propagate(rows: &[RowRange], psi: &CandidateSet, multiplier: impl Fn(usize) -> usize, cap_used: usize) -> ResultInterval {
    let u = rows.iter().map(|r| multiplier(r.candidates) as f64 * r.max).sum();
    let l = rows.iter().map(|r| r.min.unwrap_or(0.0)).sum();
    ResultInterval {
        l: Some(l),
        u,
        nominal: None,
        diagnostics: Diagnostics {
            uncovered_groups: psi.coverable_groups().iter().filter(|&&c| !c).count(),
            cap_used,
            feasible_min: true,
        },
    }
}

pub fn max_sum_bounds(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    exec: Execution,
) -> Result<ResultInterval> {
    let rows = row_ranges(q, base, aug, groups, psi, exec)?;
    let widest = rows.iter().map(|r| r.candidates).max().unwrap_or(0);
    Ok(propagate(&rows, psi, |count| count, widest))
}

/// Max-Sum with the multiplier clipped to `cap`; `None` uses the 75th
/// percentile of candidate degrees. Only the upper bound is clipped.
pub fn max_sum_constrained_bounds(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    cap: Option<usize>,
    exec: Execution,
) -> Result<ResultInterval> {
    let cap = match cap {
        Some(0) => return Err(Error::Config("cap must be at least 1".into())),
        Some(n) => n,
        None => match candidate::percentile_cap(psi, default_percentile()) {
            Err(Error::NoEdges) => 1,
            other => other?,
        },
    };
    let rows = row_ranges(q, base, aug, groups, psi, exec)?;
    Ok(propagate(&rows, psi, |count| count.min(cap), cap))
}

/// Per-row range propagation without multiplicity: every row contributes
/// its largest and smallest candidate weight.
pub fn range_bounds(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    exec: Execution,
) -> Result<ResultInterval> {
    let rows = row_ranges(q, base, aug, groups, psi, exec)?;
    Ok(propagate(&rows, psi, |count| count.min(1), 1))
}

pub fn baseline_bounds(
    cfg: &BaselineConfig,
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    exec: Execution,
) -> Result<ResultInterval> {
    cfg.validate()?;
    match cfg.variant {
        Variant::MaxSum => max_sum_bounds(q, base, aug, groups, psi, exec),
        Variant::MaxSumConstrained => {
            let cap = match candidate::percentile_cap(psi, cfg.cap_percentile) {
                Err(Error::NoEdges) => 1,
                other => other?,
            };
            max_sum_constrained_bounds(q, base, aug, groups, psi, Some(cap), exec)
        }
    }
}
