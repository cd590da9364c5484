//! Aggregate queries over the integrated table and their result intervals.
//!
//! A SUM or COUNT query turns every candidate edge `(r, g)` into the weight
//! of the sub-table `r × g` after the predicate: the sum of the target over
//! qualifying pairs, or their count. The interval is then the minimum and
//! maximum of the capacity-constrained assignment over those weights. AVG
//! is derived from the SUM interval of the same predicate.

mod parse;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

pub use parse::parse_query;

use crate::assignment::{self, AssignmentProblem, WeightedEdge};
use crate::candidate::{self, CandidateSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::similarity;
use crate::tables::{ColumnKind, EntityGroup, Matching, Relation, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Aggregate {
    Sum,
    Count,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Base,
    Aug,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub side: Option<Side>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    True,
    False,
    Compare {
        column: ColumnRef,
        op: CmpOp,
        value: Literal,
    },
    /// Every token of `keyword` occurs among the tokens of the column.
    Contains {
        column: ColumnRef,
        keyword: String,
    },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateQuery {
    pub agg: Aggregate,
    /// `None` for `COUNT(1)`.
    pub target: Option<ColumnRef>,
    pub predicate: Predicate,
}

impl AggregateQuery {
    pub fn parse(text: &str) -> Result<Self> {
        parse_query(text)
    }

    /// The same query with a different aggregate.
    pub fn with_agg(&self, agg: Aggregate) -> Self {
        AggregateQuery {
            agg,
            ..self.clone()
        }
    }
}

fn quote_ident(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Some(Side::Base) => write!(f, "base.{}", quote_ident(&self.name)),
            Some(Side::Aug) => write!(f, "aug.{}", quote_ident(&self.name)),
            None => f.write_str(&quote_ident(&self.name)),
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(x) => write!(f, "{x}"),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => f.write_str("TRUE"),
            Predicate::False => f.write_str("FALSE"),
            Predicate::Compare { column, op, value } => write!(f, "{column} {op} {value}"),
            Predicate::Contains { column, keyword } => {
                write!(f, "{column} CONTAINS {}", Literal::Text(keyword.clone()))
            }
            Predicate::And(a, b) => write!(f, "({a} AND {b})"),
            Predicate::Or(a, b) => write!(f, "({a} OR {b})"),
            Predicate::Not(a) => write!(f, "NOT ({a})"),
        }
    }
}

impl fmt::Display for AggregateQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let agg = match self.agg {
            Aggregate::Sum => "SUM",
            Aggregate::Count => "COUNT",
            Aggregate::Avg => "AVG",
        };
        match &self.target {
            Some(c) => write!(f, "SELECT {agg}({c})")?,
            None => write!(f, "SELECT {agg}(1)")?,
        }
        write!(f, " WHERE {}", self.predicate)
    }
}

/// A column resolved against the two relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundColumn {
    pub side: Side,
    pub index: usize,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Bound {
    Const(bool),
    Number(BoundColumn, CmpOp, f64),
    Text(BoundColumn, bool, String),
    Contains(BoundColumn, Vec<String>),
    And(Box<Bound>, Box<Bound>),
    Or(Box<Bound>, Box<Bound>),
    Not(Box<Bound>),
}

/// A query whose columns have been checked against a base and an
/// augmenting relation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub query: AggregateQuery,
    pub target: Option<BoundColumn>,
    predicate: Bound,
}

fn resolve(column: &ColumnRef, base: &Relation, aug: &Relation) -> Result<BoundColumn> {
    let on = |side: Side, rel: &Relation| {
        rel.column_index(&column.name).map(|index| BoundColumn {
            side,
            index,
            kind: rel.columns[index].kind,
        })
    };
    match column.side {
        Some(Side::Base) => on(Side::Base, base),
        Some(Side::Aug) => on(Side::Aug, aug),
        None => match (on(Side::Base, base), on(Side::Aug, aug)) {
            (Some(_), Some(_)) => return Err(Error::AmbiguousColumn(column.name.clone())),
            (a, b) => a.or(b),
        },
    }
    .ok_or_else(|| Error::UnknownColumn(column.to_string()))
}

fn bind_predicate(p: &Predicate, base: &Relation, aug: &Relation) -> Result<Bound> {
    Ok(match p {
        Predicate::True => Bound::Const(true),
        Predicate::False => Bound::Const(false),
        Predicate::Compare { column, op, value } => {
            let c = resolve(column, base, aug)?;
            match (c.kind, value) {
                (ColumnKind::Number, Literal::Number(x)) => Bound::Number(c, *op, *x),
                (ColumnKind::Text, Literal::Text(s)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => {
                    Bound::Text(c, *op == CmpOp::Eq, s.clone())
                }
                (ColumnKind::Text, Literal::Text(_)) => {
                    return Err(Error::Type(format!("`{column}` is text; only = and != apply")))
                }
                (ColumnKind::Number, Literal::Text(_)) => {
                    return Err(Error::Type(format!("`{column}` is numeric, compared with text")))
                }
                (ColumnKind::Text, Literal::Number(_)) => {
                    return Err(Error::Type(format!("`{column}` is text, compared with a number")))
                }
            }
        }
        Predicate::Contains { column, keyword } => {
            let c = resolve(column, base, aug)?;
            if c.kind != ColumnKind::Text {
                return Err(Error::Type(format!("CONTAINS needs a text column, `{column}` is numeric")));
            }
            Bound::Contains(c, similarity::tokenize(keyword))
        }
        Predicate::And(a, b) => Bound::And(
            Box::new(bind_predicate(a, base, aug)?),
            Box::new(bind_predicate(b, base, aug)?),
        ),
        Predicate::Or(a, b) => Bound::Or(
            Box::new(bind_predicate(a, base, aug)?),
            Box::new(bind_predicate(b, base, aug)?),
        ),
        Predicate::Not(a) => Bound::Not(Box::new(bind_predicate(a, base, aug)?)),
    })
}

impl BoundQuery {
    pub fn bind(query: &AggregateQuery, base: &Relation, aug: &Relation) -> Result<Self> {
        let target = match &query.target {
            Some(c) => {
                let bound = resolve(c, base, aug)?;
                if query.agg != Aggregate::Count && bound.kind != ColumnKind::Number {
                    return Err(Error::Type(format!("aggregation target `{c}` is not numeric")));
                }
                Some(bound)
            }
            None if query.agg == Aggregate::Count => None,
            None => return Err(Error::Type("SUM and AVG need a target column".into())),
        };
        Ok(BoundQuery {
            query: query.clone(),
            target,
            predicate: bind_predicate(&query.predicate, base, aug)?,
        })
    }

    pub fn parse(text: &str, base: &Relation, aug: &Relation) -> Result<Self> {
        Self::bind(&parse_query(text)?, base, aug)
    }

    pub fn agg(&self) -> Aggregate {
        self.query.agg
    }

    /// Whether the joined row `(r, s)` satisfies the predicate.
    pub fn qualifies(&self, base: &Relation, aug: &Relation, r: usize, s: usize) -> bool {
        eval(&self.predicate, base, aug, r, s)
    }
}

fn cell<'a>(c: BoundColumn, base: &'a Relation, aug: &'a Relation, r: usize, s: usize) -> &'a Value {
    match c.side {
        Side::Base => base.value(r, c.index),
        Side::Aug => aug.value(s, c.index),
    }
}

fn eval(p: &Bound, base: &Relation, aug: &Relation, r: usize, s: usize) -> bool {
    match p {
        Bound::Const(b) => *b,
        Bound::Number(c, op, x) => {
            let v = cell(*c, base, aug, r, s).as_number().unwrap_or(f64::NAN);
            match op {
                CmpOp::Eq => v == *x,
                CmpOp::Ne => v != *x,
                CmpOp::Lt => v < *x,
                CmpOp::Le => v <= *x,
                CmpOp::Gt => v > *x,
                CmpOp::Ge => v >= *x,
            }
        }
        Bound::Text(c, eq, text) => (cell(*c, base, aug, r, s).as_text() == Some(text.as_str())) == *eq,
        Bound::Contains(c, tokens) => {
            let have: HashSet<String> = similarity::tokenize(cell(*c, base, aug, r, s).as_text().unwrap_or(""))
                .into_iter()
                .collect();
            tokens.iter().all(|t| have.contains(t))
        }
        Bound::And(a, b) => eval(a, base, aug, r, s) && eval(b, base, aug, r, s),
        Bound::Or(a, b) => eval(a, base, aug, r, s) || eval(b, base, aug, r, s),
        Bound::Not(a) => !eval(a, base, aug, r, s),
    }
}

/// Aggregate of the sub-table `r × g` under the predicate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairWeight {
    /// Sum of the target (SUM, AVG) or number of qualifying pairs (COUNT).
    pub weight: f64,
    pub qualifying: usize,
}

pub fn pair_weight(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    r: usize,
    group: &EntityGroup,
) -> Result<PairWeight> {
    let mut out = PairWeight::default();
    for &s in &group.row_indices {
        if !q.qualifies(base, aug, r, s) {
            continue;
        }
        out.qualifying += 1;
        match (q.agg(), q.target) {
            (Aggregate::Count, _) => out.weight += 1.0,
            (_, Some(t)) => {
                let v = cell(t, base, aug, r, s).as_number().unwrap_or(0.0);
                if v < 0.0 {
                    let rel = if t.side == Side::Base { base } else { aug };
                    return Err(Error::NegativeValue {
                        column: rel.columns[t.index].name.clone(),
                        value: v,
                    });
                }
                out.weight += v;
            }
            (_, None) => unreachable!("bound SUM/AVG queries have a target"),
        }
    }
    Ok(out)
}

/// How the per-base-row cap is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cap {
    Explicit(usize),
    /// Nearest-rank percentile of candidate degrees.
    Percentile(f64),
    /// Never binds: the largest candidate degree.
    Unconstrained,
}

impl Cap {
    pub fn resolve(self, psi: &CandidateSet) -> Result<usize> {
        match self {
            Cap::Explicit(0) => Err(Error::Config("cap must be at least 1".into())),
            Cap::Explicit(n) => Ok(n),
            Cap::Percentile(p) => match candidate::percentile_cap(psi, p) {
                Err(Error::NoEdges) => Ok(1),
                other => other,
            },
            Cap::Unconstrained => Ok(candidate::match_degrees(psi).into_iter().max().unwrap_or(0).max(1)),
        }
    }
}

/// Builds the weighted assignment problem for a SUM/COUNT/AVG query: one
/// edge per candidate pair, weighted by [`pair_weight`] (AVG uses SUM
/// weights).
pub fn weighted_problem(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    cap: usize,
    exec: Execution,
) -> Result<(AssignmentProblem, Vec<PairWeight>)> {
    let weights = exec.map(&psi.edges, |e| pair_weight(q, base, aug, e.base, &groups[e.group]));
    let weights = weights.into_iter().collect::<Result<Vec<_>>>()?;
    let edges = psi
        .edges
        .iter()
        .zip(&weights)
        .map(|(e, w)| WeightedEdge {
            base: e.base,
            group: e.group,
            weight: w.weight,
        })
        .collect();
    let problem = AssignmentProblem::new(psi.base_count, psi.group_count, edges, cap)?;
    Ok((problem, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Groups with no candidate edge; they cannot be matched.
    pub uncovered_groups: usize,
    pub cap_used: usize,
    pub feasible_min: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResultInterval {
    /// `None` when the minimum is infeasible under the cap.
    pub l: Option<f64>,
    pub u: f64,
    pub nominal: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl ResultInterval {
    pub fn length(&self) -> Option<f64> {
        self.l.map(|l| self.u - l)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.l.is_some_and(|l| l <= value && value <= self.u)
    }
}

/// SUM or COUNT interval from the maximum and minimum assignment.
pub fn result_interval(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    cap: usize,
    exec: Execution,
) -> Result<ResultInterval> {
    if q.agg() == Aggregate::Avg {
        return Err(Error::Config("result_interval takes SUM or COUNT; use avg_interval".into()));
    }
    let (problem, _) = weighted_problem(q, base, aug, groups, psi, cap, exec)?;
    Ok(interval_of(&problem, exec))
}

pub(crate) fn interval_of(problem: &AssignmentProblem, exec: Execution) -> ResultInterval {
    let uncovered_groups = problem.coverable_groups().iter().filter(|&&c| !c).count();
    let upper = assignment::solve_max_with(problem, exec).total_weight;
    let lower = match assignment::solve_min_with(problem, exec) {
        Ok(a) => Some(a.total_weight),
        Err(_) => None,
    };
    ResultInterval {
        l: lower,
        u: upper,
        nominal: None,
        diagnostics: Diagnostics {
            uncovered_groups,
            cap_used: problem.cap,
            feasible_min: lower.is_some(),
        },
    }
}

/// `l_avg = l_sum / min(|R|·N, |S|)` and `u_avg = u_sum / d`, where `|S|`
/// counts entity groups and `d` counts groups with a strictly positive
/// edge weight.
pub fn avg_bounds(
    l_sum: f64,
    u_sum: f64,
    base_count: usize,
    group_count: usize,
    cap: usize,
    d: usize,
) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::UndefinedAverage);
    }
    let units = (base_count * cap).min(group_count);
    Ok((l_sum / units as f64, u_sum / d as f64))
}

/// Number of groups with at least one strictly positive edge weight.
pub fn positive_groups(problem: &AssignmentProblem) -> usize {
    let mut positive = vec![false; problem.right_count];
    for e in &problem.edges {
        if e.weight > 0.0 {
            positive[e.group] = true;
        }
    }
    positive.into_iter().filter(|&p| p).count()
}

/// AVG interval from the SUM interval of the same predicate.
pub fn avg_interval(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    cap: usize,
    exec: Execution,
) -> Result<ResultInterval> {
    let sum_query = BoundQuery {
        query: q.query.with_agg(Aggregate::Sum),
        ..q.clone()
    };
    let (problem, _) = weighted_problem(&sum_query, base, aug, groups, psi, cap, exec)?;
    let sum = interval_of(&problem, exec);
    let d = positive_groups(&problem);
    let (l_avg, u_avg) = avg_bounds(sum.l.unwrap_or(0.0), sum.u, base.len(), groups.len(), cap, d)?;
    Ok(ResultInterval {
        l: sum.l.map(|_| l_avg),
        u: u_avg,
        ..sum
    })
}

/// Interval for any aggregate.
pub fn interval(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    psi: &CandidateSet,
    cap: usize,
    exec: Execution,
) -> Result<ResultInterval> {
    match q.agg() {
        Aggregate::Avg => avg_interval(q, base, aug, groups, psi, cap, exec),
        _ => result_interval(q, base, aug, groups, psi, cap, exec),
    }
}

/// `(u - l) / nominal`.
pub fn relative_error(l: f64, u: f64, nominal: f64) -> Result<f64> {
    if nominal == 0.0 {
        return Err(Error::ZeroNominal);
    }
    Ok((u - l) / nominal)
}

/// The aggregate over the integrated table induced by `matching`.
///
/// AVG is the sum of the per-pair SUM weights divided by the number of
/// matched pairs with a positive weight (0 when there are none).
pub fn nominal_result(
    q: &BoundQuery,
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    matching: &Matching,
) -> Result<f64> {
    let mut total = 0.0;
    let mut positive = 0usize;
    let agg = if q.agg() == Aggregate::Avg { Aggregate::Sum } else { q.agg() };
    let sum_query = BoundQuery {
        query: q.query.with_agg(agg),
        ..q.clone()
    };
    for &(r, g) in &matching.pairs {
        let w = pair_weight(&sum_query, base, aug, r, &groups[g])?;
        total += w.weight;
        positive += usize::from(w.weight > 0.0);
    }
    Ok(match q.agg() {
        Aggregate::Avg if positive == 0 => 0.0,
        Aggregate::Avg => total / positive as f64,
        _ => total,
    })
}

/// Greedy stand-in for a pipeline's chosen matching: edges by best score
/// first, accepted while the group is free and the base row is under cap.
pub fn greedy_matching(psi: &CandidateSet, cap: usize, lower_is_better: bool) -> Matching {
    let mut order: Vec<usize> = (0..psi.edges.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&psi.edges[a], &psi.edges[b]);
        let by_score = if lower_is_better {
            ea.score.total_cmp(&eb.score)
        } else {
            eb.score.total_cmp(&ea.score)
        };
        by_score.then((ea.base, ea.group).cmp(&(eb.base, eb.group)))
    });
    let mut load = vec![0usize; psi.base_count];
    let mut taken = vec![false; psi.group_count];
    let mut m = Matching::new(crate::tables::MatchKind::Nominal);
    for i in order {
        let e = &psi.edges[i];
        if !taken[e.group] && load[e.base] < cap {
            taken[e.group] = true;
            load[e.base] += 1;
            m.pairs.insert((e.base, e.group));
        }
    }
    m
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::candidate::{BlockingConfig, Edge};
    use crate::similarity::{Metric, SimilarityConfig};
    use crate::tables::{group_augmenting, Column, MatchKind, Role};

    pub(crate) fn stargazer() -> (Relation, Relation, Vec<EntityGroup>, CandidateSet) {
        let base = Relation::new(
            "products",
            vec![
                Column::new("Product_Name", ColumnKind::Text),
                Column::new("Price", ColumnKind::Number),
            ],
            [("StarGazer Premier Pro", 125.0), ("StarGazer Academic", 85.0), ("Extended Warranty", 15.0)]
                .iter()
                .map(|(n, p)| vec![Value::Text(n.to_string()), Value::Number(*p)])
                .collect(),
            &["Product_Name"],
            &["Price"],
            Role::Base,
        )
        .unwrap();
        let aug = Relation::new(
            "complaints",
            vec![
                Column::new("Product_Tag", ColumnKind::Text),
                Column::new("N_Complaints", ColumnKind::Number),
            ],
            [
                ("StarGazer Premier Pro", 33.0),
                ("StarGazer", 51.0),
                ("StarGazer Academic", 5.0),
                ("Extended Warranty", 17.0),
            ]
            .iter()
            .map(|(n, c)| vec![Value::Text(n.to_string()), Value::Number(*c)])
            .collect(),
            &["Product_Tag"],
            &["N_Complaints"],
            Role::Augmenting,
        )
        .unwrap();
        let groups = group_augmenting(&aug);
        let sim = SimilarityConfig {
            metric: Metric::Jaccard,
            threshold: 0.3,
            base_attr: "Product_Name".into(),
            aug_attr: "Product_Tag".into(),
        };
        let psi = candidate::build_candidate_set(&base, &aug, &groups, &sim, &BlockingConfig::disabled(), Execution::Sequential)
            .unwrap();
        (base, aug, groups, psi)
    }

    const INTRO: &str = "SELECT SUM(N_Complaints) WHERE Product_Name = 'StarGazer Premier Pro'";

    #[test]
    fn pair_weights_of_intro_query() {
        let (base, aug, groups, _) = stargazer();
        let q = BoundQuery::parse(INTRO, &base, &aug).unwrap();
        assert_eq!(pair_weight(&q, &base, &aug, 0, &groups[1]).unwrap().weight, 51.0);
        assert_eq!(pair_weight(&q, &base, &aug, 0, &groups[0]).unwrap().weight, 33.0);
        assert_eq!(pair_weight(&q, &base, &aug, 1, &groups[1]).unwrap().weight, 0.0);
        let none = BoundQuery::parse("SELECT SUM(N_Complaints) WHERE FALSE", &base, &aug).unwrap();
        assert_eq!(pair_weight(&none, &base, &aug, 0, &groups[1]).unwrap(), PairWeight::default());
    }

    #[test]
    fn count_weights_count_qualifying_rows() {
        let aug = Relation::new(
            "a",
            vec![Column::new("Tag", ColumnKind::Text), Column::new("V", ColumnKind::Number)],
            [("x", 1.0), ("x", 5.0), ("x", 7.0)]
                .iter()
                .map(|(t, v)| vec![Value::Text(t.to_string()), Value::Number(*v)])
                .collect(),
            &["Tag"],
            &["V"],
            Role::Augmenting,
        )
        .unwrap();
        let (base, ..) = stargazer();
        let groups = group_augmenting(&aug);
        assert_eq!(groups.len(), 1);
        let q = BoundQuery::parse("SELECT COUNT(1) WHERE V > 2", &base, &aug).unwrap();
        let w = pair_weight(&q, &base, &aug, 0, &groups[0]).unwrap();
        assert_eq!((w.weight, w.qualifying), (2.0, 2));
    }

    #[test]
    fn intro_interval() {
        let (base, aug, groups, psi) = stargazer();
        let q = BoundQuery::parse(INTRO, &base, &aug).unwrap();
        let iv = result_interval(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!((iv.l, iv.u), (Some(33.0), 84.0));
        assert_eq!(iv.diagnostics, Diagnostics { uncovered_groups: 0, cap_used: 2, feasible_min: true });
    }

    #[test]
    fn count_true_is_degenerate() {
        let (base, aug, groups, psi) = stargazer();
        let q = BoundQuery::parse("SELECT COUNT(1) WHERE TRUE", &base, &aug).unwrap();
        let iv = result_interval(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!((iv.l, iv.u), (Some(4.0), 4.0));
    }

    #[test]
    fn empty_candidates_give_zero_interval() {
        let (base, aug, groups, _) = stargazer();
        let psi = CandidateSet::empty(base.len(), groups.len());
        let q = BoundQuery::parse(INTRO, &base, &aug).unwrap();
        let iv = result_interval(&q, &base, &aug, &groups, &psi, 1, Execution::Sequential).unwrap();
        assert_eq!((iv.l, iv.u), (Some(0.0), 0.0));
        assert_eq!(iv.diagnostics.uncovered_groups, 4);
    }

    #[test]
    fn infeasible_minimum_is_reported_not_raised() {
        let (base, aug, groups, _) = stargazer();
        let e = |g| Edge { base: 0, group: g, score: 1.0 };
        let psi = CandidateSet::new(3, 4, vec![e(0), e(1), e(2)]).unwrap();
        let q = BoundQuery::parse("SELECT COUNT(1) WHERE TRUE", &base, &aug).unwrap();
        let iv = result_interval(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!(iv.l, None);
        assert!(!iv.diagnostics.feasible_min);
        assert_eq!(iv.u, 2.0);
    }

    #[test]
    fn avg_bounds_on_stargazer() {
        let (base, aug, groups, psi) = stargazer();
        let q = BoundQuery::parse(INTRO, &base, &aug).unwrap();
        let (problem, _) = weighted_problem(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!(positive_groups(&problem), 2);
        assert_eq!(avg_bounds(33.0, 84.0, 3, 4, 2, 2).unwrap(), (8.25, 42.0));
        let avg = BoundQuery::parse(
            "SELECT AVG(N_Complaints) WHERE Product_Name = 'StarGazer Premier Pro'",
            &base,
            &aug,
        )
        .unwrap();
        let iv = interval(&avg, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!((iv.l, iv.u), (Some(8.25), 42.0));
        assert_eq!(avg_bounds(40.0, 80.0, 10, 4, 2, 4).unwrap(), (10.0, 20.0));
        assert!(matches!(avg_bounds(0.0, 0.0, 3, 4, 2, 0), Err(Error::UndefinedAverage)));
    }

    #[test]
    fn avg_upper_can_miss_a_valid_augmentation() {
        // Base-side predicate: only r0 gives positive weights. The true
        // matching sends the 30-valued group to r0 and the 10-valued one to
        // r1, so its average over positive pairs is 30 while d = 2 halves
        // the SUM maximum of 40.
        let base = Relation::new(
            "b",
            vec![Column::new("Name", ColumnKind::Text), Column::new("Price", ColumnKind::Number)],
            vec![
                vec![Value::Text("a".into()), Value::Number(10.0)],
                vec![Value::Text("b".into()), Value::Number(1.0)],
            ],
            &["Name"],
            &["Price"],
            Role::Base,
        )
        .unwrap();
        let aug = Relation::new(
            "s",
            vec![Column::new("Tag", ColumnKind::Text), Column::new("V", ColumnKind::Number)],
            vec![
                vec![Value::Text("x".into()), Value::Number(10.0)],
                vec![Value::Text("y".into()), Value::Number(30.0)],
            ],
            &["Tag"],
            &["V"],
            Role::Augmenting,
        )
        .unwrap();
        let groups = group_augmenting(&aug);
        let e = |base, group| Edge { base, group, score: 1.0 };
        let psi = CandidateSet::new(2, 2, vec![e(0, 0), e(0, 1), e(1, 0), e(1, 1)]).unwrap();
        let q = BoundQuery::parse("SELECT AVG(V) WHERE Price > 5", &base, &aug).unwrap();
        let iv = interval(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential).unwrap();
        assert_eq!((iv.l, iv.u), (Some(0.0), 20.0));
        let truth = Matching::from_pairs(MatchKind::GroundTruth, [(0, 1), (1, 0)]);
        assert_eq!(nominal_result(&q, &base, &aug, &groups, &truth).unwrap(), 30.0);
        assert!(!iv.contains(30.0));
    }

    #[test]
    fn relative_error_examples() {
        assert!((relative_error(33.0, 84.0, 84.0).unwrap() - 51.0 / 84.0).abs() < 1e-12);
        assert_eq!(relative_error(5.0, 5.0, 5.0).unwrap(), 0.0);
        assert!(matches!(relative_error(1.0, 2.0, 0.0), Err(Error::ZeroNominal)));
    }

    #[test]
    fn nominal_results() {
        let (base, aug, groups, psi) = stargazer();
        let q = BoundQuery::parse(INTRO, &base, &aug).unwrap();
        let maximizer = Matching::from_pairs(MatchKind::Nominal, [(0, 0), (0, 1), (1, 2), (2, 3)]);
        assert_eq!(nominal_result(&q, &base, &aug, &groups, &maximizer).unwrap(), 84.0);
        assert_eq!(nominal_result(&q, &base, &aug, &groups, &Matching::new(MatchKind::Nominal)).unwrap(), 0.0);
        // Greedy takes exact-title matches (score 1) first, then StarGazer
        // at 1/2 against Academic beats 1/3 against Premier Pro.
        let greedy = greedy_matching(&psi, 2, false);
        assert_eq!(greedy.pairs.iter().copied().collect::<Vec<_>>(), vec![(0, 0), (1, 1), (1, 2), (2, 3)]);
        assert_eq!(nominal_result(&q, &base, &aug, &groups, &greedy).unwrap(), 33.0);
    }

    #[test]
    fn binding_errors() {
        let (base, aug, ..) = stargazer();
        assert!(matches!(
            BoundQuery::parse("SELECT SUM(Nope) WHERE TRUE", &base, &aug),
            Err(Error::UnknownColumn(c)) if c == "Nope"
        ));
        assert!(matches!(
            BoundQuery::parse("SELECT SUM(Product_Tag) WHERE TRUE", &base, &aug),
            Err(Error::Type(_))
        ));
        assert!(matches!(
            BoundQuery::parse("SELECT COUNT(1) WHERE Price = 'x'", &base, &aug),
            Err(Error::Type(_))
        ));
        assert!(BoundQuery::parse("SELECT SUM(base.Price) WHERE aug.Product_Tag CONTAINS 'stargazer'", &base, &aug).is_ok());
    }

    #[test]
    fn negative_values_are_rejected() {
        let (base, _, _, psi) = stargazer();
        let aug = Relation::new(
            "a",
            vec![Column::new("Product_Tag", ColumnKind::Text), Column::new("N", ColumnKind::Number)],
            vec![
                vec![Value::Text("StarGazer Premier Pro".into()), Value::Number(-1.0)],
                vec![Value::Text("StarGazer".into()), Value::Number(1.0)],
                vec![Value::Text("StarGazer Academic".into()), Value::Number(1.0)],
                vec![Value::Text("Extended Warranty".into()), Value::Number(1.0)],
            ],
            &["Product_Tag"],
            &["N"],
            Role::Augmenting,
        )
        .unwrap();
        let groups = group_augmenting(&aug);
        let q = BoundQuery::parse("SELECT SUM(N) WHERE TRUE", &base, &aug).unwrap();
        assert!(matches!(
            result_interval(&q, &base, &aug, &groups, &psi, 2, Execution::Sequential),
            Err(Error::NegativeValue { .. })
        ));
    }

    #[test]
    fn contains_matches_tokens() {
        let (base, aug, ..) = stargazer();
        let q = BoundQuery::parse("SELECT COUNT(1) WHERE Product_Tag CONTAINS 'ACADEMIC'", &base, &aug).unwrap();
        assert!(q.qualifies(&base, &aug, 0, 2));
        assert!(!q.qualifies(&base, &aug, 0, 1));
    }

    #[test]
    fn caps_resolve() {
        let (.., psi) = stargazer();
        assert_eq!(Cap::Explicit(3).resolve(&psi).unwrap(), 3);
        assert_eq!(Cap::Percentile(0.75).resolve(&psi).unwrap(), 2);
        assert_eq!(Cap::Unconstrained.resolve(&psi).unwrap(), 2);
        assert!(Cap::Explicit(0).resolve(&psi).is_err());
    }
}
