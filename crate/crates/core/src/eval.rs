//! Workload runner: bounds every query with every method and scores the
//! intervals against the ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::candidate::{self, CandidateSet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::query::{self, AggregateQuery, BoundQuery, Cap, ResultInterval};
use crate::similarity;
use crate::tables::{EntityGroup, Matching, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Assignment bounds without a binding cap.
    Ga,
    /// Assignment bounds under the percentile cap.
    GaC,
    /// Assignment bounds under the tightest cap that still bounds the truth.
    GaStar,
    MaxSum,
    MaxSumC,
    /// Per-row range propagation with multiplier one.
    Range,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ga,
        Method::GaC,
        Method::GaStar,
        Method::MaxSum,
        Method::MaxSumC,
        Method::Range,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ga => "ga",
            Method::GaC => "ga_c",
            Method::GaStar => "ga_star",
            Method::MaxSum => "max_sum",
            Method::MaxSumC => "max_sum_c",
            Method::Range => "range",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Everything needed to bound and score queries on one dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub base: Relation,
    pub aug: Relation,
    pub groups: Vec<EntityGroup>,
    pub psi: CandidateSet,
    pub truth: Matching,
}

impl Dataset {
    pub fn max_degree(&self) -> usize {
        candidate::match_degrees(&self.psi).into_iter().max().unwrap_or(0)
    }

    /// The aggregate under the ground-truth matching.
    pub fn true_result(&self, q: &BoundQuery) -> Result<f64> {
        query::nominal_result(q, &self.base, &self.aug, &self.groups, &self.truth)
    }

    /// Fraction of joined candidate pairs `(r, s)` satisfying the predicate.
    pub fn selectivity(&self, q: &BoundQuery) -> f64 {
        let (mut hit, mut total) = (0usize, 0usize);
        for e in &self.psi.edges {
            for &s in &self.groups[e.group].row_indices {
                total += 1;
                hit += usize::from(q.qualifies(&self.base, &self.aug, e.base, s));
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Degree percentile used by `ga_c` and `max_sum_c`.
    pub percentile: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { percentile: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub query_id: usize,
    pub query: String,
    pub method: Method,
    /// Cap in effect, if the method uses one.
    pub n: Option<usize>,
    pub l: Option<f64>,
    pub u: Option<f64>,
    pub truth: Option<f64>,
    /// `(u - l) / truth`, undefined when the truth is 0 or `l` is missing.
    pub tightness: Option<f64>,
    pub bounded: bool,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

/// Length of an interval; `None` when the minimum is infeasible.
pub fn length(iv: &ResultInterval) -> Option<f64> {
    iv.length()
}

fn bound_with(
    method: Method,
    q: &BoundQuery,
    data: &Dataset,
    truth: f64,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<(Option<usize>, ResultInterval)> {
    let Dataset { base, aug, groups, psi, .. } = data;
    let percentile_cap = || Cap::Percentile(cfg.percentile).resolve(psi);
    Ok(match method {
        Method::Ga => {
            let n = Cap::Unconstrained.resolve(psi)?;
            (Some(n), query::interval(q, base, aug, groups, psi, n, exec)?)
        }
        Method::GaC => {
            let n = percentile_cap()?;
            (Some(n), query::interval(q, base, aug, groups, psi, n, exec)?)
        }
        Method::GaStar => {
            let (n, iv) = ga_star(q, data, truth, exec)?;
            (Some(n), iv)
        }
        Method::MaxSum => (None, baselines::max_sum_bounds(q, base, aug, groups, psi, exec)?),
        Method::MaxSumC => {
            let n = percentile_cap()?;
            (Some(n), baselines::max_sum_constrained_bounds(q, base, aug, groups, psi, Some(n), exec)?)
        }
        Method::Range => (None, baselines::range_bounds(q, base, aug, groups, psi, exec)?),
    })
}

fn evaluate(
    query_id: usize,
    q: &AggregateQuery,
    method: Method,
    data: &Dataset,
    cfg: &EvalConfig,
    exec: Execution,
) -> EvalRecord {
    let start = Instant::now();
    let mut record = EvalRecord {
        query_id,
        query: q.to_string(),
        method,
        n: None,
        l: None,
        u: None,
        truth: None,
        tightness: None,
        bounded: false,
        wall_time_ms: 0.0,
        error: None,
    };
    let outcome = BoundQuery::bind(q, &data.base, &data.aug).and_then(|bq| {
        let truth = data.true_result(&bq)?;
        record.truth = Some(truth);
        bound_with(method, &bq, data, truth, cfg, exec)
    });
    match outcome {
        Ok((n, iv)) => {
            record.n = n;
            record.l = iv.l;
            record.u = Some(iv.u);
            let truth = record.truth.unwrap_or(f64::NAN);
            record.bounded = iv.contains(truth);
            record.tightness = iv.length().filter(|_| truth != 0.0).map(|len| len / truth);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

/// One record per (query, method), sorted by query id then method.
///
/// Errors are recorded per record rather than aborting the run.
pub fn run_workload(
    data: &Dataset,
    queries: &[AggregateQuery],
    methods: &[Method],
    cfg: &EvalConfig,
    exec: Execution,
) -> Vec<EvalRecord> {
    let jobs: Vec<(usize, Method)> = (0..queries.len())
        .flat_map(|i| methods.iter().map(move |&m| (i, m)))
        .collect();
    // Parallelism goes across records; each record solves sequentially.
    let mut records = exec.map(&jobs, |&(i, m)| evaluate(i, &queries[i], m, data, cfg, Execution::Sequential));
    records.sort_by_key(|r| (r.query_id, r.method));
    records
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub records: usize,
    pub errors: usize,
    pub mean_tightness: Option<f64>,
    pub failure_rate: f64,
}

/// Per-method aggregates over successful records.
pub fn summarize(records: &[EvalRecord]) -> BTreeMap<String, MethodSummary> {
    let mut by_method: BTreeMap<Method, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(m, rs)| {
            let ok: Vec<_> = rs.iter().filter(|r| r.error.is_none()).collect();
            let tight: Vec<f64> = ok.iter().filter_map(|r| r.tightness).collect();
            let failures = ok.iter().filter(|r| !r.bounded).count();
            let summary = MethodSummary {
                records: rs.len(),
                errors: rs.len() - ok.len(),
                mean_tightness: (!tight.is_empty()).then(|| tight.iter().sum::<f64>() / tight.len() as f64),
                failure_rate: if ok.is_empty() { 0.0 } else { failures as f64 / ok.len() as f64 },
            };
            (m.name().to_string(), summary)
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    query_id: usize,
    method: &'a str,
    #[serde(rename = "N")]
    n: Option<usize>,
    l: Option<f64>,
    u: Option<f64>,
    truth: Option<f64>,
    tightness: Option<f64>,
    bounded: bool,
    wall_time_ms: f64,
}

pub fn results_csv(records: &[EvalRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow {
            query_id: r.query_id,
            method: r.method.name(),
            n: r.n,
            l: r.l,
            u: r.u,
            truth: r.truth,
            tightness: r.tightness,
            bounded: r.bounded,
            wall_time_ms: r.wall_time_ms,
        })?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// `SUM(measure) WHERE title CONTAINS 'token'`.
    KeywordSum,
    /// `COUNT(1) WHERE year >= y`.
    YearCount,
}

/// Column names used by [`random_queries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryColumns {
    pub title: String,
    pub year: String,
    pub measure: String,
}

impl Default for QueryColumns {
    fn default() -> Self {
        QueryColumns {
            title: "title".into(),
            year: "year".into(),
            measure: crate::synth::VALUE_COLUMN.into(),
        }
    }
}

/// Random workload over `rel`. Keywords are drawn with probability
/// proportional to their document frequency in the title column; years
/// are drawn from the values present.
pub fn random_queries(
    rel: &Relation,
    count: usize,
    kind: QueryKind,
    columns: &QueryColumns,
    seed: u64,
) -> Result<Vec<AggregateQuery>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts = |q: String| query::parse_query(&q);
    match kind {
        QueryKind::KeywordSum => {
            let col = rel.require_column(&columns.title)?;
            let mut df: BTreeMap<String, usize> = BTreeMap::new();
            for r in 0..rel.len() {
                let mut tokens = similarity::tokenize(rel.value(r, col).as_text().unwrap_or(""));
                tokens.sort();
                tokens.dedup();
                for t in tokens {
                    *df.entry(t).or_default() += 1;
                }
            }
            if df.is_empty() {
                return Err(Error::Config(format!("column `{}` has no tokens", columns.title)));
            }
            let (tokens, weights): (Vec<String>, Vec<usize>) = df.into_iter().unzip();
            let pick = WeightedIndex::new(&weights).expect("document frequencies are positive");
            (0..count)
                .map(|_| {
                    let t = &tokens[pick.sample(&mut rng)];
                    texts(format!(
                        "SELECT SUM({}) WHERE {} CONTAINS '{}'",
                        columns.measure,
                        columns.title,
                        t.replace('\'', "''")
                    ))
                })
                .collect()
        }
        QueryKind::YearCount => {
            let col = rel.require_column(&columns.year)?;
            let mut years: Vec<f64> = (0..rel.len()).filter_map(|r| rel.value(r, col).as_number()).collect();
            years.sort_by(f64::total_cmp);
            years.dedup();
            if years.is_empty() {
                return Err(Error::Config(format!("column `{}` has no numbers", columns.year)));
            }
            (0..count)
                .map(|_| {
                    let y = years[rng.gen_range(0..years.len())];
                    texts(format!("SELECT COUNT(1) WHERE {} >= {y}", columns.year))
                })
                .collect()
        }
    }
}

/// One point of a cap sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub l: Option<f64>,
    pub u: f64,
    pub length: Option<f64>,
    pub bounded: bool,
}

/// Bounds `q` at every cap in `caps` (in the given order).
pub fn sweep_constraint(
    q: &BoundQuery,
    data: &Dataset,
    caps: impl IntoIterator<Item = usize>,
    truth: f64,
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    let weight_query = if q.agg() == query::Aggregate::Avg { None } else { Some(q) };
    let mut out = Vec::new();
    let mut problem = None;
    for n in caps {
        let iv = match weight_query {
            Some(q) => {
                // Weights do not depend on the cap; build them once.
                let p = match problem.take() {
                    None => query::weighted_problem(q, &data.base, &data.aug, &data.groups, &data.psi, n, exec)?.0,
                    Some(p) => crate::assignment::AssignmentProblem::with_cap(&p, n)?,
                };
                let iv = query::interval_of(&p, exec);
                problem = Some(p);
                iv
            }
            None => query::interval(q, &data.base, &data.aug, &data.groups, &data.psi, n, exec)?,
        };
        out.push(SweepPoint {
            n,
            l: iv.l,
            u: iv.u,
            length: iv.length(),
            bounded: iv.contains(truth),
        });
    }
    Ok(out)
}

pub fn sweep_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p)?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

/// Sweeps `N` from 1 to the largest candidate degree and returns the cap
/// with the shortest interval that contains `truth` (smallest `N` on ties).
pub fn ga_star(q: &BoundQuery, data: &Dataset, truth: f64, exec: Execution) -> Result<(usize, ResultInterval)> {
    let top = data.max_degree().max(1);
    let mut best: Option<(usize, ResultInterval)> = None;
    for n in 1..=top {
        let iv = query::interval(q, &data.base, &data.aug, &data.groups, &data.psi, n, exec)?;
        if !iv.contains(truth) {
            continue;
        }
        let shorter = match &best {
            None => true,
            Some((_, b)) => iv.length() < b.length(),
        };
        if shorter {
            best = Some((n, iv));
        }
    }
    best.ok_or(Error::NoBoundingCap)
}

/// Spearman rank correlation, with average ranks for ties. `None` when
/// either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}
