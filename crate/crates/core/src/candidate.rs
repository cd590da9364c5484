//! Candidate set construction and statistics.
//!
//! An edge `(r, g)` exists when any row of group `g` passes the similarity
//! test against base row `r` (and, with blocking, shares its block key).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::similarity::{self, Metric, SimilarityConfig};
use crate::tables::{EntityGroup, IdTuple, Relation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub base: usize,
    pub group: usize,
    /// Best similarity over the group's rows (smallest distance for edit
    /// distance).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub base_count: usize,
    pub group_count: usize,
    /// Sorted by `(base, group)`, no duplicates.
    pub edges: Vec<Edge>,
}

impl CandidateSet {
    pub fn new(base_count: usize, group_count: usize, mut edges: Vec<Edge>) -> Result<Self> {
        edges.sort_by_key(|e| (e.base, e.group));
        for e in &edges {
            if e.base >= base_count || e.group >= group_count {
                return Err(Error::Config(format!(
                    "edge ({}, {}) outside {base_count}x{group_count}",
                    e.base, e.group
                )));
            }
        }
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].base, w[0].group) == (w[1].base, w[1].group))
        {
            return Err(Error::Config(format!(
                "duplicate candidate edge ({}, {})",
                w[0].base, w[0].group
            )));
        }
        Ok(CandidateSet {
            base_count,
            group_count,
            edges,
        })
    }

    pub fn empty(base_count: usize, group_count: usize) -> Self {
        CandidateSet {
            base_count,
            group_count,
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, base: usize, group: usize) -> bool {
        self.edges
            .binary_search_by_key(&(base, group), |e| (e.base, e.group))
            .is_ok()
    }

    /// Edges incident to each base row.
    pub fn by_base(&self) -> Vec<&[Edge]> {
        let mut out = Vec::with_capacity(self.base_count);
        let mut start = 0;
        for r in 0..self.base_count {
            let end = start + self.edges[start..].partition_point(|e| e.base == r);
            out.push(&self.edges[start..end]);
            start = end;
        }
        out
    }

    /// Groups with at least one edge.
    pub fn coverable_groups(&self) -> Vec<bool> {
        let mut covered = vec![false; self.group_count];
        for e in &self.edges {
            covered[e.group] = true;
        }
        covered
    }
}

/// Restricts candidate pairs to rows sharing a key value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockingConfig {
    #[serde(default)]
    pub base_key: String,
    #[serde(default)]
    pub aug_key: String,
    #[serde(default)]
    pub enabled: bool,
}

impl BlockingConfig {
    pub fn disabled() -> Self {
        BlockingConfig::default()
    }

    pub fn on(base_key: impl Into<String>, aug_key: impl Into<String>) -> Self {
        BlockingConfig {
            base_key: base_key.into(),
            aug_key: aug_key.into(),
            enabled: true,
        }
    }
}

enum Prepared {
    Sets {
        base: Vec<Vec<u32>>,
        aug: Vec<Vec<u32>>,
        weights: Option<Vec<f64>>,
        postings: Vec<Vec<u32>>,
    },
    Chars {
        base: Vec<Vec<char>>,
        aug: Vec<Vec<char>>,
    },
}

fn intern_tokens(texts: &[String], vocab: &mut HashMap<String, u32>) -> Vec<Vec<u32>> {
    texts
        .iter()
        .map(|t| {
            let mut ids: Vec<u32> = similarity::tokenize(t)
                .into_iter()
                .map(|tok| {
                    let next = vocab.len() as u32;
                    *vocab.entry(tok).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

fn column_texts(relation: &Relation, col: usize) -> Vec<String> {
    (0..relation.len()).map(|r| relation.value(r, col).to_string()).collect()
}

/// Builds the candidate set between `base` rows and the entity `groups` of
/// `aug`.
pub fn build_candidate_set(
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    sim: &SimilarityConfig,
    blocking: &BlockingConfig,
    exec: Execution,
) -> Result<CandidateSet> {
    sim.validate()?;
    let base_col = base.require_column(&sim.base_attr)?;
    let aug_col = aug.require_column(&sim.aug_attr)?;
    let base_texts = column_texts(base, base_col);
    let aug_texts = column_texts(aug, aug_col);

    let mut group_of = vec![0usize; aug.len()];
    for g in groups {
        for &s in &g.row_indices {
            group_of[s] = g.group_id;
        }
    }

    let (base_blocks, aug_blocks) = if blocking.enabled {
        let bk = base.require_column(&blocking.base_key)?;
        let ak = aug.require_column(&blocking.aug_key)?;
        let keys = |rel: &Relation, col: usize| -> Vec<String> {
            (0..rel.len())
                .map(|r| rel.value(r, col).to_string().trim().to_string())
                .collect()
        };
        (Some(keys(base, bk)), Some(keys(aug, ak)))
    } else {
        (None, None)
    };
    let block_rows: Option<HashMap<&str, Vec<usize>>> = aug_blocks.as_ref().map(|keys| {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (s, k) in keys.iter().enumerate() {
            map.entry(k.as_str()).or_default().push(s);
        }
        map
    });

    let prepared = match sim.metric {
        Metric::Jaccard | Metric::WeightedJaccard => {
            let mut vocab = HashMap::new();
            let base_ids = intern_tokens(&base_texts, &mut vocab);
            let aug_ids = intern_tokens(&aug_texts, &mut vocab);
            let weights = (sim.metric == Metric::WeightedJaccard).then(|| {
                let docs = base_texts.len() + aug_texts.len();
                let mut df = vec![0usize; vocab.len()];
                for doc in base_ids.iter().chain(aug_ids.iter()) {
                    for &t in doc {
                        df[t as usize] += 1;
                    }
                }
                df.iter()
                    .map(|&d| (docs as f64 / d.max(1) as f64).ln())
                    .collect()
            });
            let mut postings = vec![Vec::new(); vocab.len()];
            for (s, doc) in aug_ids.iter().enumerate() {
                for &t in doc {
                    postings[t as usize].push(s as u32);
                }
            }
            Prepared::Sets {
                base: base_ids,
                aug: aug_ids,
                weights,
                postings,
            }
        }
        Metric::EditDistance => Prepared::Chars {
            base: base_texts.iter().map(|t| t.chars().collect()).collect(),
            aug: aug_texts.iter().map(|t| t.chars().collect()).collect(),
        },
    };

    let all_rows: Vec<usize> = (0..aug.len()).collect();
    let per_base = exec.map_range(base.len(), |r| {
        let rows: &[usize] = match (&block_rows, &base_blocks) {
            (Some(map), Some(keys)) => map.get(keys[r].as_str()).map(Vec::as_slice).unwrap_or(&[]),
            _ => &all_rows,
        };
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        let mut offer = |s: usize, score: f64| {
            let g = group_of[s];
            let better = match sim.metric {
                Metric::EditDistance => |new: f64, old: f64| new < old,
                _ => |new: f64, old: f64| new > old,
            };
            best.entry(g)
                .and_modify(|old| {
                    if better(score, *old) {
                        *old = score;
                    }
                })
                .or_insert(score);
        };
        match &prepared {
            Prepared::Sets {
                base: bt,
                aug: at,
                weights,
                postings,
            } => {
                let score_of = |s: usize| match weights {
                    Some(w) => similarity::weighted_jaccard_sorted(&bt[r], &at[s], w),
                    None => similarity::jaccard_sorted(&bt[r], &at[s]),
                };
                if sim.threshold > 0.0 {
                    // A positive score needs a shared token.
                    let in_block = |s: usize| match (&base_blocks, &aug_blocks) {
                        (Some(bk), Some(ak)) => bk[r] == ak[s],
                        _ => true,
                    };
                    let mut seen: Vec<u32> = bt[r]
                        .iter()
                        .flat_map(|&t| postings[t as usize].iter().copied())
                        .collect();
                    seen.sort_unstable();
                    seen.dedup();
                    for s in seen {
                        let s = s as usize;
                        if in_block(s) {
                            let score = score_of(s);
                            if sim.passes(score) {
                                offer(s, score);
                            }
                        }
                    }
                } else {
                    for &s in rows {
                        let score = score_of(s);
                        if sim.passes(score) {
                            offer(s, score);
                        }
                    }
                }
            }
            Prepared::Chars { base: bc, aug: ac } => {
                let bound = sim.threshold as usize;
                for &s in rows {
                    if let Some(d) = similarity::edit_distance_within(&bc[r], &ac[s], bound) {
                        offer(s, d as f64);
                    }
                }
            }
        }
        best.into_iter()
            .map(|(group, score)| Edge {
                base: r,
                group,
                score,
            })
            .collect::<Vec<_>>()
    });
    let edges = per_base.into_iter().flatten().collect();
    CandidateSet::new(base.len(), groups.len(), edges)
}

/// Tries each threshold in `thresholds` and returns the one whose candidate
/// set size is closest to `target_edges` (first wins on ties).
#[allow(clippy::too_many_arguments)]
pub fn tune_threshold(
    base: &Relation,
    aug: &Relation,
    groups: &[EntityGroup],
    sim: &SimilarityConfig,
    blocking: &BlockingConfig,
    thresholds: &[f64],
    target_edges: usize,
    exec: Execution,
) -> Result<(f64, CandidateSet)> {
    let mut best: Option<(f64, CandidateSet)> = None;
    for &t in thresholds {
        let cfg = SimilarityConfig {
            threshold: t,
            ..sim.clone()
        };
        let psi = build_candidate_set(base, aug, groups, &cfg, blocking, exec)?;
        let closer = match &best {
            None => true,
            Some((_, b)) => psi.len().abs_diff(target_edges) < b.len().abs_diff(target_edges),
        };
        if closer {
            best = Some((t, psi));
        }
    }
    best.ok_or_else(|| Error::Config("no thresholds to try".into()))
}

/// Number of candidate edges per base row.
pub fn match_degrees(psi: &CandidateSet) -> Vec<usize> {
    let mut deg = vec![0; psi.base_count];
    for e in &psi.edges {
        deg[e.base] += 1;
    }
    deg
}

fn nonzero_sorted_degrees(psi: &CandidateSet) -> Result<Vec<usize>> {
    let mut deg: Vec<usize> = match_degrees(psi).into_iter().filter(|&d| d > 0).collect();
    if deg.is_empty() {
        return Err(Error::NoEdges);
    }
    deg.sort_unstable();
    Ok(deg)
}

/// Max degree divided by the median degree, over base rows with at least
/// one candidate.
pub fn skew(psi: &CandidateSet) -> Result<f64> {
    let deg = nonzero_sorted_degrees(psi)?;
    let n = deg.len();
    let median = if n % 2 == 1 {
        deg[n / 2] as f64
    } else {
        (deg[n / 2 - 1] + deg[n / 2]) as f64 / 2.0
    };
    Ok(deg[n - 1] as f64 / median)
}

/// Nearest-rank `p`-quantile of the nonzero degrees, at least 1.
pub fn percentile_cap(psi: &CandidateSet, p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("percentile {p} must lie in (0, 1]")));
    }
    let deg = nonzero_sorted_degrees(psi)?;
    let rank = ((p * deg.len() as f64).ceil() as usize).clamp(1, deg.len());
    Ok(deg[rank - 1].max(1))
}

/// CSV with columns `r_id_tuple,g_id_tuple,score`.
pub fn candidates_to_csv(psi: &CandidateSet, base: &Relation, groups: &[EntityGroup]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["r_id_tuple", "g_id_tuple", "score"])?;
    for e in &psi.edges {
        writer.write_record([
            base.id_tuple(e.base).encode(),
            groups[e.group].id_tuple.encode(),
            e.score.to_string(),
        ])?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_candidates(
    psi: &CandidateSet,
    base: &Relation,
    groups: &[EntityGroup],
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = candidates_to_csv(psi, base, groups)?;
    crate::cli::write_atomic(path.as_ref(), &bytes)
}

/// Reads an externally produced candidate set. A missing score reads as 1.
pub fn load_candidates(
    path: impl AsRef<Path>,
    base: &Relation,
    groups: &[EntityGroup],
) -> Result<CandidateSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_candidates(file, base, groups)
}

pub fn read_candidates(
    input: impl std::io::Read,
    base: &Relation,
    groups: &[EntityGroup],
) -> Result<CandidateSet> {
    let base_index = base.id_index();
    let group_index: HashMap<&IdTuple, usize> =
        groups.iter().map(|g| (&g.id_tuple, g.group_id)).collect();
    let mut reader = csv::Reader::from_reader(input);
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let r_id = IdTuple::decode(record.get(0).unwrap_or_default());
        let g_id = IdTuple::decode(record.get(1).unwrap_or_default());
        let r = *base_index.get(&r_id).ok_or_else(|| Error::UnknownId(r_id.encode()))?;
        let g = *group_index.get(&g_id).ok_or_else(|| Error::UnknownId(g_id.encode()))?;
        let score = match record.get(2).map(str::trim) {
            None | Some("") => 1.0,
            Some(s) => s.parse::<f64>().map_err(|_| Error::BadNumber {
                row: best.len(),
                column: "score".into(),
                value: s.to_string(),
            })?,
        };
        best.entry((r, g)).or_insert(score);
    }
    let edges = best
        .into_iter()
        .map(|((base, group), score)| Edge { base, group, score })
        .collect();
    CandidateSet::new(base_index.len(), groups.len(), edges)
}
