//! Tokenization and the similarity measures used to propose candidate
//! matches.
//!
//! Set measures compare distinct-token sets. IDF weights use the natural
//! logarithm, so weighted-Jaccard thresholds are tied to that base.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Jaccard,
    WeightedJaccard,
    EditDistance,
}

/// `{metric, threshold, base_attr, aug_attr}`. Set metrics accept a pair
/// when `score >= threshold`; edit distance accepts when
/// `distance <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub metric: Metric,
    pub threshold: f64,
    pub base_attr: String,
    pub aug_attr: String,
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        match self.metric {
            Metric::Jaccard | Metric::WeightedJaccard => {
                if !(0.0..=1.0).contains(&self.threshold) {
                    return Err(Error::Config(format!(
                        "similarity threshold {} is outside [0, 1]",
                        self.threshold
                    )));
                }
            }
            Metric::EditDistance => {
                if self.threshold < 0.0 || self.threshold.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "edit-distance threshold {} must be a nonnegative integer",
                        self.threshold
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn passes(&self, score: f64) -> bool {
        match self.metric {
            Metric::Jaccard | Metric::WeightedJaccard => score >= self.threshold,
            Metric::EditDistance => score <= self.threshold,
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// `|a ∩ b| / |a ∪ b|`, with `jaccard(∅, ∅) = 0`.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard over sorted, deduplicated slices.
pub fn jaccard_sorted<T: Ord>(a: &[T], b: &[T]) -> f64 {
    let inter = sorted_intersection_len(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Inverse document frequencies over a corpus of token lists.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfWeights {
    documents: usize,
    document_frequency: HashMap<String, usize>,
}

impl IdfWeights {
    pub fn documents(&self) -> usize {
        self.documents
    }

    /// `ln(D / df(t))`; tokens never seen count as `df = 1`.
    pub fn weight(&self, token: &str) -> f64 {
        let df = self.document_frequency.get(token).copied().unwrap_or(1).max(1);
        (self.documents as f64 / df as f64).ln()
    }
}

pub fn idf_weights<S: AsRef<str>>(corpus: &[Vec<S>]) -> IdfWeights {
    let mut document_frequency: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        let distinct: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
        for token in distinct {
            *document_frequency.entry(token.to_string()).or_default() += 1;
        }
    }
    IdfWeights {
        documents: corpus.len(),
        document_frequency,
    }
}

/// `Σ_{a∩b} w / Σ_{a∪b} w`, zero when the denominator is zero.
pub fn weighted_jaccard<W>(a: &BTreeSet<String>, b: &BTreeSet<String>, weight: W) -> f64
where
    W: Fn(&str) -> f64,
{
    let inter: f64 = a.intersection(b).map(|t| weight(t)).sum();
    let union: f64 = a.union(b).map(|t| weight(t)).sum();
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Weighted Jaccard over sorted, deduplicated token ids with a dense weight
/// table.
pub fn weighted_jaccard_sorted(a: &[u32], b: &[u32], weights: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut inter, mut union) = (0.0, 0.0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            union += weights[a[i] as usize];
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            union += weights[b[j] as usize];
            j += 1;
        } else {
            let w = weights[a[i] as usize];
            inter += w;
            union += w;
            i += 1;
            j += 1;
        }
    }
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Levenshtein distance with unit costs, over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

pub(crate) fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance if it is at most `bound`, computed on a diagonal
/// band of width `2 * bound + 1`.
pub fn edit_distance_within(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > bound {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    let inf = bound + 1;
    // prev[j] holds D(i-1, j) for j in the band around i-1.
    let mut prev: Vec<usize> = (0..=m).map(|j| if j <= bound { j } else { inf }).collect();
    let mut cur = vec![inf; m + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(bound).max(1);
        let hi = (i + bound).min(m);
        cur[0] = if i <= bound { i } else { inf };
        if lo > 1 {
            cur[lo - 1] = inf;
        }
        let mut row_min = cur[0].min(inf);
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = prev[j] + 1;
            let ins = cur[j - 1] + 1;
            let v = sub.min(del).min(ins).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = inf;
        }
        if row_min > bound {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= bound).then_some(d)
}
