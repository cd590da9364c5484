//! Synthetic augmenting tables with a known ground-truth matching.
//!
//! Each base row is copied `k` times with a typo-perturbed identifier and a
//! random measurement. Every copy gets a distinct identifier, so each copy
//! is its own entity group and group `g` is augmenting row `g`.

use std::collections::HashSet;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{self, CandidateSet, Edge};
use crate::error::{Error, Result};
use crate::similarity;
use crate::tables::{Column, ColumnKind, MatchKind, Matching, Relation, Role, Value};

pub const ID_COLUMN: &str = "name";
pub const VALUE_COLUMN: &str = "value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exactly `n_max` copies per base row.
    Balanced,
    /// `k ~ Uniform{1..n_max}` copies per base row.
    Skewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_max: usize,
    pub mode: Mode,
    /// Inclusive range of Levenshtein distances, within `[1, 3]`.
    pub typo_distance: (usize, usize),
    /// Inclusive range of generated measurement values.
    pub value_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_max: 3,
            mode: Mode::Balanced,
            typo_distance: (1, 3),
            value_range: (1.0, 100.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        let (lo, hi) = self.typo_distance;
        if lo < 1 || hi > 3 || lo > hi {
            return Err(Error::Config(format!("typo_distance ({lo}, {hi}) must lie within [1, 3]")));
        }
        let (a, b) = self.value_range;
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(Error::Config(format!("value_range ({a}, {b}) must be finite, nonnegative and ordered")));
        }
        Ok(())
    }
}

/// Ground truth of a generated pair of relations.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub matching: Matching,
    /// Sum of generated values per base row.
    pub contributions: Vec<f64>,
    /// Levenshtein distance of each augmenting identifier from its source.
    pub distances: Vec<usize>,
}

impl TruthRecord {
    /// Number of true matches per base row.
    pub fn degrees(&self, base_count: usize) -> Vec<usize> {
        let mut deg = vec![0; base_count];
        for &(r, _) in &self.matching.pairs {
            deg[r] += 1;
        }
        deg
    }

    /// The true matching as a candidate set with unit scores.
    pub fn candidate_set(&self, base_count: usize, group_count: usize) -> CandidateSet {
        let edges = self
            .matching
            .pairs
            .iter()
            .map(|&(base, group)| Edge { base, group, score: 1.0 })
            .collect();
        CandidateSet::new(base_count, group_count, edges).expect("truth pairs are in range and distinct")
    }
}

const WORDS: &[&str] = &[
    "acoustic", "adapter", "amber", "analog", "atlas", "audio", "basic", "beacon", "black", "blue", "bolt",
    "cable", "camera", "carbon", "case", "classic", "clear", "compact", "cordless", "crystal", "deluxe",
    "digital", "dock", "dual", "echo", "edge", "elite", "express", "flash", "focus", "fusion", "galaxy",
    "glass", "gold", "graphite", "green", "home", "hybrid", "ion", "jet", "lamp", "laser", "lens", "light",
    "lite", "mini", "mobile", "modem", "monitor", "mouse", "nano", "neo", "nova", "office", "omega",
    "optic", "orbit", "pad", "phone", "pixel", "plus", "portable", "power", "premier", "prime", "pro",
    "pulse", "quartz", "radio", "red", "remote", "router", "silver", "slim", "smart", "solar", "sonic",
    "speaker", "sport", "star", "stereo", "studio", "summit", "switch", "tablet", "titan", "touch",
    "travel", "turbo", "ultra", "vector", "vision", "wave", "white", "wireless", "zoom",
];

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn random_code(rng: &mut impl Rng, len: usize) -> String {
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect()
}

/// Shape of generated base titles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub rows: usize,
    /// Inclusive range of vocabulary words per title.
    pub words: (usize, usize),
    /// Length of the random code appended to each title; 0 for none.
    pub code_len: usize,
}

impl BaseConfig {
    /// Two or three words and a six-character code: distinct titles are
    /// far apart in edit distance.
    pub fn distinct(rows: usize) -> Self {
        BaseConfig { rows, words: (2, 3), code_len: 6 }
    }

    /// One or two words and a two-character code: many titles lie within a
    /// few edits of each other.
    pub fn confusable(rows: usize) -> Self {
        BaseConfig { rows, words: (1, 2), code_len: 2 }
    }
}

/// A base relation `title, year, price` with [`BaseConfig::distinct`] titles.
pub fn generate_base(rows: usize, seed: u64) -> Relation {
    generate_base_with(&BaseConfig::distinct(rows), seed)
}

/// A base relation `title, year, price` with `cfg.rows` distinct titles.
pub fn generate_base_with(cfg: &BaseConfig, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut data = Vec::with_capacity(cfg.rows);
    let (lo, hi) = (cfg.words.0.max(1), cfg.words.1.max(cfg.words.0.max(1)));
    while data.len() < cfg.rows {
        let words = rng.gen_range(lo..=hi);
        let mut title: Vec<String> = (0..words).map(|_| WORDS.choose(&mut rng).unwrap().to_string()).collect();
        if cfg.code_len > 0 {
            title.push(random_code(&mut rng, cfg.code_len));
        }
        let title = title.join(" ");
        if !seen.insert(title.clone()) {
            continue;
        }
        let year = rng.gen_range(1995..=2024) as f64;
        let price = (rng.gen_range(100..=50_000) as f64) / 100.0;
        data.push(vec![Value::Text(title), Value::Number(year), Value::Number(price)]);
    }
    Relation::new(
        "base",
        vec![
            Column::new("title", ColumnKind::Text),
            Column::new("year", ColumnKind::Number),
            Column::new("price", ColumnKind::Number),
        ],
        data,
        &["title"],
        &["price"],
        Role::Base,
    )
    .expect("generated base relation is well formed")
}

fn apply_random_edit(chars: &mut Vec<char>, rng: &mut impl Rng, inserts_only: bool) {
    let letter = ALPHABET[rng.gen_range(0..ALPHABET.len())] as char;
    let op = if inserts_only || chars.is_empty() { 1 } else { rng.gen_range(0..3) };
    match op {
        0 => {
            let i = rng.gen_range(0..chars.len());
            chars[i] = letter;
        }
        1 => {
            let i = rng.gen_range(0..=chars.len());
            chars.insert(i, letter);
        }
        _ => {
            let i = rng.gen_range(0..chars.len());
            chars.remove(i);
        }
    }
}

/// Applies random substitutions, insertions and deletions until the result
/// is exactly `distance` edits from `original` and not in `taken`.
pub fn inject_typos(original: &str, distance: usize, taken: &HashSet<String>, rng: &mut impl Rng) -> String {
    let source: Vec<char> = original.chars().collect();
    let mut attempt = 0usize;
    loop {
        // Short identifiers make deletions and substitutions collapse too
        // often; fall back to pure insertions after a few rejections.
        let inserts_only = source.len() <= distance || attempt >= 64;
        let mut chars = source.clone();
        for _ in 0..distance {
            apply_random_edit(&mut chars, rng, inserts_only);
        }
        let candidate: String = chars.iter().collect();
        // Leading or trailing spaces would be trimmed away on reload.
        let stable = candidate.trim() == candidate && !candidate.is_empty();
        if stable && similarity::levenshtein(&source, &chars) == distance && !taken.contains(&candidate) {
            return candidate;
        }
        attempt += 1;
    }
}

/// Generates the augmenting relation `name, value` and its ground truth.
pub fn generate(base: &Relation, cfg: &SynthConfig) -> Result<(Relation, TruthRecord)> {
    cfg.validate()?;
    let id_col = match base.id_attrs.as_slice() {
        [c] if base.columns[*c].kind == ColumnKind::Text => *c,
        _ => return Err(Error::Schema("generation needs a single text identifier on the base".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let values = Uniform::new_inclusive(cfg.value_range.0, cfg.value_range.1);
    let mut taken: HashSet<String> = (0..base.len())
        .filter_map(|r| base.value(r, id_col).as_text().map(str::to_string))
        .collect();
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut contributions = Vec::with_capacity(base.len());
    let mut distances = Vec::new();
    for r in 0..base.len() {
        let original = base.value(r, id_col).as_text().unwrap_or_default().trim().to_string();
        let k = match cfg.mode {
            Mode::Balanced => cfg.n_max,
            Mode::Skewed => rng.gen_range(1..=cfg.n_max),
        };
        let mut total = 0.0;
        for _ in 0..k {
            let d = rng.gen_range(cfg.typo_distance.0..=cfg.typo_distance.1);
            let name = inject_typos(&original, d, &taken, &mut rng);
            taken.insert(name.clone());
            // Two decimals keep the CSV round trip exact.
            let value = (values.sample(&mut rng) * 100.0).round() / 100.0;
            pairs.push((r, rows.len()));
            total += value;
            distances.push(d);
            rows.push(vec![Value::Text(name), Value::Number(value)]);
        }
        contributions.push(total);
    }
    let aug = Relation::new(
        "augmenting",
        vec![Column::new(ID_COLUMN, ColumnKind::Text), Column::new(VALUE_COLUMN, ColumnKind::Number)],
        rows,
        &[ID_COLUMN],
        &[VALUE_COLUMN],
        Role::Augmenting,
    )?;
    let truth = TruthRecord {
        matching: Matching::from_pairs(MatchKind::GroundTruth, pairs),
        contributions,
        distances,
    };
    Ok((aug, truth))
}

/// Where false-positive edges attach on the base side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FalsePositives {
    #[default]
    Uniform,
    /// All false positives go to the first `hubs` base rows of a seeded
    /// permutation.
    Hub { hubs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Corruption {
    /// False positives to add, as a fraction of the current edge count.
    pub add_fp: f64,
    /// Fraction of ground-truth edges to remove.
    pub drop_fn: f64,
    #[serde(default)]
    pub placement: FalsePositives,
}

/// Adds false positives and removes true edges.
///
/// With a fixed seed the corruption is nested: the edges added at a lower
/// `add_fp` are a subset of those added at a higher one, and likewise for
/// the edges dropped.
pub fn corrupt_candidates(psi: &CandidateSet, truth: &Matching, c: &Corruption, seed: u64) -> Result<CandidateSet> {
    for (name, x) in [("add_fp", c.add_fp), ("drop_fn", c.drop_fn)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {x}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut true_edges: Vec<(usize, usize)> =
        truth.pairs.iter().copied().filter(|&(r, g)| psi.contains(r, g)).collect();
    true_edges.shuffle(&mut rng);
    let drop = (c.drop_fn * true_edges.len() as f64).round() as usize;
    let dropped: HashSet<(usize, usize)> = true_edges[..drop].iter().copied().collect();

    let hub_rows: Vec<usize> = match c.placement {
        FalsePositives::Uniform => (0..psi.base_count).collect(),
        FalsePositives::Hub { hubs } => {
            let mut rows: Vec<usize> = (0..psi.base_count).collect();
            rows.shuffle(&mut rng);
            rows.truncate(hubs.max(1));
            rows
        }
    };
    let wanted = (c.add_fp * psi.len() as f64).round() as usize;
    let available = (hub_rows.len() * psi.group_count).saturating_sub(
        psi.edges.iter().filter(|e| hub_rows.contains(&e.base)).count(),
    );
    let wanted = wanted.min(available);

    let mut edges: Vec<Edge> = psi
        .edges
        .iter()
        .filter(|e| !dropped.contains(&(e.base, e.group)))
        .cloned()
        .collect();
    let mut added: HashSet<(usize, usize)> = HashSet::new();
    if wanted > 0 {
        let pick_row = Uniform::new(0, hub_rows.len());
        let pick_group = Uniform::new(0, psi.group_count);
        while added.len() < wanted {
            let pair = (hub_rows[pick_row.sample(&mut rng)], pick_group.sample(&mut rng));
            if !psi.contains(pair.0, pair.1) && added.insert(pair) {
                edges.push(Edge {
                    base: pair.0,
                    group: pair.1,
                    score: 0.0,
                });
            }
        }
    }
    CandidateSet::new(psi.base_count, psi.group_count, edges)
}

/// Adds false-positive edges to one hub row until the degree skew of `psi`
/// reaches `target` (or the hub is connected to every group).
pub fn inject_skew(psi: &CandidateSet, target: f64, seed: u64) -> Result<CandidateSet> {
    if psi.is_empty() || psi.base_count == 0 {
        return Err(Error::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hub = rng.gen_range(0..psi.base_count);
    let mut free: Vec<usize> = (0..psi.group_count).filter(|&g| !psi.contains(hub, g)).collect();
    free.shuffle(&mut rng);
    let mut edges = psi.edges.clone();
    let mut current = psi.clone();
    let mut next = free.into_iter();
    while candidate::skew(&current)? < target {
        let Some(group) = next.next() else { break };
        edges.push(Edge { base: hub, group, score: 0.0 });
        current = CandidateSet::new(psi.base_count, psi.group_count, edges.clone())?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::{build_candidate_set, BlockingConfig};
    use crate::exec::Execution;
    use crate::similarity::{Metric, SimilarityConfig};
    use crate::tables::{group_augmenting, relation_to_csv, validate_augmentation};

    #[test]
    fn balanced_generation_has_exact_degrees() {
        let base = generate_base(10, 1);
        let cfg = SynthConfig { n_max: 3, ..Default::default() };
        let (aug, truth) = generate(&base, &cfg).unwrap();
        assert_eq!(aug.len(), 30);
        assert_eq!(truth.degrees(10), vec![3; 10]);
        assert_eq!(group_augmenting(&aug).len(), 30);
    }

    #[test]
    fn skewed_degrees_stay_in_range() {
        let base = generate_base(50, 2);
        let cfg = SynthConfig { n_max: 4, mode: Mode::Skewed, ..Default::default() };
        let (_, truth) = generate(&base, &cfg).unwrap();
        let deg = truth.degrees(50);
        assert!(deg.iter().all(|&d| (1..=4).contains(&d)));
        assert!(deg.iter().any(|&d| d != deg[0]));
    }

    #[test]
    fn typos_are_at_the_drawn_distance() {
        let base = generate_base(40, 3);
        let one = SynthConfig { n_max: 1, typo_distance: (1, 1), ..Default::default() };
        let (aug, truth) = generate(&base, &one).unwrap();
        for &(r, g) in &truth.matching.pairs {
            let a = base.value(r, 0).as_text().unwrap();
            let b = aug.value(g, 0).as_text().unwrap();
            assert_eq!(similarity::edit_distance(a, b), 1);
        }
        let (aug, truth) = generate(&base, &SynthConfig::default()).unwrap();
        for &(r, g) in &truth.matching.pairs {
            let d = similarity::edit_distance(base.value(r, 0).as_text().unwrap(), aug.value(g, 0).as_text().unwrap());
            assert_eq!(d, truth.distances[g]);
            assert!((1..=3).contains(&d));
        }
    }

    #[test]
    fn short_ids_still_reach_the_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let taken = HashSet::new();
        for d in 1..=3 {
            let t = inject_typos("a", d, &taken, &mut rng);
            assert_eq!(similarity::edit_distance("a", &t), d);
        }
    }

    #[test]
    fn confusable_titles_collide_under_edit_distance() {
        let base = generate_base_with(&BaseConfig::confusable(40), 6);
        let (aug, truth) = generate(&base, &SynthConfig { seed: 6, ..Default::default() }).unwrap();
        let groups = group_augmenting(&aug);
        let sim = SimilarityConfig {
            metric: Metric::EditDistance,
            threshold: 3.0,
            base_attr: "title".into(),
            aug_attr: ID_COLUMN.into(),
        };
        let psi = build_candidate_set(&base, &aug, &groups, &sim, &BlockingConfig::disabled(), Execution::Sequential)
            .unwrap();
        assert!(validate_augmentation(&truth.matching, groups.len(), &psi).is_valid());
        assert!(psi.len() > truth.matching.pairs.len());
    }

    #[test]
    fn empty_base_gives_empty_table() {
        let base = generate_base(0, 1);
        let (aug, truth) = generate(&base, &SynthConfig::default()).unwrap();
        assert!(aug.is_empty() && truth.matching.pairs.is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let base = generate_base(20, 5);
        let cfg = SynthConfig { seed: 11, mode: Mode::Skewed, ..Default::default() };
        let a = relation_to_csv(&generate(&base, &cfg).unwrap().0).unwrap();
        let b = relation_to_csv(&generate(&base, &cfg).unwrap().0).unwrap();
        assert_eq!(a, b);
        assert_eq!(relation_to_csv(&generate_base(20, 5)).unwrap(), relation_to_csv(&base).unwrap());
    }

    #[test]
    fn invalid_configs() {
        assert!(SynthConfig { n_max: 0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { typo_distance: (0, 2), ..Default::default() }.validate().is_err());
        assert!(SynthConfig { typo_distance: (2, 4), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn truth_is_valid_within_permissive_candidates() {
        let base = generate_base(30, 7);
        let (aug, truth) = generate(&base, &SynthConfig { seed: 7, ..Default::default() }).unwrap();
        let groups = group_augmenting(&aug);
        let sim = SimilarityConfig {
            metric: Metric::EditDistance,
            threshold: 3.0,
            base_attr: "title".into(),
            aug_attr: ID_COLUMN.into(),
        };
        let psi = build_candidate_set(&base, &aug, &groups, &sim, &BlockingConfig::disabled(), Execution::Sequential)
            .unwrap();
        assert!(validate_augmentation(&truth.matching, groups.len(), &psi).is_valid());
    }

    fn sample() -> (CandidateSet, Matching) {
        let base = generate_base(25, 4);
        let (aug, truth) = generate(&base, &SynthConfig { n_max: 4, seed: 4, ..Default::default() }).unwrap();
        (truth.candidate_set(base.len(), aug.len()), truth.matching)
    }

    #[test]
    fn corruption_counts() {
        let (psi, truth) = sample();
        assert_eq!(psi.len(), 100);
        let same = corrupt_candidates(&psi, &truth, &Corruption::default(), 1).unwrap();
        assert_eq!(same, psi);
        let fp = corrupt_candidates(&psi, &truth, &Corruption { add_fp: 0.5, ..Default::default() }, 1).unwrap();
        assert_eq!(fp.len(), 150);
        let gone = corrupt_candidates(&psi, &truth, &Corruption { drop_fn: 1.0, ..Default::default() }, 1).unwrap();
        assert!(gone.is_empty());
        assert!(corrupt_candidates(&psi, &truth, &Corruption { add_fp: 1.5, ..Default::default() }, 1).is_err());
    }

    #[test]
    fn corruption_is_nested_in_the_rate() {
        let (psi, truth) = sample();
        let at = |add_fp, drop_fn| {
            corrupt_candidates(&psi, &truth, &Corruption { add_fp, drop_fn, ..Default::default() }, 3).unwrap()
        };
        let (low, high) = (at(0.2, 0.0), at(0.6, 0.0));
        assert!(low.edges.iter().all(|e| high.contains(e.base, e.group)));
        let (few, many) = (at(0.0, 0.2), at(0.0, 0.6));
        assert!(many.edges.iter().all(|e| few.contains(e.base, e.group)));
    }

    #[test]
    fn hub_placement_raises_skew() {
        let (psi, truth) = sample();
        let hub = Corruption { add_fp: 0.5, drop_fn: 0.0, placement: FalsePositives::Hub { hubs: 1 } };
        let c = corrupt_candidates(&psi, &truth, &hub, 2).unwrap();
        assert_eq!(candidate::skew(&c).unwrap(), (4.0 + 50.0) / 4.0);
    }

    #[test]
    fn skew_injection_hits_target() {
        let (psi, _) = sample();
        assert_eq!(candidate::skew(&psi).unwrap(), 1.0);
        for target in [1.0, 5.0, 20.0] {
            let s = candidate::skew(&inject_skew(&psi, target, 8).unwrap()).unwrap();
            assert!(s >= target && s < target + 0.26, "target {target}, got {s}");
        }
    }
}
