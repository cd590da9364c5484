//! Base and augmenting relations, entity groups and matchings.
//!
//! A relation is loaded from CSV together with a JSON schema sidecar that
//! names the identifying and measurement attributes. Identifying values are
//! compared after trimming surrounding whitespace, without case folding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Text,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Base,
    Augmenting,
}

/// JSON sidecar describing a relation:
/// `{"role": "base", "id_attrs": [..], "measure_attrs": [..], "columns": {"name": "text"}}`.
///
/// Header columns absent from `columns` are read as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub role: Role,
    pub id_attrs: Vec<String>,
    #[serde(default)]
    pub measure_attrs: Vec<String>,
    #[serde(default)]
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        crate::cli::write_atomic(path.as_ref(), json.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Number(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Number(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// Projection of a row onto its identifying attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IdTuple(pub Vec<String>);

impl IdTuple {
    /// Single-field text form used in matching and candidate CSVs.
    /// Components are joined with `|`; `|` and `\` inside a component are
    /// backslash-escaped.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        for (i, part) in self.0.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            for ch in part.chars() {
                if ch == '|' || ch == '\\' {
                    out.push('\\');
                }
                out.push(ch);
            }
        }
        out
    }

    pub fn decode(text: &str) -> Self {
        let mut parts = vec![String::new()];
        let mut chars = text.chars();
        while let Some(ch) = chars.next() {
            match ch {
                '\\' => {
                    if let Some(next) = chars.next() {
                        parts.last_mut().unwrap().push(next);
                    }
                }
                '|' => parts.push(String::new()),
                _ => parts.last_mut().unwrap().push(ch),
            }
        }
        IdTuple(parts.into_iter().map(|p| p.trim().to_string()).collect())
    }
}

impl fmt::Display for IdTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    /// Column indices of the identifying attributes.
    pub id_attrs: Vec<usize>,
    /// Column indices of the measurement attributes.
    pub measure_attrs: Vec<usize>,
    pub role: Role,
}

impl Relation {
    /// Builds a relation and checks its invariants: identifying and
    /// measurement attributes are disjoint and exist, cell kinds match the
    /// column kinds, numbers are finite, and base identifiers are unique.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<Value>>,
        id_attrs: &[&str],
        measure_attrs: &[&str],
        role: Role,
    ) -> Result<Self> {
        let name = name.into();
        let lookup = |col: &str| {
            columns
                .iter()
                .position(|c| c.name == col)
                .ok_or_else(|| Error::MissingColumn {
                    relation: name.clone(),
                    column: col.to_string(),
                })
        };
        let id_idx = id_attrs.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?;
        let measure_idx = measure_attrs
            .iter()
            .map(|c| lookup(c))
            .collect::<Result<Vec<_>>>()?;
        if id_idx.is_empty() {
            return Err(Error::Schema(format!("{name}: id_attrs must not be empty")));
        }
        if let Some(&clash) = id_idx.iter().find(|i| measure_idx.contains(i)) {
            return Err(Error::Schema(format!(
                "{name}: column `{}` is both identifying and a measurement",
                columns[clash].name
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RowWidth {
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (col, value) in columns.iter().zip(row) {
                match (col.kind, value) {
                    (ColumnKind::Number, Value::Number(x)) if !x.is_finite() => {
                        return Err(Error::BadNumber {
                            row: r,
                            column: col.name.clone(),
                            value: x.to_string(),
                        })
                    }
                    (ColumnKind::Number, Value::Text(t)) => {
                        return Err(Error::BadNumber {
                            row: r,
                            column: col.name.clone(),
                            value: t.clone(),
                        })
                    }
                    (ColumnKind::Text, Value::Number(_)) => {
                        return Err(Error::Schema(format!(
                            "{name}: row {r} has a number in text column `{}`",
                            col.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        let relation = Relation {
            name,
            columns,
            rows,
            id_attrs: id_idx,
            measure_attrs: measure_idx,
            role,
        };
        if role == Role::Base {
            let mut seen: HashMap<IdTuple, usize> = HashMap::with_capacity(relation.len());
            for r in 0..relation.len() {
                if let Some(first) = seen.insert(relation.id_tuple(r), r) {
                    return Err(Error::DuplicateBaseId {
                        id_tuple: relation.id_tuple(r).encode(),
                        first,
                        second: r,
                    });
                }
            }
        }
        Ok(relation)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| Error::MissingColumn {
            relation: self.name.clone(),
            column: name.to_string(),
        })
    }

    pub fn value(&self, row: usize, col: usize) -> &Value {
        &self.rows[row][col]
    }

    pub fn id_tuple(&self, row: usize) -> IdTuple {
        IdTuple(
            self.id_attrs
                .iter()
                .map(|&c| self.rows[row][c].to_string().trim().to_string())
                .collect(),
        )
    }

    pub fn schema(&self) -> Schema {
        Schema {
            role: self.role,
            id_attrs: self.id_attrs.iter().map(|&c| self.columns[c].name.clone()).collect(),
            measure_attrs: self
                .measure_attrs
                .iter()
                .map(|&c| self.columns[c].name.clone())
                .collect(),
            columns: self.columns.iter().map(|c| (c.name.clone(), c.kind)).collect(),
        }
    }

    /// Map from identifier to row index. Only meaningful for base relations.
    pub fn id_index(&self) -> HashMap<IdTuple, usize> {
        (0..self.len()).map(|r| (self.id_tuple(r), r)).collect()
    }
}

/// Reads a CSV file (RFC 4180 quoting, header row) under `schema`.
pub fn load_relation(path: impl AsRef<Path>, schema: &Schema) -> Result<Relation> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "relation".to_string());
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_relation(file, name, schema)
}

pub fn read_relation(input: impl std::io::Read, name: String, schema: &Schema) -> Result<Relation> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    for declared in schema.columns.keys() {
        if !header.contains(declared) {
            return Err(Error::MissingColumn {
                relation: name,
                column: declared.clone(),
            });
        }
    }
    let columns: Vec<Column> = header
        .iter()
        .map(|h| Column::new(h.clone(), schema.columns.get(h).copied().unwrap_or(ColumnKind::Text)))
        .collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != columns.len() {
            return Err(Error::RowWidth {
                row: r,
                expected: columns.len(),
                found: record.len(),
            });
        }
        let row = columns
            .iter()
            .zip(record.iter())
            .map(|(col, cell)| match col.kind {
                ColumnKind::Text => Ok(Value::Text(cell.to_string())),
                ColumnKind::Number => cell
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Value::Number)
                    .ok_or_else(|| Error::BadNumber {
                        row: r,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ids: Vec<&str> = schema.id_attrs.iter().map(String::as_str).collect();
    let measures: Vec<&str> = schema.measure_attrs.iter().map(String::as_str).collect();
    Relation::new(name, columns, rows, &ids, &measures, schema.role)
}

pub fn write_relation(relation: &Relation, path: impl AsRef<Path>) -> Result<()> {
    let bytes = relation_to_csv(relation)?;
    crate::cli::write_atomic(path.as_ref(), &bytes)
}

pub fn relation_to_csv(relation: &Relation) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(relation.columns.iter().map(|c| c.name.as_str()))?;
    for row in &relation.rows {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

/// Augmenting rows sharing an identifier, matched as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityGroup {
    pub group_id: usize,
    pub id_tuple: IdTuple,
    pub row_indices: Vec<usize>,
}

/// Partitions the rows of `relation` by identifier, groups ordered by first
/// occurrence.
pub fn group_augmenting(relation: &Relation) -> Vec<EntityGroup> {
    let mut index: HashMap<IdTuple, usize> = HashMap::new();
    let mut groups: Vec<EntityGroup> = Vec::new();
    for row in 0..relation.len() {
        let id = relation.id_tuple(row);
        match index.get(&id) {
            Some(&g) => groups[g].row_indices.push(row),
            None => {
                index.insert(id.clone(), groups.len());
                groups.push(EntityGroup {
                    group_id: groups.len(),
                    id_tuple: id,
                    row_indices: vec![row],
                });
            }
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    GroundTruth,
    Nominal,
}

/// A set of (base row, group) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub pairs: BTreeSet<(usize, usize)>,
    pub kind: MatchKind,
}

impl Matching {
    pub fn new(kind: MatchKind) -> Self {
        Matching {
            pairs: BTreeSet::new(),
            kind,
        }
    }

    pub fn from_pairs(kind: MatchKind, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Matching {
            pairs: pairs.into_iter().collect(),
            kind,
        }
    }

    /// Group → base row. The last pair wins if a group is matched twice.
    pub fn by_group(&self) -> HashMap<usize, usize> {
        self.pairs.iter().map(|&(r, g)| (g, r)).collect()
    }

    /// Largest number of groups matched to one base row.
    pub fn max_in_degree(&self) -> usize {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for &(r, _) in &self.pairs {
            *counts.entry(r).or_default() += 1;
        }
        counts.into_values().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AugmentationReport {
    /// Groups matched to more than one base row.
    pub duplicated_groups: Vec<usize>,
    /// Groups with at least one candidate edge but no match.
    pub unmatched_groups: Vec<usize>,
    /// Pairs that are not candidate edges.
    pub outside_candidates: Vec<(usize, usize)>,
}

impl AugmentationReport {
    pub fn functional(&self) -> bool {
        self.duplicated_groups.is_empty()
    }

    pub fn inclusion(&self) -> bool {
        self.unmatched_groups.is_empty()
    }

    pub fn within_candidates(&self) -> bool {
        self.outside_candidates.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.functional() && self.inclusion() && self.within_candidates()
    }
}

/// Checks that `matching` is a valid augmentation with respect to the
/// candidate set: every group is matched at most once, every group with a
/// candidate edge is matched, and every pair is a candidate edge.
pub fn validate_augmentation(
    matching: &Matching,
    group_count: usize,
    candidates: &CandidateSet,
) -> AugmentationReport {
    let mut report = AugmentationReport::default();
    let mut times_matched = vec![0usize; group_count.max(candidates.group_count)];
    for &(r, g) in &matching.pairs {
        if g < times_matched.len() {
            times_matched[g] += 1;
        }
        if !candidates.contains(r, g) {
            report.outside_candidates.push((r, g));
        }
    }
    let mut coverable = vec![false; times_matched.len()];
    for e in &candidates.edges {
        coverable[e.group] = true;
    }
    for (g, &n) in times_matched.iter().enumerate() {
        if n > 1 {
            report.duplicated_groups.push(g);
        }
        if n == 0 && coverable[g] {
            report.unmatched_groups.push(g);
        }
    }
    report
}

/// Reads a matching CSV with columns `base_id_tuple,augmenting_id_tuple`.
pub fn load_matching(
    path: impl AsRef<Path>,
    base: &Relation,
    groups: &[EntityGroup],
    kind: MatchKind,
) -> Result<Matching> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base_index = base.id_index();
    let group_index: HashMap<&IdTuple, usize> =
        groups.iter().map(|g| (&g.id_tuple, g.group_id)).collect();
    let mut reader = csv::Reader::from_reader(file);
    let mut matching = Matching::new(kind);
    for record in reader.records() {
        let record = record?;
        let (Some(b), Some(a)) = (record.get(0), record.get(1)) else {
            return Err(Error::Config(format!("{}: matching rows need two fields", path.display())));
        };
        let b = IdTuple::decode(b);
        let a = IdTuple::decode(a);
        let r = *base_index.get(&b).ok_or_else(|| Error::UnknownId(b.encode()))?;
        let g = *group_index.get(&a).ok_or_else(|| Error::UnknownId(a.encode()))?;
        matching.pairs.insert((r, g));
    }
    Ok(matching)
}

pub fn matching_to_csv(matching: &Matching, base: &Relation, groups: &[EntityGroup]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["base_id_tuple", "augmenting_id_tuple"])?;
    for &(r, g) in &matching.pairs {
        writer.write_record([base.id_tuple(r).encode(), groups[g].id_tuple.encode()])?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_matching(
    matching: &Matching,
    base: &Relation,
    groups: &[EntityGroup],
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = matching_to_csv(matching, base, groups)?;
    crate::cli::write_atomic(path.as_ref(), &bytes)
}
