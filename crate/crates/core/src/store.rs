//! In-memory relational store: schema, tuples, per-attribute value indexes and
//! the exact and similarity selection operators used during saturation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::textsim::SimilarityIndex;

/// Every stored value is text; integer domains are only validated.
pub type Value = Arc<str>;

pub fn value(s: &str) -> Value {
    Arc::from(s)
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has no attribute `{attribute}`")]
    UnknownAttribute { relation: String, attribute: String },
    #[error("missing data file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: expected {expected} fields, found {found}")]
    Arity {
        file: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: `{value}` is not an integer")]
    Domain {
        file: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{file}: {source}")]
    Csv {
        file: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("similarity index has no pair for {relation}.{attribute}")]
    NoSimilarityPair { relation: String, attribute: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Text,
    Integer,
}

/// How values of an attribute enter a bottom clause.
///
/// `Join` values become shared variables and drive exact selection, `Output`
/// values become shared variables without being used as selection keys,
/// `Constant` values stay constants, and `Free` values get a fresh variable per
/// occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Join,
    Output,
    Constant,
    Free,
}

impl Mode {
    /// Whether values of the attribute are shared variables and join keys for M.
    pub fn shares_values(self) -> bool {
        matches!(self, Mode::Join | Mode::Output)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub domain: Domain,
    pub mode: Mode,
}

impl Attribute {
    pub fn new(name: &str, domain: Domain) -> Self {
        Attribute {
            name: name.to_string(),
            domain,
            mode: Mode::Join,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl RelationDecl {
    pub fn new(name: &str, attributes: Vec<Attribute>) -> Self {
        RelationDecl {
            name: name.to_string(),
            attributes,
        }
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn position(&self, attribute: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    relations: Vec<RelationDecl>,
    by_name: HashMap<String, usize>,
}

impl Schema {
    pub fn new(relations: Vec<RelationDecl>) -> Result<Self, StoreError> {
        let mut by_name = HashMap::new();
        for (i, r) in relations.iter().enumerate() {
            if by_name.insert(r.name.clone(), i).is_some() {
                return Err(StoreError::Schema {
                    line: i + 1,
                    msg: format!("duplicate relation `{}`", r.name),
                });
            }
            let mut seen = BTreeSet::new();
            for a in &r.attributes {
                if !seen.insert(a.name.as_str()) {
                    return Err(StoreError::Schema {
                        line: i + 1,
                        msg: format!("duplicate attribute `{}` in `{}`", a.name, r.name),
                    });
                }
            }
        }
        Ok(Schema { relations, by_name })
    }

    /// Parses lines of the form `relation(attr:domain[:mode], ...)`.
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut relations = Vec::new();
        let mut lines = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| StoreError::Schema {
                line: n + 1,
                msg: msg.to_string(),
            };
            let open = line.find('(').ok_or_else(|| err("expected `(`"))?;
            if !line.ends_with(')') {
                return Err(err("expected `)` at end of line"));
            }
            let name = line[..open].trim();
            if !is_identifier(name) {
                return Err(err("bad relation name"));
            }
            let mut attributes = Vec::new();
            for part in line[open + 1..line.len() - 1].split(',') {
                let fields: Vec<&str> = part.split(':').map(str::trim).collect();
                if fields.len() < 2 || fields.len() > 3 || !is_identifier(fields[0]) {
                    return Err(err("attribute must look like `name:domain`"));
                }
                let domain = match fields[1] {
                    "text" => Domain::Text,
                    "integer" => Domain::Integer,
                    other => return Err(err(&format!("unknown domain `{other}`"))),
                };
                let mode = match fields.get(2) {
                    None | Some(&"join") => Mode::Join,
                    Some(&"out") => Mode::Output,
                    Some(&"const") => Mode::Constant,
                    Some(&"free") => Mode::Free,
                    Some(other) => return Err(err(&format!("unknown mode `{other}`"))),
                };
                attributes.push(Attribute::new(fields[0], domain).with_mode(mode));
            }
            relations.push(RelationDecl::new(name, attributes));
            lines.push(n + 1);
        }
        Schema::new(relations).map_err(|e| match e {
            StoreError::Schema { line, msg } => StoreError::Schema {
                line: lines[line - 1],
                msg,
            },
            other => other,
        })
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.index_of(name).map(|i| &self.relations[i])
    }

    pub fn resolve(&self, relation: &str, attribute: &str) -> Result<(usize, usize), StoreError> {
        let r = self
            .index_of(relation)
            .ok_or_else(|| StoreError::UnknownRelation(relation.to_string()))?;
        let a =
            self.relations[r]
                .position(attribute)
                .ok_or_else(|| StoreError::UnknownAttribute {
                    relation: relation.to_string(),
                    attribute: attribute.to_string(),
                })?;
        Ok((r, a))
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            let attrs: Vec<String> = r
                .attributes
                .iter()
                .map(|a| {
                    let d = match a.domain {
                        Domain::Text => "text",
                        Domain::Integer => "integer",
                    };
                    match a.mode {
                        Mode::Join => format!("{}:{d}", a.name),
                        Mode::Output => format!("{}:{d}:out", a.name),
                        Mode::Constant => format!("{}:{d}:const", a.name),
                        Mode::Free => format!("{}:{d}:free", a.name),
                    }
                })
                .collect();
            writeln!(f, "{}({})", r.name, attrs.join(", "))?;
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Table {
    rows: Vec<Vec<Value>>,
    index: Vec<HashMap<Value, Vec<usize>>>,
}

impl Table {
    fn new(arity: usize) -> Self {
        Table {
            rows: Vec::new(),
            index: vec![HashMap::new(); arity],
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        let id = self.rows.len();
        for (a, v) in row.iter().enumerate() {
            self.index[a].entry(v.clone()).or_default().push(id);
        }
        self.rows.push(row);
    }
}

/// A tuple annotated with the similarity match that selected it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimHit {
    pub row: usize,
    pub left: Value,
    pub right: Value,
    pub score: f64,
}

/// Immutable after loading; the target relation holds no tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    schema: Schema,
    target: usize,
    tables: Vec<Table>,
}

impl Database {
    pub fn empty(schema: Schema, target: &str) -> Result<Self, StoreError> {
        let target = schema
            .index_of(target)
            .ok_or_else(|| StoreError::UnknownRelation(target.to_string()))?;
        let tables = schema
            .relations()
            .iter()
            .map(|r| Table::new(r.arity()))
            .collect();
        Ok(Database {
            schema,
            target,
            tables,
        })
    }

    /// Builds a database from literal rows; used by tests and generators.
    pub fn from_rows<S: AsRef<str>>(
        schema: Schema,
        target: &str,
        rows: &[(&str, Vec<S>)],
    ) -> Result<Self, StoreError> {
        let mut db = Database::empty(schema, target)?;
        for (rel, vals) in rows {
            db.insert(rel, vals.iter().map(|v| value(v.as_ref())).collect())?;
        }
        Ok(db)
    }

    pub fn insert(&mut self, relation: &str, row: Vec<Value>) -> Result<usize, StoreError> {
        let r = self
            .schema
            .index_of(relation)
            .ok_or_else(|| StoreError::UnknownRelation(relation.to_string()))?;
        let arity = self.schema.relations()[r].arity();
        if row.len() != arity {
            return Err(StoreError::Arity {
                file: PathBuf::from(format!("<{relation}>")),
                line: self.tables[r].rows.len() as u64 + 1,
                expected: arity,
                found: row.len(),
            });
        }
        self.tables[r].push(row);
        Ok(self.tables[r].rows.len() - 1)
    }

    /// Loads `<relation>.csv` for every non-target relation in `dir`.
    pub fn load_csv(schema: Schema, target: &str, dir: &Path) -> Result<Self, StoreError> {
        let mut db = Database::empty(schema, target)?;
        for r in 0..db.schema.relations().len() {
            if r == db.target {
                continue;
            }
            let decl = db.schema.relations()[r].clone();
            let file = dir.join(format!("{}.csv", decl.name));
            if !file.is_file() {
                return Err(StoreError::MissingFile(file));
            }
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_path(&file)
                .map_err(|source| StoreError::Csv {
                    file: file.clone(),
                    source,
                })?;
            for record in reader.records() {
                let record = record.map_err(|source| StoreError::Csv {
                    file: file.clone(),
                    source,
                })?;
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                if record.len() != decl.arity() {
                    return Err(StoreError::Arity {
                        file,
                        line,
                        expected: decl.arity(),
                        found: record.len(),
                    });
                }
                for (field, attr) in record.iter().zip(&decl.attributes) {
                    if attr.domain == Domain::Integer && field.trim().parse::<i64>().is_err() {
                        return Err(StoreError::Domain {
                            file,
                            line,
                            value: field.to_string(),
                        });
                    }
                }
                db.tables[r].push(record.iter().map(value).collect());
            }
        }
        Ok(db)
    }

    pub fn dump_csv(&self, dir: &Path) -> Result<(), StoreError> {
        std::fs::create_dir_all(dir)?;
        for (r, decl) in self.schema.relations().iter().enumerate() {
            if r == self.target {
                continue;
            }
            let file = dir.join(format!("{}.csv", decl.name));
            let mut writer = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(&file)
                .map_err(|source| StoreError::Csv {
                    file: file.clone(),
                    source,
                })?;
            for row in &self.tables[r].rows {
                writer
                    .write_record(row.iter().map(|v| v.as_bytes()))
                    .map_err(|source| StoreError::Csv {
                        file: file.clone(),
                        source,
                    })?;
            }
            writer.flush()?;
        }
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn target_decl(&self) -> &RelationDecl {
        &self.schema.relations()[self.target]
    }

    pub fn rows(&self, relation: usize) -> &[Vec<Value>] {
        &self.tables[relation].rows
    }

    pub fn row(&self, relation: usize, row: usize) -> &[Value] {
        &self.tables[relation].rows[row]
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row ids of `relation` whose value at `attribute` is in `values`, in id order.
    pub fn select_eq(
        &self,
        relation: &str,
        attribute: &str,
        values: &BTreeSet<Value>,
    ) -> Result<Vec<usize>, StoreError> {
        let (r, a) = self.schema.resolve(relation, attribute)?;
        Ok(self.select_eq_at(r, a, values))
    }

    pub fn select_eq_at(
        &self,
        relation: usize,
        attribute: usize,
        values: &BTreeSet<Value>,
    ) -> Vec<usize> {
        let index = &self.tables[relation].index[attribute];
        let mut out: Vec<usize> = values
            .iter()
            .filter_map(|v| index.get(v))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Rows of `relation` whose value at `attribute` is similar, per `idx`, to one of
    /// `values`. Each hit carries the matched pair; order is by row id then left value.
    pub fn select_sim(
        &self,
        relation: &str,
        attribute: &str,
        values: &BTreeSet<Value>,
        idx: &SimilarityIndex,
    ) -> Result<Vec<SimHit>, StoreError> {
        let (r, a) = self.schema.resolve(relation, attribute)?;
        let me = crate::textsim::AttrRef::new(relation, attribute);
        let pairs = idx.pairs_touching(&me);
        if pairs.is_empty() {
            return Err(StoreError::NoSimilarityPair {
                relation: relation.to_string(),
                attribute: attribute.to_string(),
            });
        }
        let index = &self.tables[r].index[a];
        let mut hits = Vec::new();
        for key in pairs {
            for m in values {
                for (right, score) in idx.matches_from(&key, &me, m) {
                    if let Some(rows) = index.get(&right) {
                        for &row in rows {
                            hits.push(SimHit {
                                row,
                                left: m.clone(),
                                right: right.clone(),
                                score,
                            });
                        }
                    }
                }
            }
        }
        hits.sort_by(|x, y| x.row.cmp(&y.row).then_with(|| x.left.cmp(&y.left)));
        hits.dedup_by(|x, y| x.row == y.row && x.left == y.left);
        Ok(hits)
    }
}
