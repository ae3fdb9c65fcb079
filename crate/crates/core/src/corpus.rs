//! Corpus ingestion and two-regime boundary assignment.
//!
//! A boundary splits every document into regime `A` or regime `B`. The split
//! is total: a document with a missing or unmapped boundary attribute is a
//! hard error, never a silent drop, because silently dropped rows would skew
//! the permutation baselines computed downstream.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {record}: invalid JSON: {message}")]
    Json { record: usize, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("record {record}: missing required field \"{field}\"")]
    MissingField { record: usize, field: String },
    #[error("record {record}: field \"{field}\" must be a string")]
    NonStringField { record: usize, field: String },
    #[error("record {record}: attribute \"{attribute}\" is not a flat scalar")]
    NonScalarAttribute { record: usize, attribute: String },
    #[error("record {record}: document text is empty")]
    EmptyText { record: usize },
    #[error("duplicate document id \"{id}\" (records {first} and {second})")]
    DuplicateId { id: String, first: usize, second: usize },
    #[error("corpus must contain at least 2 documents, found {0}")]
    TooSmall(usize),
    #[error("document \"{id}\" is missing boundary attribute \"{attribute}\"")]
    MissingAttribute { id: String, attribute: String },
    #[error("document \"{id}\" has no regime mapping (value \"{value}\")")]
    UnmappedDocument { id: String, value: String },
    #[error(
        "attribute \"{attribute}\" of document \"{id}\" has type {found}, \
         but the threshold is {expected}"
    )]
    ThresholdTypeMismatch { id: String, attribute: String, found: String, expected: String },
    #[error("regime {0} is empty; a boundary must put at least one document on each side")]
    EmptyRegime(Regime),
    #[error("unsupported corpus format \"{0}\" (expected jsonl or csv)")]
    UnknownFormat(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One side of a contextual boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    A,
    B,
}

impl Regime {
    pub fn flipped(self) -> Regime {
        match self {
            Regime::A => Regime::B,
            Regime::B => Regime::A,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::A => write!(f, "A"),
            Regime::B => write!(f, "B"),
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Regime::A),
            "B" | "b" => Ok(Regime::B),
            other => Err(format!("invalid regime \"{other}\" (expected A or B)")),
        }
    }
}

/// Scalar attribute attached to a document.
///
/// Timestamps are held at day granularity: an ISO-8601 date or datetime
/// parses to its calendar date, and threshold comparisons operate on dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Num(f64),
    Date(NaiveDate),
    Str(String),
}

impl AttrValue {
    /// Parse a bare string the way CSV cells are interpreted: number first,
    /// then ISO-8601 date/datetime, falling back to a plain string.
    pub fn parse(raw: &str) -> AttrValue {
        let t = raw.trim();
        if let Ok(n) = t.parse::<f64>() {
            if n.is_finite() {
                return AttrValue::Num(n);
            }
        }
        if let Some(d) = parse_iso_date(t) {
            return AttrValue::Date(d);
        }
        AttrValue::Str(t.to_string())
    }

    /// Interpret a JSON scalar. JSON numbers stay numeric; strings are
    /// checked for an ISO-8601 timestamp before falling back to text.
    fn from_json(v: &serde_json::Value) -> Option<AttrValue> {
        match v {
            serde_json::Value::Number(n) => n.as_f64().map(AttrValue::Num),
            serde_json::Value::String(s) => Some(match parse_iso_date(s.trim()) {
                Some(d) => AttrValue::Date(d),
                None => AttrValue::Str(s.clone()),
            }),
            serde_json::Value::Bool(b) => Some(AttrValue::Str(b.to_string())),
            _ => None,
        }
    }

    /// Canonical string form used for label-map lookups and exports.
    pub fn canonical(&self) -> String {
        match self {
            AttrValue::Num(n) => {
                if n.fract() == 0.0 && n.abs() < 1e15 {
                    format!("{}", *n as i64)
                } else {
                    format!("{n}")
                }
            }
            AttrValue::Date(d) => d.format("%Y-%m-%d").to_string(),
            AttrValue::Str(s) => s.clone(),
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            AttrValue::Num(_) => "number",
            AttrValue::Date(_) => "date",
            AttrValue::Str(_) => "string",
        }
    }

    /// Same-type ordering; `None` when the variants differ.
    fn partial_cmp_same(&self, other: &AttrValue) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (AttrValue::Num(a), AttrValue::Num(b)) => a.partial_cmp(b),
            (AttrValue::Date(a), AttrValue::Date(b)) => Some(a.cmp(b)),
            (AttrValue::Str(a), AttrValue::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.date_naive());
    }
    if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt.date());
    }
    None
}

/// A single document: unique id, non-empty text, scalar attributes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub attributes: BTreeMap<String, AttrValue>,
}

/// Ordered document collection with unique ids.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Corpus> {
        if documents.len() < 2 {
            return Err(CorpusError::TooSmall(documents.len()));
        }
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText { record: i + 1 });
            }
            if let Some(first) = index.insert(doc.id.clone(), i) {
                return Err(CorpusError::DuplicateId {
                    id: doc.id.clone(),
                    first: first + 1,
                    second: i + 1,
                });
            }
        }
        Ok(Corpus { documents, index })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Document ids in corpus order.
    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }
}

/// Supported on-disk corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Load a corpus from JSONL (one object per line, required keys `id` and
/// `text`) or CSV (header row with `id` and `text` columns). Remaining
/// keys/columns become scalar attributes; file order is preserved.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Csv => load_csv(path),
    }
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut documents = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let record = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Json { record, message: e.to_string() })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::Json {
            record,
            message: "expected a JSON object".to_string(),
        })?;
        let id = field_string(obj, "id", record)?;
        let text = field_string(obj, "text", record)?;
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText { record });
        }
        let mut attributes = BTreeMap::new();
        for (key, val) in obj {
            if key == "id" || key == "text" || val.is_null() {
                continue;
            }
            let attr = AttrValue::from_json(val).ok_or_else(|| {
                CorpusError::NonScalarAttribute { record, attribute: key.clone() }
            })?;
            attributes.insert(key.clone(), attr);
        }
        documents.push(Document { id, text, attributes });
    }
    Corpus::new(documents)
}

fn field_string(
    obj: &serde_json::Map<String, serde_json::Value>,
    field: &str,
    record: usize,
) -> Result<String> {
    match obj.get(field) {
        None => Err(CorpusError::MissingField { record, field: field.to_string() }),
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(CorpusError::NonStringField { record, field: field.to_string() }),
    }
}

fn load_csv(path: &Path) -> Result<Corpus> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("id").ok_or_else(|| CorpusError::MissingField {
        record: 1,
        field: "id".to_string(),
    })?;
    let text_col = col("text").ok_or_else(|| CorpusError::MissingField {
        record: 1,
        field: "text".to_string(),
    })?;

    let mut documents = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = i + 2; // header is row 1
        let row = row?;
        let id = row
            .get(id_col)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::MissingField { record, field: "id".to_string() })?
            .to_string();
        let text = row
            .get(text_col)
            .ok_or_else(|| CorpusError::MissingField { record, field: "text".to_string() })?
            .to_string();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText { record });
        }
        let mut attributes = BTreeMap::new();
        for (j, header) in headers.iter().enumerate() {
            if j == id_col || j == text_col {
                continue;
            }
            if let Some(cell) = row.get(j) {
                if !cell.is_empty() {
                    attributes.insert(header.to_string(), AttrValue::parse(cell));
                }
            }
        }
        documents.push(Document { id, text, attributes });
    }
    Corpus::new(documents)
}

/// Human-defined rule that realizes a two-regime split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BoundarySpec {
    /// Attribute value (canonical string form) looked up in an explicit map.
    ByLabel { attribute: String, map: BTreeMap<String, Regime> },
    /// Strict-less-than threshold: `value < cut` goes to regime A, the rest
    /// (including the cut itself) to regime B.
    ByThreshold { attribute: String, cut: AttrValue },
    /// Explicit per-document assignment.
    ByList { map: BTreeMap<String, Regime> },
}

impl BoundarySpec {
    pub fn describe(&self) -> String {
        match self {
            BoundarySpec::ByLabel { attribute, map } => {
                let entries: Vec<String> =
                    map.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("label({attribute}: {})", entries.join(","))
            }
            BoundarySpec::ByThreshold { attribute, cut } => {
                format!("threshold({attribute} < {} -> A)", cut.canonical())
            }
            BoundarySpec::ByList { map } => format!("list({} ids)", map.len()),
        }
    }
}

/// Total document -> regime assignment, in corpus order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeAssignment {
    ids: Vec<String>,
    regimes: Vec<Regime>,
    description: String,
}

impl RegimeAssignment {
    pub fn new(ids: Vec<String>, regimes: Vec<Regime>, description: String) -> Result<Self> {
        assert_eq!(ids.len(), regimes.len(), "ids and regimes must align");
        let a = RegimeAssignment { ids, regimes, description };
        if a.n_a() == 0 {
            return Err(CorpusError::EmptyRegime(Regime::A));
        }
        if a.n_b() == 0 {
            return Err(CorpusError::EmptyRegime(Regime::B));
        }
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Regimes aligned with `ids()` (and with corpus/matrix row order).
    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn n_a(&self) -> usize {
        self.regimes.iter().filter(|r| **r == Regime::A).count()
    }

    pub fn n_b(&self) -> usize {
        self.regimes.iter().filter(|r| **r == Regime::B).count()
    }

    pub fn regime_of(&self, id: &str) -> Option<Regime> {
        self.ids.iter().position(|i| i == id).map(|i| self.regimes[i])
    }

    /// Swap the two regime labels everywhere (direction flip A<->B).
    pub fn swapped(&self) -> RegimeAssignment {
        RegimeAssignment {
            ids: self.ids.clone(),
            regimes: self.regimes.iter().map(|r| r.flipped()).collect(),
            description: format!("{} [swapped]", self.description),
        }
    }

    /// Export as `id,regime` CSV.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,regime")?;
        for (id, regime) in self.ids.iter().zip(&self.regimes) {
            writeln!(w, "{id},{regime}")?;
        }
        Ok(())
    }
}

/// Realize a boundary spec over a corpus. Total and deterministic; a
/// document the spec cannot place is an error, as is an empty regime.
pub fn apply_boundary(corpus: &Corpus, spec: &BoundarySpec) -> Result<RegimeAssignment> {
    let mut regimes = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let regime = match spec {
            BoundarySpec::ByLabel { attribute, map } => {
                let value = doc.attributes.get(attribute).ok_or_else(|| {
                    CorpusError::MissingAttribute {
                        id: doc.id.clone(),
                        attribute: attribute.clone(),
                    }
                })?;
                let key = value.canonical();
                *map.get(&key).ok_or_else(|| CorpusError::UnmappedDocument {
                    id: doc.id.clone(),
                    value: key.clone(),
                })?
            }
            BoundarySpec::ByThreshold { attribute, cut } => {
                let value = doc.attributes.get(attribute).ok_or_else(|| {
                    CorpusError::MissingAttribute {
                        id: doc.id.clone(),
                        attribute: attribute.clone(),
                    }
                })?;
                let ord = value.partial_cmp_same(cut).ok_or_else(|| {
                    CorpusError::ThresholdTypeMismatch {
                        id: doc.id.clone(),
                        attribute: attribute.clone(),
                        found: value.type_name().to_string(),
                        expected: cut.type_name().to_string(),
                    }
                })?;
                if ord == std::cmp::Ordering::Less {
                    Regime::A
                } else {
                    Regime::B
                }
            }
            BoundarySpec::ByList { map } => *map.get(&doc.id).ok_or_else(|| {
                CorpusError::UnmappedDocument {
                    id: doc.id.clone(),
                    value: doc.id.clone(),
                }
            })?,
        };
        regimes.push(regime);
    }
    if let BoundarySpec::ByList { map } = spec {
        let extra = map.keys().filter(|id| corpus.get(id).is_none()).count();
        if extra > 0 {
            log::warn!("boundary list contains {extra} ids not present in the corpus");
        }
    }
    RegimeAssignment::new(corpus.ids(), regimes, spec.describe())
}

/// Uniformly permute the regime labels while keeping `(n_A, n_B)` fixed.
/// Deterministic for a given seed.
pub fn permute_assignment(assignment: &RegimeAssignment, seed: u64) -> RegimeAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut regimes = assignment.regimes.clone();
    regimes.shuffle(&mut rng);
    RegimeAssignment {
        ids: assignment.ids.clone(),
        regimes,
        description: format!("{} [permuted seed={seed}]", assignment.description),
    }
}
