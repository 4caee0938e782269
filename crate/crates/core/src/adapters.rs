//! Normalizes external tools' native output files into [`ToolVerdict`]s.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::normalize_pmcid;
use crate::detectors::{Criterion, ToolVerdict};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("missing field {field:?} in source")]
    Schema { field: String },
    #[error("row {row}: field {field:?} has unusable value {value:?}")]
    Value {
        row: usize,
        field: String,
        value: String,
    },
    #[error("adapter spec: {0}")]
    Spec(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AdapterError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterFormat {
    PrerobCsv,
    SciscoreJson,
    ConsortTmCsv,
    BarzookaCsv,
    OddpubCsv,
    SoftciteJson,
}

impl AdapterFormat {
    pub fn is_json(&self) -> bool {
        matches!(self, AdapterFormat::SciscoreJson | AdapterFormat::SoftciteJson)
    }

    /// The rule each format is read with.
    pub fn default_rule(&self) -> PositivityRule {
        match self {
            AdapterFormat::PrerobCsv => PositivityRule::Threshold { value: 0.5 },
            AdapterFormat::SciscoreJson | AdapterFormat::SoftciteJson => PositivityRule::SentencePresent,
            AdapterFormat::ConsortTmCsv | AdapterFormat::OddpubCsv => PositivityRule::FlagTrue,
            AdapterFormat::BarzookaCsv => PositivityRule::ColumnIndex { index: 7 },
        }
    }

    fn accepts(&self, rule: &PositivityRule) -> bool {
        std::mem::discriminant(rule) == std::mem::discriminant(&self.default_rule())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositivityRule {
    /// Numeric score strictly above `value`.
    Threshold { value: f64 },
    /// A sentence (or any element of a list) other than a "not required" /
    /// "not detected" marker.
    SentencePresent,
    /// A true flag in the named column; several rows for one paper are OR-ed.
    FlagTrue,
    /// A set flag in the 1-based column `index`.
    ColumnIndex { index: usize },
}

fn default_id_field() -> String {
    "pmcid".to_string()
}

/// How to read one tool's output for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub tool: String,
    pub format: AdapterFormat,
    pub criterion: Criterion,
    /// CSV column name, or dot-separated path inside each JSON record.
    pub criterion_field: String,
    /// Column or path holding the paper identifier.
    #[serde(default = "default_id_field")]
    pub id_field: String,
    /// Column, or key inside list elements, holding evidence sentences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_field: Option<String>,
    pub positivity_rule: PositivityRule,
}

impl AdapterSpec {
    pub fn new(tool: &str, format: AdapterFormat, criterion: Criterion, criterion_field: &str) -> Self {
        Self {
            tool: tool.to_string(),
            format,
            criterion,
            criterion_field: criterion_field.to_string(),
            id_field: default_id_field(),
            evidence_field: None,
            positivity_rule: format.default_rule(),
        }
    }

    pub fn with_evidence(mut self, field: &str) -> Self {
        self.evidence_field = Some(field.to_string());
        self
    }

    pub fn with_id_field(mut self, field: &str) -> Self {
        self.id_field = field.to_string();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tool.trim().is_empty() {
            return Err(AdapterError::Spec("tool id is empty".into()));
        }
        if self.criterion_field.trim().is_empty() {
            return Err(AdapterError::Spec("criterion_field is empty".into()));
        }
        if !self.format.accepts(&self.positivity_rule) {
            return Err(AdapterError::Spec(format!(
                "{:?} does not fit format {:?}",
                self.positivity_rule, self.format
            )));
        }
        if let PositivityRule::ColumnIndex { index: 0 } = self.positivity_rule {
            return Err(AdapterError::Spec("column index is 1-based".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let spec: AdapterSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| AdapterError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Paper id from a cell: path components and a file extension are dropped,
/// so `pdfs/PMC8000001.pdf` reads as `PMC8000001`.
fn paper_id(raw: &str, row: usize, field: &str) -> Result<String> {
    let name = raw.trim().rsplit(['/', '\\']).next().unwrap_or("");
    let stem = match name.rsplit_once('.') {
        Some((s, ext)) if !ext.is_empty() && !ext.bytes().all(|b| b.is_ascii_digit()) => s,
        _ => name,
    };
    normalize_pmcid(stem).map_err(|_| AdapterError::Value {
        row,
        field: field.to_string(),
        value: raw.to_string(),
    })
}

fn parse_flag(raw: &str) -> Option<bool> {
    let t = raw.trim();
    match t.to_ascii_lowercase().as_str() {
        "true" | "t" | "yes" | "y" => return Some(true),
        "false" | "f" | "no" | "n" | "" | "na" => return Some(false),
        _ => {}
    }
    t.parse::<f64>().ok().filter(|x| x.is_finite()).map(|x| x > 0.0)
}

const NEGATIVE_MARKERS: [&str; 2] = ["not required", "not detected"];

fn is_negative_marker(s: &str) -> bool {
    let t = s.trim().to_ascii_lowercase();
    t.is_empty() || NEGATIVE_MARKERS.contains(&t.as_str())
}

#[derive(Default)]
struct Accum {
    present: bool,
    evidence: Vec<String>,
    score: Option<f64>,
}

impl Accum {
    fn add(&mut self, present: bool, evidence: Option<String>, score: Option<f64>) {
        self.present |= present;
        if present {
            if let Some(e) = evidence.filter(|e| !e.trim().is_empty()) {
                if !self.evidence.contains(&e) {
                    self.evidence.push(e);
                }
            }
        }
        if let Some(s) = score {
            self.score = Some(self.score.map_or(s, |o: f64| o.max(s)));
        }
    }
}

/// Reads `path` under `spec`; one verdict per paper, sorted by pmcid.
pub fn import_tool_output(spec: &AdapterSpec, path: &Path) -> Result<Vec<ToolVerdict>> {
    import_from_str(spec, &read(path)?)
}

pub fn import_from_str(spec: &AdapterSpec, source: &str) -> Result<Vec<ToolVerdict>> {
    spec.validate()?;
    let acc = if spec.format.is_json() {
        import_json(spec, source)?
    } else {
        import_csv(spec, source)?
    };
    Ok(acc
        .into_iter()
        .map(|(pmcid, a)| ToolVerdict {
            pmcid,
            tool: spec.tool.clone(),
            criterion: spec.criterion,
            present: a.present,
            evidence: if a.present { a.evidence } else { Vec::new() },
            score: a.score,
            entities: None,
        })
        .collect())
}

fn import_csv(spec: &AdapterSpec, source: &str) -> Result<BTreeMap<String, Accum>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(source.as_bytes());
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| AdapterError::Schema { field: name.to_string() })
    };
    let id_col = column(&spec.id_field)?;
    let value_col = match spec.positivity_rule {
        PositivityRule::ColumnIndex { index } => {
            if index > headers.len() {
                return Err(AdapterError::Schema {
                    field: format!("{} (column {index})", spec.criterion_field),
                });
            }
            index - 1
        }
        _ => column(&spec.criterion_field)?,
    };
    let evidence_col = spec.evidence_field.as_deref().map(column).transpose()?;

    let mut out: BTreeMap<String, Accum> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // Header is line 1.
        let row = i + 2;
        let cell = |c: usize, field: &str| {
            record.get(c).ok_or_else(|| AdapterError::Value {
                row,
                field: field.to_string(),
                value: String::new(),
            })
        };
        let id = paper_id(cell(id_col, &spec.id_field)?, row, &spec.id_field)?;
        let raw = cell(value_col, &spec.criterion_field)?;
        let bad = || AdapterError::Value {
            row,
            field: spec.criterion_field.clone(),
            value: raw.to_string(),
        };
        let (present, score) = match spec.positivity_rule {
            PositivityRule::Threshold { value } => {
                let x: f64 = raw.trim().parse().map_err(|_| bad())?;
                if !x.is_finite() {
                    return Err(bad());
                }
                (x > value, Some(x).filter(|s| (0.0..=1.0).contains(s)))
            }
            PositivityRule::FlagTrue | PositivityRule::ColumnIndex { .. } => (parse_flag(raw).ok_or_else(bad)?, None),
            PositivityRule::SentencePresent => unreachable!("validated against csv formats"),
        };
        let evidence = evidence_col.and_then(|c| record.get(c)).map(|s| s.trim().to_string());
        out.entry(id).or_default().add(present, evidence, score);
    }
    Ok(out)
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| match cur {
        Value::Object(m) => m.get(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

/// JSON sources may be a single record, an array of records, or an object
/// mapping paper ids to records.
fn json_records(root: &Value, id_field: &str) -> Vec<(Option<String>, Value)> {
    match root {
        Value::Array(items) => items.iter().map(|v| (None, v.clone())).collect(),
        Value::Object(m) if lookup(root, id_field).is_none() && m.values().all(Value::is_object) => {
            m.iter().map(|(k, v)| (Some(k.clone()), v.clone())).collect()
        }
        other => vec![(None, other.clone())],
    }
}

fn sentence_of(v: &Value, evidence_field: Option<&str>) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Object(_) => evidence_field
            .and_then(|f| lookup(v, f))
            .or_else(|| lookup(v, "sentence"))
            .or_else(|| lookup(v, "text"))
            .and_then(Value::as_str)
            .map(str::to_string),
        _ => None,
    }
}

fn import_json(spec: &AdapterSpec, source: &str) -> Result<BTreeMap<String, Accum>> {
    let root: Value = serde_json::from_str(source)?;
    let evidence_field = spec.evidence_field.as_deref();
    let mut out: BTreeMap<String, Accum> = BTreeMap::new();
    for (i, (key, record)) in json_records(&root, &spec.id_field).into_iter().enumerate() {
        let row = i + 1;
        let raw_id = match lookup(&record, &spec.id_field) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(AdapterError::Value {
                    row,
                    field: spec.id_field.clone(),
                    value: other.to_string(),
                })
            }
            None => key.ok_or_else(|| AdapterError::Schema {
                field: spec.id_field.clone(),
            })?,
        };
        let id = paper_id(&raw_id, row, &spec.id_field)?;
        let value = lookup(&record, &spec.criterion_field).ok_or_else(|| AdapterError::Schema {
            field: spec.criterion_field.clone(),
        })?;
        let acc = out.entry(id).or_default();
        match value {
            Value::Null => acc.add(false, None, None),
            Value::Bool(b) => acc.add(*b, None, None),
            Value::String(s) => acc.add(!is_negative_marker(s), Some(s.trim().to_string()), None),
            Value::Array(items) => {
                for item in items {
                    let sentence = sentence_of(item, evidence_field);
                    let positive = match item {
                        Value::String(s) => !is_negative_marker(s),
                        Value::Null => false,
                        _ => true,
                    };
                    acc.add(positive, sentence, None);
                }
                if items.is_empty() {
                    acc.add(false, None, None);
                }
            }
            Value::Object(_) => {
                let sentence = sentence_of(value, evidence_field);
                let positive = sentence.as_deref().is_none_or(|s| !is_negative_marker(s));
                acc.add(positive, sentence, None);
            }
            Value::Number(_) => {
                return Err(AdapterError::Value {
                    row,
                    field: spec.criterion_field.clone(),
                    value: value.to_string(),
                })
            }
        }
    }
    Ok(out)
}
