//! Dataset loading: CSV / JSONL review dumps into a normalized record stream.
//!
//! Review dumps are dirty, so rows that fail validation are skipped with a
//! per-row report instead of aborting the run; the method downstream is
//! per-row independent. Invalid UTF-8 is replaced, never fatal. Loading is
//! deterministic: the same file yields the identical record sequence.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sentiment::{SentimentTriple, RENORM_TOLERANCE};

/// Input format of a review dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Format::Csv => write!(f, "csv"),
            Format::Jsonl => write!(f, "jsonl"),
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?} (expected csv or jsonl)")),
        }
    }
}

/// Where and how to read a dataset.
///
/// Exactly one of `text_column` / `sentiment_columns` must resolve in the
/// file (declared and present); a declared `rating_column` must be present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: Format,
    pub text_column: Option<String>,
    pub rating_column: Option<String>,
    /// Column names for precomputed (pos, neu, neg) proportions.
    pub sentiment_columns: Option<[String; 3]>,
    /// Number of rating categories; ratings must lie in `1..=rating_scale`.
    pub rating_scale: u32,
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        if self.rating_scale < 2 {
            return Err(Error::config(format!(
                "rating scale must be at least 2, got {}",
                self.rating_scale
            )));
        }
        if self.text_column.is_none() && self.sentiment_columns.is_none() {
            return Err(Error::config(
                "declare a text column or sentiment columns (pos,neu,neg)",
            ));
        }
        Ok(())
    }
}

/// One normalized review: an opaque id (the 1-based data row number), the
/// raw text and/or a precomputed sentiment triple, and the held-out rating.
/// The rating is carried only for evaluation and inference after
/// clustering; it never touches the feature or clustering path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub id: String,
    pub text: Option<String>,
    pub rating: Option<u32>,
    pub precomputed: Option<SentimentTriple>,
}

/// A skipped row and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowSkip {
    pub row: u64,
    pub reason: String,
}

/// What the loader saw: rows read, records emitted, rows skipped.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadSummary {
    pub rows: u64,
    pub loaded: u64,
    pub skipped: Vec<RowSkip>,
}

impl LoadSummary {
    pub fn skipped_count(&self) -> u64 {
        self.skipped.len() as u64
    }
}

/// Which column(s) feed the sentiment provider, after header resolution.
enum SourceColumns {
    Text(usize),
    Sentiment([usize; 3]),
}

/// Reads a dataset into records. Malformed rows (bad ratings, off-simplex
/// triples, empty text, short rows) are skipped and reported in the
/// summary with their 1-based data row numbers.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Vec<ReviewRecord>, LoadSummary)> {
    spec.validate()?;
    let file = open_input(spec)?;
    match spec.format {
        Format::Csv => load_csv(spec, file),
        Format::Jsonl => load_jsonl(spec, file),
    }
}

fn open_input(spec: &DatasetSpec) -> Result<File> {
    File::open(&spec.path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::config(format!("input file {} does not exist", spec.path.display()))
        } else {
            Error::data(&spec.path, format!("cannot open: {e}"))
        }
    })
}

fn lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Parses a rating cell: integers, or floats with zero fractional part
/// (review dumps often store "5.0").
fn parse_rating(raw: &str, scale: u32) -> std::result::Result<Option<u32>, String> {
    let t = raw.trim();
    if t.is_empty() {
        return Ok(None);
    }
    let value = if let Ok(v) = t.parse::<i64>() {
        v
    } else if let Ok(f) = t.parse::<f64>() {
        if f.fract() == 0.0 && f.is_finite() {
            f as i64
        } else {
            return Err(format!("non-integer rating {t:?}"));
        }
    } else {
        return Err(format!("unparseable rating {t:?}"));
    };
    if value < 1 || value > scale as i64 {
        return Err(format!("rating {value} outside 1..={scale}"));
    }
    Ok(Some(value as u32))
}

fn parse_triple_cells(cells: [&str; 3]) -> std::result::Result<SentimentTriple, String> {
    let mut raw = [0.0f64; 3];
    for (slot, cell) in raw.iter_mut().zip(cells) {
        *slot = cell
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("unparseable sentiment value {:?}", cell.trim()))?;
    }
    SentimentTriple::from_raw(raw, RENORM_TOLERANCE).map_err(|e| e.to_string())
}

/// Resolves the sentiment source against the available column names.
/// Exactly one of the declared sources must be present.
fn resolve_source(
    spec: &DatasetSpec,
    find: impl Fn(&str) -> Option<usize>,
) -> Result<SourceColumns> {
    let text = spec.text_column.as_deref().and_then(&find);
    let sentiment = spec.sentiment_columns.as_ref().and_then(|cols| {
        let idx: Vec<usize> = cols.iter().filter_map(|c| find(c)).collect();
        <[usize; 3]>::try_from(idx).ok()
    });
    match (text, sentiment) {
        (Some(_), Some(_)) => Err(Error::config(
            "both the text column and the sentiment columns resolve; declare exactly one source",
        )),
        (Some(t), None) => Ok(SourceColumns::Text(t)),
        (None, Some(s)) => Ok(SourceColumns::Sentiment(s)),
        (None, None) => {
            let mut declared = Vec::new();
            if let Some(c) = &spec.text_column {
                declared.push(format!("text column {c:?}"));
            }
            if let Some(cols) = &spec.sentiment_columns {
                declared.push(format!("sentiment columns {cols:?}"));
            }
            Err(Error::config(format!(
                "no declared sentiment source resolves in the file ({})",
                declared.join(", ")
            )))
        }
    }
}

fn load_csv(spec: &DatasetSpec, file: File) -> Result<(Vec<ReviewRecord>, LoadSummary)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = reader
        .byte_headers()
        .map_err(|e| Error::data(&spec.path, format!("cannot read header: {e}")))?
        .iter()
        .map(lossy)
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let source = resolve_source(spec, find)?;
    let rating_idx = match &spec.rating_column {
        Some(col) => Some(find(col).ok_or_else(|| {
            Error::config(format!("declared rating column {col:?} missing from the file"))
        })?),
        None => None,
    };

    let mut records = Vec::new();
    let mut summary = LoadSummary::default();
    let mut row: u64 = 0;
    for result in reader.byte_records() {
        row += 1;
        summary.rows = row;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                summary.skipped.push(RowSkip {
                    row,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let cell = |idx: usize| record.get(idx).map(lossy);
        match build_record(row, &source, rating_idx, spec.rating_scale, cell) {
            Ok(rec) => {
                records.push(rec);
                summary.loaded += 1;
            }
            Err(reason) => summary.skipped.push(RowSkip { row, reason }),
        }
    }
    Ok((records, summary))
}

/// Shared per-row assembly for both formats; `cell` maps a resolved column
/// index to the row's value, if the row has one.
fn build_record(
    row: u64,
    source: &SourceColumns,
    rating_idx: Option<usize>,
    rating_scale: u32,
    cell: impl Fn(usize) -> Option<String>,
) -> std::result::Result<ReviewRecord, String> {
    let (text, precomputed) = match source {
        SourceColumns::Text(idx) => {
            let text = cell(*idx).ok_or("row too short: missing text field")?;
            if text.trim().is_empty() {
                return Err("empty text".into());
            }
            (Some(text), None)
        }
        SourceColumns::Sentiment([p, u, n]) => {
            let pos = cell(*p).ok_or("row too short: missing pos field")?;
            let neu = cell(*u).ok_or("row too short: missing neu field")?;
            let neg = cell(*n).ok_or("row too short: missing neg field")?;
            let triple = parse_triple_cells([pos.as_str(), neu.as_str(), neg.as_str()])?;
            (None, Some(triple))
        }
    };
    let rating = match rating_idx {
        Some(idx) => {
            let raw = cell(idx).unwrap_or_default();
            parse_rating(&raw, rating_scale)?
        }
        None => None,
    };
    Ok(ReviewRecord {
        id: row.to_string(),
        text,
        rating,
        precomputed,
    })
}

fn load_jsonl(spec: &DatasetSpec, file: File) -> Result<(Vec<ReviewRecord>, LoadSummary)> {
    // read raw lines so invalid UTF-8 can be replaced rather than fatal
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::data(&spec.path, format!("cannot read: {e}")))?;
    let text = String::from_utf8_lossy(&bytes);
    let lines: Vec<&str> = text.lines().collect();

    // resolution comes from the first parseable object line
    let first_object = lines
        .iter()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .find_map(|v| v.as_object().cloned());
    if first_object.is_none() {
        if lines.iter().all(|l| l.trim().is_empty()) {
            return Ok((Vec::new(), LoadSummary::default()));
        }
        return Err(Error::data(&spec.path, "no parseable JSON object line"));
    }
    let keys: Vec<String> = first_object.unwrap().keys().cloned().collect();
    let find = |name: &str| keys.iter().position(|k| k == name);
    let source = resolve_source(spec, find)?;
    let rating_key = match &spec.rating_column {
        Some(col) => {
            if find(col).is_none() {
                return Err(Error::config(format!(
                    "declared rating column {col:?} missing from the file"
                )));
            }
            Some(col.clone())
        }
        None => None,
    };

    let rating_idx = rating_key.as_deref().and_then(find);
    let mut records = Vec::new();
    let mut summary = LoadSummary::default();
    let mut row: u64 = 0;
    for line in &lines {
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        summary.rows = row;
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                summary.skipped.push(RowSkip {
                    row,
                    reason: format!("invalid JSON: {e}"),
                });
                continue;
            }
        };
        let Some(object) = value.as_object() else {
            summary.skipped.push(RowSkip {
                row,
                reason: "line is not a JSON object".into(),
            });
            continue;
        };
        let field = |name: &str| -> Option<String> {
            object.get(name).and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
        };
        let cell = |idx: usize| field(&keys[idx]);
        match build_record(row, &source, rating_idx, spec.rating_scale, cell) {
            Ok(rec) => {
                records.push(rec);
                summary.loaded += 1;
            }
            Err(reason) => summary.skipped.push(RowSkip { row, reason }),
        }
    }
    Ok((records, summary))
}
