//! Delimited-text ingestion under a typed column schema.
//!
//! A [`Schema`] names every column of the file and assigns it a
//! [`ColumnKind`]. [`load_table`] parses a file into a [`RawTable`], a compact
//! columnar store: numeric columns as `f64`, everything else as interned
//! labels. Rows with a missing value in any non-ignored column are dropped by
//! default and counted in the table's warnings.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fingerprint::Fingerprinter;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row} (line {line}), column '{column}': {message}")]
    Parse {
        row: usize,
        line: u64,
        column: String,
        message: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Ignored,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Allowed labels for a categorical column. Cells outside the list are
    /// rejected at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            categories: None,
        }
    }
}

fn default_missing_markers() -> Vec<String> {
    vec![String::new(), "?".to_owned(), "NA".to_owned()]
}

fn default_delimiter() -> char {
    ','
}

fn yes() -> bool {
    true
}

/// Column layout and parsing options for a delimited file.
///
/// Serialized as TOML (or JSON when the file ends in `.json`):
///
/// ```toml
/// header = false
/// missing_markers = ["?"]
///
/// [[columns]]
/// name = "age"
/// kind = "numeric"
///
/// [[columns]]
/// name = "workclass"
/// kind = "categorical"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default = "default_missing_markers")]
    pub missing_markers: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Whether the first non-comment record is a header row.
    #[serde(default = "yes")]
    pub header: bool,
    /// Lines starting with this character are skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_prefix: Option<char>,
    #[serde(default = "yes")]
    pub drop_incomplete: bool,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Self {
            columns,
            missing_markers: default_missing_markers(),
            delimiter: default_delimiter(),
            header: true,
            comment_prefix: None,
            drop_incomplete: true,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let schema: Schema = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| IngestError::InvalidSchema(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| IngestError::InvalidSchema(e.to_string()))?
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.columns.is_empty() {
            return Err(IngestError::InvalidSchema("no columns".into()));
        }
        if !self.delimiter.is_ascii() {
            return Err(IngestError::InvalidSchema(format!(
                "delimiter {:?} is not a single ASCII character",
                self.delimiter
            )));
        }
        if let Some(c) = self.comment_prefix {
            if !c.is_ascii() {
                return Err(IngestError::InvalidSchema(format!(
                    "comment prefix {c:?} is not ASCII"
                )));
            }
        }
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(IngestError::InvalidSchema(format!(
                    "duplicate column name '{}'",
                    col.name
                )));
            }
            if let Some(cats) = &col.categories {
                if col.kind != ColumnKind::Categorical {
                    return Err(IngestError::InvalidSchema(format!(
                        "column '{}' declares categories but is not categorical",
                        col.name
                    )));
                }
                let unique: HashSet<_> = cats.iter().collect();
                if unique.len() != cats.len() {
                    return Err(IngestError::InvalidSchema(format!(
                        "column '{}' declares a category twice",
                        col.name
                    )));
                }
            }
        }
        let targets = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Target)
            .count();
        if targets > 1 {
            return Err(IngestError::InvalidSchema(format!(
                "{targets} target columns; at most one is allowed"
            )));
        }
        Ok(())
    }

    fn is_missing(&self, cell: &str) -> bool {
        self.missing_markers.iter().any(|m| m == cell)
    }
}

/// A borrowed view of one table cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell<'a> {
    Number(f64),
    Category(&'a str),
    Missing,
}

/// An owned cell value, used to build tables programmatically.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(f64),
    Category(String),
    Missing,
}

impl Value {
    pub fn as_cell(&self) -> Cell<'_> {
        match self {
            Value::Number(x) => Cell::Number(*x),
            Value::Category(s) => Cell::Category(s),
            Value::Missing => Cell::Missing,
        }
    }
}

const MISSING_CODE: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum ColumnData {
    /// NaN marks a missing cell; present cells are always finite.
    Numeric(Vec<f64>),
    Labels {
        labels: Vec<String>,
        lookup: HashMap<String, u32>,
        codes: Vec<u32>,
    },
}

impl ColumnData {
    fn for_kind(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            _ => ColumnData::Labels {
                labels: Vec::new(),
                lookup: HashMap::new(),
                codes: Vec::new(),
            },
        }
    }

    fn push(&mut self, value: Cell<'_>) {
        match (self, value) {
            (ColumnData::Numeric(v), Cell::Number(x)) => v.push(x),
            (ColumnData::Numeric(v), Cell::Missing) => v.push(f64::NAN),
            (
                ColumnData::Labels {
                    labels,
                    lookup,
                    codes,
                },
                Cell::Category(s),
            ) => {
                let code = match lookup.get(s) {
                    Some(&c) => c,
                    None => {
                        let c = labels.len() as u32;
                        labels.push(s.to_owned());
                        lookup.insert(s.to_owned(), c);
                        c
                    }
                };
                codes.push(code);
            }
            (ColumnData::Labels { codes, .. }, Cell::Missing) => codes.push(MISSING_CODE),
            (_, other) => unreachable!("cell {other:?} does not match column storage"),
        }
    }

    fn get(&self, row: usize) -> Cell<'_> {
        match self {
            ColumnData::Numeric(v) => {
                let x = v[row];
                if x.is_nan() {
                    Cell::Missing
                } else {
                    Cell::Number(x)
                }
            }
            ColumnData::Labels { labels, codes, .. } => match codes[row] {
                MISSING_CODE => Cell::Missing,
                c => Cell::Category(&labels[c as usize]),
            },
        }
    }
}

/// Typed tabular data, stored column-wise.
#[derive(Clone, Debug)]
pub struct RawTable {
    schema: Schema,
    data: Vec<ColumnData>,
    /// 1-based position of each kept row among the data records of its source.
    source_rows: Vec<usize>,
    dropped_incomplete: usize,
    warnings: Vec<String>,
}

impl PartialEq for RawTable {
    fn eq(&self, other: &Self) -> bool {
        self.schema.columns == other.schema.columns
            && self.row_count() == other.row_count()
            && (0..self.row_count()).all(|r| self.row(r) == other.row(r))
    }
}

impl RawTable {
    fn empty(schema: Schema) -> Self {
        let data = schema
            .columns
            .iter()
            .map(|c| ColumnData::for_kind(c.kind))
            .collect();
        Self {
            schema,
            data,
            source_rows: Vec::new(),
            dropped_incomplete: 0,
            warnings: Vec::new(),
        }
    }

    /// Builds a table from owned rows, validating them against the schema the
    /// same way [`load_table`] does (including dropping incomplete rows).
    pub fn from_rows(schema: Schema, rows: &[Vec<Value>]) -> Result<Self, IngestError> {
        schema.validate()?;
        let mut table = Self::empty(schema);
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<Cell<'_>> = row.iter().map(Value::as_cell).collect();
            table.push_checked(&cells, i + 1, (i + 1) as u64)?;
        }
        table.finish()
    }

    /// Builds an all-numeric table from column vectors of equal length.
    pub fn from_numeric_columns(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, IngestError> {
        let specs = names
            .into_iter()
            .map(|n| ColumnSpec::new(n, ColumnKind::Numeric))
            .collect();
        let schema = Schema::new(specs);
        schema.validate()?;
        if columns.len() != schema.columns.len() {
            return Err(IngestError::SchemaMismatch(format!(
                "{} names for {} columns",
                schema.columns.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (spec, col) in schema.columns.iter().zip(&columns) {
            if col.len() != n {
                return Err(IngestError::SchemaMismatch(format!(
                    "column '{}' has {} values, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            if let Some(r) = col.iter().position(|x| !x.is_finite()) {
                return Err(IngestError::Parse {
                    row: r + 1,
                    line: (r + 1) as u64,
                    column: spec.name.clone(),
                    message: "non-finite number".into(),
                });
            }
        }
        let table = Self {
            schema,
            data: columns.into_iter().map(ColumnData::Numeric).collect(),
            source_rows: (1..=n).collect(),
            dropped_incomplete: 0,
            warnings: Vec::new(),
        };
        if n == 0 {
            return Err(IngestError::EmptyTable);
        }
        Ok(table)
    }

    fn push_checked(
        &mut self,
        cells: &[Cell<'_>],
        source_row: usize,
        line: u64,
    ) -> Result<(), IngestError> {
        if cells.len() != self.schema.columns.len() {
            return Err(IngestError::Parse {
                row: source_row,
                line,
                column: "*".into(),
                message: format!(
                    "expected {} fields, found {}",
                    self.schema.columns.len(),
                    cells.len()
                ),
            });
        }
        let mut incomplete = false;
        for (spec, cell) in self.schema.columns.iter().zip(cells) {
            let err = |message: String| IngestError::Parse {
                row: source_row,
                line,
                column: spec.name.clone(),
                message,
            };
            match (spec.kind, cell) {
                (_, Cell::Missing) => incomplete |= spec.kind != ColumnKind::Ignored,
                (ColumnKind::Numeric, Cell::Number(x)) if !x.is_finite() => {
                    return Err(err("non-finite number".into()))
                }
                (ColumnKind::Numeric, Cell::Number(_)) => {}
                (ColumnKind::Numeric, Cell::Category(s)) => {
                    return Err(err(format!("'{s}' is not a number")))
                }
                (_, Cell::Number(x)) => {
                    return Err(err(format!("numeric value {x} in a label column")))
                }
                (ColumnKind::Categorical, Cell::Category(s)) => {
                    if let Some(cats) = &spec.categories {
                        if !cats.iter().any(|c| c == s) {
                            return Err(err(format!("'{s}' is not a declared category")));
                        }
                    }
                }
                (_, Cell::Category(_)) => {}
            }
        }
        if incomplete && self.schema.drop_incomplete {
            self.dropped_incomplete += 1;
            return Ok(());
        }
        for (col, cell) in self.data.iter_mut().zip(cells) {
            col.push(*cell);
        }
        self.source_rows.push(source_row);
        Ok(())
    }

    fn finish(mut self) -> Result<Self, IngestError> {
        if self.dropped_incomplete > 0 {
            self.warnings.push(format!(
                "dropped {} row(s) with missing values",
                self.dropped_incomplete
            ));
        }
        if self.row_count() == 0 {
            return Err(IngestError::EmptyTable);
        }
        Ok(self)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.schema.columns
    }

    pub fn row_count(&self) -> usize {
        self.source_rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.columns.iter().position(|c| c.name == name)
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell<'_> {
        self.data[col].get(row)
    }

    pub fn row(&self, row: usize) -> Vec<Cell<'_>> {
        self.data.iter().map(|c| c.get(row)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<Cell<'_>>> + '_ {
        (0..self.row_count()).map(move |r| self.row(r))
    }

    /// 1-based index of `row` among the data records of the source file.
    pub fn source_row(&self, row: usize) -> usize {
        self.source_rows[row]
    }

    pub fn dropped_incomplete(&self) -> usize {
        self.dropped_incomplete
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Numeric column as a slice; `None` for label columns. Missing cells are NaN.
    pub fn numeric_column(&self, col: usize) -> Option<&[f64]> {
        match &self.data[col] {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Labels { .. } => None,
        }
    }

    /// Labels present in a column, in order of first appearance.
    pub fn observed_labels(&self, col: usize) -> Vec<&str> {
        match &self.data[col] {
            ColumnData::Numeric(_) => Vec::new(),
            ColumnData::Labels { labels, codes, .. } => {
                let mut seen = vec![false; labels.len()];
                let mut out = Vec::new();
                for &c in codes {
                    if c != MISSING_CODE && !seen[c as usize] {
                        seen[c as usize] = true;
                        out.push(labels[c as usize].as_str());
                    }
                }
                out
            }
        }
    }

    /// A new table holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> RawTable {
        let mut out = Self::empty(self.schema.clone());
        for &r in rows {
            for (dst, src) in out.data.iter_mut().zip(&self.data) {
                dst.push(src.get(r));
            }
            out.source_rows.push(self.source_rows[r]);
        }
        out
    }

    /// Content hash over column names, kinds and every cell.
    pub fn fingerprint(&self) -> String {
        let mut h = Fingerprinter::new("raw-table");
        for spec in &self.schema.columns {
            h.str(&spec.name);
            h.str(&format!("{:?}", spec.kind));
        }
        h.u64(self.row_count() as u64);
        for r in 0..self.row_count() {
            for col in &self.data {
                match col.get(r) {
                    Cell::Number(x) => {
                        h.u64(1);
                        h.f64(x);
                    }
                    Cell::Category(s) => {
                        h.u64(2);
                        h.str(s);
                    }
                    Cell::Missing => h.u64(3),
                }
            }
        }
        h.finish()
    }

    /// Writes the table in its schema's delimited format. Missing cells use
    /// the first missing marker.
    pub fn write_delimited<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let io = |e: csv::Error| IngestError::Io {
            path: "<writer>".into(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::WriterBuilder::new()
            .delimiter(self.schema.delimiter as u8)
            .from_writer(writer);
        if self.schema.header {
            w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))
                .map_err(io)?;
        }
        let missing = self
            .schema
            .missing_markers
            .first()
            .cloned()
            .unwrap_or_default();
        for r in 0..self.row_count() {
            let fields: Vec<String> = self
                .row(r)
                .into_iter()
                .map(|c| match c {
                    Cell::Number(x) => format!("{x}"),
                    Cell::Category(s) => s.to_owned(),
                    Cell::Missing => missing.clone(),
                })
                .collect();
            w.write_record(&fields).map_err(io)?;
        }
        w.flush().map_err(|source| IngestError::Io {
            path: "<writer>".into(),
            source,
        })?;
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn reader_for<R: Read>(schema: &Schema, input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(schema.comment_prefix.map(|c| c as u8))
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> IngestError {
    let (row, line) = e
        .position()
        .map_or((0, 0), |p| (p.record() as usize, p.line()));
    IngestError::Parse {
        row,
        line,
        column: "*".into(),
        message: e.to_string(),
    }
}

/// Loads a delimited file under `schema`.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable, IngestError> {
    parse_table(open(path.as_ref())?, schema)
}

/// Parses delimited text from any reader under `schema`.
pub fn parse_table<R: Read>(input: R, schema: &Schema) -> Result<RawTable, IngestError> {
    schema.validate()?;
    let mut reader = reader_for(schema, input);
    let mut table = RawTable::empty(schema.clone());
    let mut header_pending = schema.header;
    let mut data_row = 0usize;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map_or(0, |p| p.line());
        if header_pending {
            header_pending = false;
            let names: Vec<&str> = record.iter().collect();
            let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
            if names != expected {
                return Err(IngestError::SchemaMismatch(format!(
                    "header {names:?} does not match schema columns {expected:?}"
                )));
            }
            continue;
        }
        data_row += 1;
        if record.len() != schema.columns.len() {
            return Err(IngestError::Parse {
                row: data_row,
                line,
                column: "*".into(),
                message: format!(
                    "expected {} fields, found {}",
                    schema.columns.len(),
                    record.len()
                ),
            });
        }
        let cells: Vec<Cell<'_>> = record
            .iter()
            .zip(&schema.columns)
            .map(|(raw, spec)| parse_cell(raw, spec, schema, data_row, line))
            .collect::<Result<_, _>>()?;
        table.push_checked(&cells, data_row, line)?;
    }
    table.finish()
}

fn parse_cell<'a>(
    raw: &'a str,
    spec: &ColumnSpec,
    schema: &Schema,
    row: usize,
    line: u64,
) -> Result<Cell<'a>, IngestError> {
    if schema.is_missing(raw) {
        return Ok(Cell::Missing);
    }
    if spec.kind != ColumnKind::Numeric {
        return Ok(Cell::Category(raw));
    }
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Cell::Number(x)),
        _ => Err(IngestError::Parse {
            row,
            line,
            column: spec.name.clone(),
            message: format!("'{raw}' is not a finite number"),
        }),
    }
}

/// A schema guessed from a file's header and cell contents.
#[derive(Clone, Debug)]
pub struct InferredSchema {
    pub schema: Schema,
    pub warnings: Vec<String>,
}

/// Infers column kinds from a headed file: numeric when every non-missing cell
/// parses as a finite number, categorical otherwise. Tab-delimited files are
/// recognised from the header line.
pub fn infer_schema(path: impl AsRef<Path>) -> Result<InferredSchema, IngestError> {
    let path = path.as_ref();
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
    infer_schema_from_str(&text)
}

pub fn infer_schema_from_str(text: &str) -> Result<InferredSchema, IngestError> {
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let mut schema = Schema::new(Vec::new());
    if first_line.contains('\t') && !first_line.contains(',') {
        schema.delimiter = '\t';
    }
    let mut reader = reader_for(&schema, text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(IngestError::EmptyTable),
    };
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let mut numeric = vec![true; names.len()];
    let mut seen_value = vec![false; names.len()];
    let mut rows = 0usize;
    for record in records {
        let record = record.map_err(csv_error)?;
        rows += 1;
        for (j, cell) in record.iter().enumerate().take(names.len()) {
            if schema.is_missing(cell) {
                continue;
            }
            seen_value[j] = true;
            if numeric[j] && !cell.parse::<f64>().is_ok_and(f64::is_finite) {
                numeric[j] = false;
            }
        }
    }
    if rows == 0 {
        return Err(IngestError::EmptyTable);
    }
    let mut warnings = Vec::new();
    schema.columns = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            if !seen_value[j] {
                warnings.push(format!(
                    "column '{name}' has no non-missing values; inferred as categorical"
                ));
                ColumnSpec {
                    name,
                    kind: ColumnKind::Categorical,
                    categories: Some(Vec::new()),
                }
            } else if numeric[j] {
                ColumnSpec::new(name, ColumnKind::Numeric)
            } else {
                ColumnSpec::new(name, ColumnKind::Categorical)
            }
        })
        .collect();
    schema.validate()?;
    Ok(InferredSchema { schema, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn age_country() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("age", ColumnKind::Numeric),
            ColumnSpec::new("country", ColumnKind::Categorical),
        ])
    }

    #[test]
    fn three_row_table() {
        let csv = "age,country\n39,US\n50,TH\n23,US\n";
        let t = parse_table(csv.as_bytes(), &age_country()).unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(t.cell(1, 0), Cell::Number(50.0));
        assert_eq!(t.cell(1, 1), Cell::Category("TH"));
        assert_eq!(t.observed_labels(1), vec!["US", "TH"]);
    }

    #[test]
    fn malformed_numeric_cell_names_row_and_column() {
        let csv = "age,country\n39,US\nabc,TH\n";
        let err = parse_table(csv.as_bytes(), &age_country()).unwrap_err();
        match err {
            IngestError::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        let csv = "age,country\ninf,US\n";
        assert!(matches!(
            parse_table(csv.as_bytes(), &age_country()),
            Err(IngestError::Parse { .. })
        ));
    }

    #[test]
    fn header_mismatch() {
        let csv = "years,country\n39,US\n";
        assert!(matches!(
            parse_table(csv.as_bytes(), &age_country()),
            Err(IngestError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn empty_table() {
        let csv = "age,country\n";
        assert!(matches!(
            parse_table(csv.as_bytes(), &age_country()),
            Err(IngestError::EmptyTable)
        ));
    }

    #[test]
    fn ragged_row() {
        let csv = "age,country\n39,US,extra\n";
        assert!(matches!(
            parse_table(csv.as_bytes(), &age_country()),
            Err(IngestError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn missing_rows_dropped_and_counted() {
        let csv = "age,country\n39,?\nNA,US\n,US\n41,US\n";
        let t = parse_table(csv.as_bytes(), &age_country()).unwrap();
        assert_eq!(t.row_count(), 1);
        assert_eq!(t.dropped_incomplete(), 3);
        assert_eq!(t.source_row(0), 4);
        assert_eq!(t.warnings().len(), 1);
    }

    #[test]
    fn missing_kept_when_not_dropping() {
        let mut schema = age_country();
        schema.drop_incomplete = false;
        let t = parse_table("age,country\n39,?\n".as_bytes(), &schema).unwrap();
        assert_eq!(t.cell(0, 1), Cell::Missing);
    }

    #[test]
    fn missing_in_ignored_column_keeps_row() {
        let schema = Schema::new(vec![
            ColumnSpec::new("age", ColumnKind::Numeric),
            ColumnSpec::new("note", ColumnKind::Ignored),
        ]);
        let t = parse_table("age,note\n39,?\n".as_bytes(), &schema).unwrap();
        assert_eq!(t.row_count(), 1);
    }

    #[test]
    fn declared_categories_are_enforced() {
        let mut schema = age_country();
        schema.columns[1].categories = Some(vec!["US".into()]);
        let err = parse_table("age,country\n39,TH\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, IngestError::Parse { .. }));
    }

    #[test]
    fn comment_lines_and_whitespace() {
        let mut schema = age_country();
        schema.header = false;
        schema.comment_prefix = Some('|');
        let t = parse_table("|1x3 Cross validator\n 39, US\n\n".as_bytes(), &schema).unwrap();
        assert_eq!(t.row_count(), 1);
        assert_eq!(t.cell(0, 1), Cell::Category("US"));
    }

    #[test]
    fn tab_delimited() {
        let mut schema = age_country();
        schema.delimiter = '\t';
        let t = parse_table("age\tcountry\n39\tUS\n".as_bytes(), &schema).unwrap();
        assert_eq!(t.cell(0, 0), Cell::Number(39.0));
    }

    #[test]
    fn schema_validation() {
        let mut s = age_country();
        s.columns.push(ColumnSpec::new("age", ColumnKind::Numeric));
        assert!(s.validate().is_err());
        let s = Schema::new(vec![
            ColumnSpec::new("a", ColumnKind::Target),
            ColumnSpec::new("b", ColumnKind::Target),
        ]);
        assert!(s.validate().is_err());
        let mut s = age_country();
        s.columns[0].categories = Some(vec![]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn schema_toml_and_json_round_trip() {
        let mut s = age_country();
        s.columns[1].categories = Some(vec!["US".into(), "TH".into()]);
        s.comment_prefix = Some('|');
        s.delimiter = '\t';
        let back: Schema = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        let back: Schema = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn schema_defaults() {
        let s: Schema = toml::from_str(
            r#"
            [[columns]]
            name = "x"
            kind = "numeric"
            "#,
        )
        .unwrap();
        assert!(s.header);
        assert_eq!(s.delimiter, ',');
        assert_eq!(s.missing_markers, vec!["", "?", "NA"]);
    }

    #[test]
    fn infer_numeric_and_categorical() {
        let inferred = infer_schema_from_str("n,t,mixed\n1,a,1\n2,b,one\n").unwrap();
        let kinds: Vec<_> = inferred.schema.columns.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnKind::Numeric,
                ColumnKind::Categorical,
                ColumnKind::Categorical
            ]
        );
        assert!(inferred.warnings.is_empty());
        assert!(inferred.schema.columns.iter().all(|c| c.categories.is_none()));
    }

    #[test]
    fn infer_all_missing_column_warns() {
        let inferred = infer_schema_from_str("a,b\n1,?\n2,\n").unwrap();
        let b = &inferred.schema.columns[1];
        assert_eq!(b.kind, ColumnKind::Categorical);
        assert_eq!(b.categories, Some(vec![]));
        assert_eq!(inferred.warnings.len(), 1);
        assert!(inferred.warnings[0].contains("'b'"));
    }

    #[test]
    fn infer_requires_data_rows() {
        assert!(matches!(
            infer_schema_from_str("a,b\n"),
            Err(IngestError::EmptyTable)
        ));
        assert!(matches!(
            infer_schema_from_str(""),
            Err(IngestError::EmptyTable)
        ));
    }

    #[test]
    fn infer_detects_tabs() {
        let inferred = infer_schema_from_str("a\tb\n1\tx\n").unwrap();
        assert_eq!(inferred.schema.delimiter, '\t');
        assert_eq!(inferred.schema.columns.len(), 2);
    }

    #[test]
    fn subset_preserves_source_rows() {
        let t = parse_table("age,country\n1,A\n2,B\n3,C\n".as_bytes(), &age_country()).unwrap();
        let s = t.subset(&[2, 0]);
        assert_eq!(s.row_count(), 2);
        assert_eq!(s.cell(0, 1), Cell::Category("C"));
        assert_eq!(s.source_row(0), 3);
        assert_eq!(s.observed_labels(1), vec!["C", "A"]);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = parse_table("age,country\n1,A\n".as_bytes(), &age_country()).unwrap();
        let b = parse_table("age,country\n1,B\n".as_bytes(), &age_country()).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
