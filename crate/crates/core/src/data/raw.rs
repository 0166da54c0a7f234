//! Schema declaration and raw CSV ingestion.
//!
//! A [`Schema`] tags every CSV column with its kind (numerical, binary or
//! n-ary categorical, label, protected attribute). [`load_dataset`] parses a
//! CSV against a schema, keeping missing cells as explicit markers so that
//! row dropping happens later, in preprocessing.

use std::collections::BTreeSet;
use std::path::Path;

use crate::{Error, Result};

/// Role of a raw column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Real-valued feature, z-scored during preprocessing.
    Numerical,
    /// Two-category feature, encoded as a single {-1,1} column.
    Binary,
    /// N-category feature, expanded to N columns with 1 for the active
    /// category and -1 elsewhere.
    NAry,
    /// The binary target column (exactly one per schema).
    Label,
    /// A two-category protected attribute; it is encoded as a {-1,1}
    /// feature like a binary column *and* recorded as the fairness group id.
    Protected,
}

/// Default cell spellings treated as missing values.
pub const DEFAULT_MISSING_VALUES: &[&str] = &["", "?", "NA"];

/// Declares the kind of every column of a CSV file, plus which cell
/// spellings count as missing.
#[derive(Debug, Clone)]
pub struct Schema {
    columns: Vec<(String, ColumnKind)>,
    missing_values: Vec<String>,
}

impl Schema {
    /// Validates and builds a schema from `(name, kind)` pairs.
    ///
    /// Requirements: at least one feature column, exactly one label column,
    /// at most one protected column, unique names.
    pub fn new(columns: Vec<(String, ColumnKind)>) -> Result<Schema> {
        let mut seen = BTreeSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        let count = |k: ColumnKind| columns.iter().filter(|(_, kk)| *kk == k).count();
        if count(ColumnKind::Label) != 1 {
            return Err(Error::Schema(format!(
                "schema must declare exactly one label column, found {}",
                count(ColumnKind::Label)
            )));
        }
        if count(ColumnKind::Protected) > 1 {
            return Err(Error::Schema(
                "schema declares more than one protected column".into(),
            ));
        }
        if columns.len() < 2 {
            return Err(Error::Schema(
                "schema must declare at least one feature column".into(),
            ));
        }
        Ok(Schema {
            columns,
            missing_values: DEFAULT_MISSING_VALUES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        })
    }

    /// Replaces the set of cell spellings treated as missing.
    pub fn with_missing_values(mut self, values: Vec<String>) -> Schema {
        self.missing_values = values;
        self
    }

    /// Declared `(name, kind)` pairs, in declaration order.
    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    /// Kind of the named column, if declared.
    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
    }

    /// Whether a trimmed cell counts as missing.
    pub fn is_missing(&self, cell: &str) -> bool {
        self.missing_values.iter().any(|m| m == cell)
    }
}

/// Fluent constructor for [`Schema`], convenient in tests and fixtures.
#[derive(Debug, Default)]
pub struct SchemaBuilder {
    columns: Vec<(String, ColumnKind)>,
    missing_values: Option<Vec<String>>,
}

impl SchemaBuilder {
    pub fn new() -> SchemaBuilder {
        SchemaBuilder::default()
    }

    fn push_all(mut self, names: &[&str], kind: ColumnKind) -> Self {
        for n in names {
            self.columns.push((n.to_string(), kind));
        }
        self
    }

    pub fn numerical(self, names: &[&str]) -> Self {
        self.push_all(names, ColumnKind::Numerical)
    }

    pub fn binary(self, names: &[&str]) -> Self {
        self.push_all(names, ColumnKind::Binary)
    }

    pub fn nary(self, names: &[&str]) -> Self {
        self.push_all(names, ColumnKind::NAry)
    }

    pub fn label(self, name: &str) -> Self {
        self.push_all(&[name], ColumnKind::Label)
    }

    pub fn protected(self, name: &str) -> Self {
        self.push_all(&[name], ColumnKind::Protected)
    }

    pub fn missing_values(mut self, values: &[&str]) -> Self {
        self.missing_values = Some(values.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn build(self) -> Result<Schema> {
        let schema = Schema::new(self.columns)?;
        Ok(match self.missing_values {
            Some(v) => schema.with_missing_values(v),
            None => schema,
        })
    }
}

/// One parsed CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum RawCell {
    /// The cell matched one of the schema's missing-value spellings.
    Missing,
    /// Parsed value of a numerical column.
    Number(f64),
    /// Verbatim (trimmed) value of a categorical/label/protected column.
    Text(String),
}

/// A parsed but not yet preprocessed dataset. Column order follows the CSV
/// header; every row has exactly one cell per column.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub name: String,
    schema: Schema,
    /// `(name, kind)` per column, in CSV header order.
    columns: Vec<(String, ColumnKind)>,
    rows: Vec<Vec<RawCell>>,
}

impl RawDataset {
    /// `(name, kind)` pairs in CSV header order.
    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Cells of row `i`, aligned with [`RawDataset::columns`].
    pub fn row(&self, i: usize) -> &[RawCell] {
        &self.rows[i]
    }

    /// Index of the named column in CSV order.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    /// Index of the single label column.
    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|(_, k)| *k == ColumnKind::Label)
            .expect("schema guarantees one label column")
    }

    /// Indices of rows that contain no missing cell.
    pub fn complete_row_indices(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| !self.rows[i].iter().any(|c| matches!(c, RawCell::Missing)))
            .collect()
    }

    /// New raw dataset keeping only the rows listed in `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> RawDataset {
        RawDataset {
            name: self.name.clone(),
            schema: self.schema.clone(),
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Parses a CSV file against a schema.
///
/// The header must contain exactly the schema's columns (any order). Cells
/// matching a missing-value spelling are kept as [`RawCell::Missing`];
/// dropping rows is the preprocessor's job. Numerical cells must parse as
/// floats. The dataset is named after the file stem.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let mut columns = Vec::with_capacity(headers.len());
    for h in &headers {
        match schema.kind_of(h) {
            Some(kind) => columns.push((h.clone(), kind)),
            None => {
                return Err(Error::Schema(format!(
                    "header column `{h}` is not declared in the schema"
                )))
            }
        }
    }
    for (name, _) in schema.columns() {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Schema(format!(
                "schema column `{name}` is missing from the header"
            )));
        }
    }

    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if record.len() != columns.len() {
            return Err(Error::Csv {
                path: path.display().to_string(),
                message: format!(
                    "row {} has {} cells, expected {}",
                    row_idx + 2,
                    record.len(),
                    columns.len()
                ),
            });
        }
        let mut cells = Vec::with_capacity(columns.len());
        for (cell, (name, kind)) in record.iter().zip(&columns) {
            if schema.is_missing(cell) {
                cells.push(RawCell::Missing);
            } else if *kind == ColumnKind::Numerical {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Data(format!(
                        "non-numeric value `{cell}` in numerical column `{name}` (row {})",
                        row_idx + 2
                    ))
                })?;
                cells.push(RawCell::Number(v));
            } else {
                cells.push(RawCell::Text(cell.to_string()));
            }
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "no rows in `{}`",
            path.display()
        )));
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(RawDataset {
        name,
        schema: schema.clone(),
        columns,
        rows,
    })
}
