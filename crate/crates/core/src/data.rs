//! Tabular observational data: ingestion, preprocessing and batch sampling.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Default cutoff for the multicollinearity filter.
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denotation: Option<String>,
}

impl Variable {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            denotation: None,
        }
    }

    /// Denotation when present, otherwise the name.
    pub fn label(&self) -> &str {
        self.denotation.as_deref().unwrap_or(&self.name)
    }
}

/// Ordered variable metadata; the order is the column order of every matrix
/// derived from the dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VariableTable {
    variables: Vec<Variable>,
}

impl VariableTable {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Validation(format!("duplicate variable name `{}`", v.name)));
            }
        }
        Ok(Self { variables })
    }

    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(names.into_iter().map(Variable::continuous).collect())
    }

    /// `x0, x1, …` continuous variables.
    pub fn numbered(d: usize) -> Self {
        Self {
            variables: (0..d).map(|i| Variable::continuous(format!("x{i}"))).collect(),
        }
    }

    /// Reads a schema file: `{"variables": [{"name", "kind", "denotation"?}, …]}`.
    pub fn from_schema_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("cannot read schema {}: {e}", path.display())))?;
        let table: VariableTable = serde_json::from_str(&text)
            .map_err(|e| Error::Ingest(format!("malformed schema {}: {e}", path.display())))?;
        Self::new(table.variables)
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Variable> {
        self.variables.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Variable> {
        self.variables.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            variables: keep.iter().map(|&i| self.variables[i].clone()).collect(),
        }
    }
}

impl std::ops::Index<usize> for VariableTable {
    type Output = Variable;

    fn index(&self, i: usize) -> &Variable {
        &self.variables[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }
}

/// Bookkeeping surfaced in reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataNotes {
    /// Rows dropped at ingestion because a cell was empty.
    pub dropped_rows: usize,
    /// Columns removed by configuration or by the multicollinearity filter.
    pub dropped_columns: Vec<String>,
    /// Columns with zero variance (correlation and z-score are degenerate).
    pub constant_columns: Vec<String>,
}

/// `m` samples of `d` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: VariableTable,
    columns: Vec<Column>,
    codebooks: BTreeMap<String, Vec<String>>,
    notes: DataNotes,
}

impl Dataset {
    /// Wraps an `m×d` numeric matrix.
    pub fn from_matrix(samples: &Matrix, variables: VariableTable) -> Result<Self> {
        if samples.cols() != variables.len() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: samples.shape(),
                rhs: (variables.len(), 0),
            });
        }
        if samples.rows() == 0 {
            return Err(Error::Ingest("dataset has no rows".into()));
        }
        let columns = (0..samples.cols()).map(|j| Column::Numeric(samples.column(j))).collect();
        Ok(Self {
            variables,
            columns,
            codebooks: BTreeMap::new(),
            notes: DataNotes::default(),
        })
    }

    /// Builds from numeric columns of equal length.
    pub fn from_columns(columns: Vec<Vec<f64>>, variables: VariableTable) -> Result<Self> {
        if columns.len() != variables.len() {
            return Err(Error::usage("column count differs from variable count"));
        }
        let m = columns.first().map_or(0, Vec::len);
        if m == 0 || columns.iter().any(|c| c.len() != m) {
            return Err(Error::Ingest("columns must be non-empty and of equal length".into()));
        }
        Ok(Self {
            variables,
            columns: columns.into_iter().map(Column::Numeric).collect(),
            codebooks: BTreeMap::new(),
            notes: DataNotes::default(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn variables(&self) -> &VariableTable {
        &self.variables
    }

    pub fn notes(&self) -> &DataNotes {
        &self.notes
    }

    pub fn notes_mut(&mut self) -> &mut DataNotes {
        &mut self.notes
    }

    /// Integer-code mapping of an encoded categorical column (code = position).
    pub fn codebook(&self, name: &str) -> Option<&[String]> {
        self.codebooks.get(name).map(Vec::as_slice)
    }

    /// Numeric values of column `j`; `None` for a not-yet-encoded text column.
    pub fn column(&self, j: usize) -> Option<&[f64]> {
        match self.columns.get(j)? {
            Column::Numeric(v) => Some(v),
            Column::Text(_) => None,
        }
    }

    pub fn text_column(&self, j: usize) -> Option<&[String]> {
        match self.columns.get(j)? {
            Column::Text(v) => Some(v),
            Column::Numeric(_) => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.columns.iter().all(|c| matches!(c, Column::Numeric(_)))
    }

    fn numeric_columns(&self) -> Result<Vec<&[f64]>> {
        (0..self.n_vars())
            .map(|j| {
                self.column(j).ok_or_else(|| {
                    Error::usage(format!(
                        "column `{}` is categorical text; encode categoricals first",
                        self.variables[j].name
                    ))
                })
            })
            .collect()
    }

    /// The `m×d` sample matrix.
    pub fn samples(&self) -> Result<Matrix> {
        let cols = self.numeric_columns()?;
        let (m, d) = (self.n_samples(), self.n_vars());
        Ok(Matrix::from_fn(m, d, |i, j| cols[j][i]))
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select(&self, keep: &[usize]) -> Dataset {
        Dataset {
            variables: self.variables.subset(keep),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            codebooks: self.codebooks.clone(),
            notes: self.notes.clone(),
        }
    }

    /// Removes columns by name; unknown names are a validation error.
    pub fn drop_columns(&self, names: &[String]) -> Result<Dataset> {
        for n in names {
            if self.variables.index_of(n).is_none() {
                return Err(Error::Validation(format!("cannot drop unknown column `{n}`")));
            }
        }
        let keep: Vec<usize> = (0..self.n_vars())
            .filter(|&j| !names.contains(&self.variables[j].name))
            .collect();
        let mut out = self.select(&keep);
        out.notes.dropped_columns.extend(names.iter().cloned());
        Ok(out)
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV file. With `schema`, the schema's columns are selected
/// by name (in schema order) and their declared kinds enforced; otherwise
/// every column is loaded and a column is categorical when any cell is
/// non-numeric. Rows with an empty cell are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, schema: Option<&VariableTable>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    read_csv(&bytes, schema)
}

/// [`load_csv`] over an in-memory buffer.
pub fn read_csv(bytes: &[u8], schema: Option<&VariableTable>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .byte_headers()
        .map_err(|e| Error::Ingest(format!("cannot read header row: {e}")))?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Ingest("missing header row".into()));
    }

    let (source, variables): (Vec<usize>, Option<VariableTable>) = match schema {
        Some(table) => {
            let mut idx = Vec::with_capacity(table.len());
            for v in table.iter() {
                let pos = header
                    .iter()
                    .position(|h| *h == v.name)
                    .ok_or_else(|| Error::Ingest(format!("schema column `{}` not found in header", v.name)))?;
                idx.push(pos);
            }
            (idx, Some(table.clone()))
        }
        None => {
            let mut seen = HashMap::new();
            for (i, h) in header.iter().enumerate() {
                if let Some(prev) = seen.insert(h.as_str(), i) {
                    return Err(Error::Ingest(format!(
                        "duplicate header `{h}` in columns {prev} and {i}"
                    )));
                }
            }
            ((0..header.len()).collect(), None)
        }
    };

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); source.len()];
    let mut dropped = 0usize;
    for (row_idx, record) in reader.byte_records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| Error::Ingest(format!("data row {row_idx} (line {line}): {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Ingest(format!(
                "data row {row_idx} (line {line}) has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let cells: Vec<String> = source
            .iter()
            .map(|&c| String::from_utf8_lossy(&record[c]).trim().to_string())
            .collect();
        if cells.iter().any(String::is_empty) {
            dropped += 1;
            continue;
        }
        for (col, cell) in raw.iter_mut().zip(cells) {
            col.push(cell);
        }
    }
    if raw.first().map_or(true, Vec::is_empty) {
        return Err(Error::Ingest(format!(
            "no complete data rows ({dropped} rows dropped for missing cells)"
        )));
    }

    let mut columns = Vec::with_capacity(raw.len());
    let mut vars = Vec::with_capacity(raw.len());
    for (k, cells) in raw.into_iter().enumerate() {
        let numeric: Option<Vec<f64>> = cells.iter().map(|c| parse_number(c)).collect();
        match &variables {
            Some(table) => {
                let v = table[k].clone();
                match (v.kind, numeric) {
                    (VariableKind::Continuous, Some(vals)) => columns.push(Column::Numeric(vals)),
                    (VariableKind::Continuous, None) => {
                        let row = cells.iter().position(|c| parse_number(c).is_none()).unwrap_or(0);
                        return Err(Error::Ingest(format!(
                            "column `{}` is declared continuous but complete row {row} holds `{}`",
                            v.name, cells[row]
                        )));
                    }
                    (VariableKind::Categorical, _) => columns.push(Column::Text(cells)),
                }
                vars.push(v);
            }
            None => {
                let name = header[source[k]].clone();
                match numeric {
                    Some(vals) => {
                        columns.push(Column::Numeric(vals));
                        vars.push(Variable::continuous(name));
                    }
                    None => {
                        columns.push(Column::Text(cells));
                        vars.push(Variable {
                            name,
                            kind: VariableKind::Categorical,
                            denotation: None,
                        });
                    }
                }
            }
        }
    }
    Ok(Dataset {
        variables: VariableTable::new(vars)?,
        columns,
        codebooks: BTreeMap::new(),
        notes: DataNotes {
            dropped_rows: dropped,
            ..DataNotes::default()
        },
    })
}

/// Replaces every categorical column by integer codes assigned in order of
/// first appearance. Categorical columns that were read as numbers are
/// re-coded the same way so codes are always `0..k`.
pub fn encode_categoricals(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for j in 0..out.n_vars() {
        if out.variables[j].kind != VariableKind::Categorical {
            continue;
        }
        let labels: Vec<String> = match &out.columns[j] {
            Column::Text(v) => v.clone(),
            Column::Numeric(v) if out.codebooks.contains_key(&out.variables[j].name) => continue,
            Column::Numeric(v) => v.iter().map(|x| x.to_string()).collect(),
        };
        let mut book: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let codes = labels
            .iter()
            .map(|l| {
                let next = book.len();
                let code = *lookup.entry(l.clone()).or_insert_with(|| {
                    book.push(l.clone());
                    next
                });
                code as f64
            })
            .collect();
        out.columns[j] = Column::Numeric(codes);
        out.codebooks.insert(out.variables[j].name.clone(), book);
    }
    out
}

/// Maps integer codes back to labels using a column's codebook.
pub fn decode_column(ds: &Dataset, name: &str, codes: &[f64]) -> Option<Vec<String>> {
    let book = ds.codebook(name)?;
    codes
        .iter()
        .map(|&c| {
            let k = c as usize;
            (c >= 0.0 && c.fract() == 0.0).then(|| book.get(k).cloned()).flatten()
        })
        .collect()
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Pearson correlations plus the columns flagged as constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlations {
    pub matrix: Matrix,
    pub constant_columns: Vec<usize>,
}

/// Pearson correlation between two equal-length columns; 0 when either is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Symmetric Pearson matrix with unit diagonal. Constant columns correlate 0
/// with everything else and are flagged.
pub fn correlation_matrix(ds: &Dataset) -> Result<Correlations> {
    if ds.n_samples() < 2 {
        return Err(Error::usage("correlation needs at least two samples"));
    }
    let cols = ds.numeric_columns()?;
    let d = cols.len();
    let constant_columns: Vec<usize> = (0..d).filter(|&j| cols[j].iter().all(|&v| v == cols[j][0])).collect();
    let mut matrix = Matrix::identity(d);
    for i in 0..d {
        for j in i + 1..d {
            let r = pearson(cols[i], cols[j]);
            matrix.set(i, j, r);
            matrix.set(j, i, r);
        }
    }
    Ok(Correlations {
        matrix,
        constant_columns,
    })
}

/// Preprocessing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub drop_columns: Vec<String>,
    pub correlation_threshold: f64,
    pub standardize: bool,
    pub target: Option<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            drop_columns: Vec::new(),
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
            standardize: true,
            target: None,
        }
    }
}

/// Drops redundant columns. Columns are visited in canonical order and a
/// column is dropped when `|r| > threshold` against any column already kept
/// (or when it duplicates one exactly). The target is kept first, so the
/// filter never removes it.
pub fn multicollinearity_filter(ds: &Dataset, cfg: &PreprocessConfig) -> Result<(Dataset, Vec<String>)> {
    let threshold = cfg.correlation_threshold;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Validation(format!(
            "correlation threshold {threshold} outside (0, 1]"
        )));
    }
    let target = match &cfg.target {
        Some(t) => Some(
            ds.variables
                .index_of(t)
                .ok_or_else(|| Error::Validation(format!("target `{t}` not among the columns")))?,
        ),
        None => None,
    };
    let corr = correlation_matrix(ds)?.matrix;
    let cols = ds.numeric_columns()?;
    let mut kept: Vec<usize> = target.into_iter().collect();
    let mut dropped = Vec::new();
    for j in 0..ds.n_vars() {
        if Some(j) == target {
            continue;
        }
        let redundant = kept
            .iter()
            .any(|&i| corr.get(i, j).abs() > threshold || cols[i] == cols[j]);
        if redundant {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }
    kept.sort_unstable();
    let names: Vec<String> = dropped.iter().map(|&j| ds.variables[j].name.clone()).collect();
    let mut out = ds.select(&kept);
    out.notes.dropped_columns.extend(names.iter().cloned());
    Ok((out, names))
}

/// Z-scores every column with the sample standard deviation. Constant
/// columns become zeros and are flagged in the notes.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    if ds.n_samples() < 2 {
        return Err(Error::usage("standardization needs at least two samples"));
    }
    ds.numeric_columns()?;
    let mut out = ds.clone();
    let mut constant = Vec::new();
    for j in 0..out.n_vars() {
        let Column::Numeric(values) = &mut out.columns[j] else {
            unreachable!("checked numeric above")
        };
        let (mean, std) = mean_std(values);
        if std == 0.0 || !std.is_finite() {
            values.iter_mut().for_each(|v| *v = 0.0);
            constant.push(out.variables[j].name.clone());
        } else {
            values.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    for name in constant {
        if !out.notes.constant_columns.contains(&name) {
            out.notes.constant_columns.push(name);
        }
    }
    Ok(out)
}

/// Draws `s` distinct rows and returns them transposed as a `d×s` matrix, so
/// each variable is one row.
pub fn sample_batch_with<R: Rng + ?Sized>(ds: &Dataset, s: usize, rng: &mut R) -> Result<Matrix> {
    let m = ds.n_samples();
    if s == 0 || s > m {
        return Err(Error::usage(format!("batch size {s} must be in 1..={m}")));
    }
    let cols = ds.numeric_columns()?;
    let rows = index::sample(rng, m, s).into_vec();
    Ok(Matrix::from_fn(cols.len(), s, |j, k| cols[j][rows[k]]))
}

/// [`sample_batch_with`] seeded from `seed`.
pub fn sample_batch(ds: &Dataset, s: usize, seed: u64) -> Result<Matrix> {
    sample_batch_with(ds, s, &mut ChaCha8Rng::seed_from_u64(seed))
}
