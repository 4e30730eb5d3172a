//! CSV ingestion, train-fold preprocessing and cross-validation folds.
//!
//! Preprocessing follows the benchmark protocol: rows with missing cells are
//! dropped, continuous columns and the target are standardized with
//! train-fold statistics, ordinal columns are label-encoded and nominal
//! columns are one-hot encoded.

use metatree_core::{Dataset, FeatureMatrix, Schema};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column spec: {0}")]
    Spec(String),
    #[error("header mismatch: expected column {expected:?} at position {position}, found {found:?}")]
    Header { position: usize, expected: String, found: String },
    #[error("missing column {0:?} in input")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}, column {column:?}: unknown category {value:?}")]
    UnknownCategory { row: usize, column: String, value: String },
    #[error("row {row} has {got} cells, expected {expected}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("no usable rows")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
    Nominal,
    Target,
    /// Present in the file but not used.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordinal: the label order. Nominal: the allowed values (scanned from the
    /// train fold when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind) -> Self {
        Self { name: name.to_string(), kind, categories: None }
    }
}

pub fn validate_spec(columns: &[ColumnSpec]) -> Result<()> {
    let targets = columns.iter().filter(|c| c.kind == ColumnKind::Target).count();
    if targets != 1 {
        return Err(DataError::Spec(format!("expected exactly one target column, found {targets}")));
    }
    let mut seen = std::collections::HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            return Err(DataError::Spec(format!("duplicate column {:?}", c.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(String),
}

/// Typed rows: the used feature columns in spec order plus the target.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub features: Vec<ColumnSpec>,
    pub target: String,
    pub rows: Vec<Vec<Cell>>,
    pub targets: Vec<f64>,
    /// Rows dropped for missing cells.
    pub dropped: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, kind: ColumnKind) -> usize {
        self.features.iter().filter(|c| c.kind == kind).count()
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "N/A" | "nan" | "NaN")
}

fn parse_num(row: usize, column: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::Parse { row, column: column.to_string(), value: value.to_string() })
}

fn parse_cell(row: usize, spec: &ColumnSpec, value: &str) -> Result<Cell> {
    match spec.kind {
        ColumnKind::Continuous | ColumnKind::Target => parse_num(row, &spec.name, value).map(Cell::Num),
        ColumnKind::Ordinal => match &spec.categories {
            Some(levels) => levels
                .iter()
                .position(|l| l == value)
                .map(|i| Cell::Num(i as f64))
                .ok_or_else(|| DataError::UnknownCategory {
                    row,
                    column: spec.name.clone(),
                    value: value.to_string(),
                }),
            None => parse_num(row, &spec.name, value).map(Cell::Num),
        },
        ColumnKind::Nominal => match &spec.categories {
            Some(levels) if !levels.iter().any(|l| l == value) => Err(DataError::UnknownCategory {
                row,
                column: spec.name.clone(),
                value: value.to_string(),
            }),
            _ => Ok(Cell::Cat(value.to_string())),
        },
        ColumnKind::Skip => unreachable!("skipped columns are not parsed"),
    }
}

fn open(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    Ok(buf)
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes)
}

/// Reads a comma-separated file with a header naming every spec column in
/// order. Rows with a missing cell in a used column are dropped.
pub fn load_csv(path: &Path, columns: &[ColumnSpec]) -> Result<RawTable> {
    validate_spec(columns)?;
    parse_table(&open(path)?, columns)
}

pub fn parse_table(bytes: &[u8], columns: &[ColumnSpec]) -> Result<RawTable> {
    validate_spec(columns)?;
    let mut rdr = reader(bytes);
    let header = rdr.headers()?.clone();
    if header.len() != columns.len() {
        return Err(DataError::Width { row: 0, expected: columns.len(), got: header.len() });
    }
    for (position, (found, spec)) in header.iter().zip(columns).enumerate() {
        if found != spec.name {
            return Err(DataError::Header { position, expected: spec.name.clone(), found: found.to_string() });
        }
    }
    let features: Vec<ColumnSpec> = columns
        .iter()
        .filter(|c| !matches!(c.kind, ColumnKind::Target | ColumnKind::Skip))
        .cloned()
        .collect();
    let target_idx = columns.iter().position(|c| c.kind == ColumnKind::Target).unwrap();
    let mut table = RawTable {
        features,
        target: columns[target_idx].name.clone(),
        rows: Vec::new(),
        targets: Vec::new(),
        dropped: 0,
    };
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != columns.len() {
            return Err(DataError::Width { row, expected: columns.len(), got: record.len() });
        }
        let used = columns.iter().zip(record.iter()).filter(|(c, _)| c.kind != ColumnKind::Skip);
        if used.clone().any(|(_, v)| is_missing(v)) {
            table.dropped += 1;
            continue;
        }
        let mut cells = Vec::with_capacity(table.features.len());
        for (spec, value) in used {
            match parse_cell(row, spec, value)? {
                Cell::Num(y) if spec.kind == ColumnKind::Target => table.targets.push(y),
                cell => cells.push(cell),
            }
        }
        table.rows.push(cells);
    }
    Ok(table)
}

/// Reads feature columns by name from a headed CSV, in file order. Extra
/// columns are ignored; missing cells are an error.
pub fn load_features(path: &Path, features: &[ColumnSpec]) -> Result<Vec<Vec<Cell>>> {
    let bytes = open(path)?;
    let mut rdr = reader(&bytes);
    let header = rdr.headers()?.clone();
    let positions: Vec<usize> = features
        .iter()
        .map(|c| header.iter().position(|h| h == c.name).ok_or_else(|| DataError::MissingColumn(c.name.clone())))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut cells = Vec::with_capacity(features.len());
        for (spec, &p) in features.iter().zip(&positions) {
            let value = record.get(p).unwrap_or("");
            if is_missing(value) {
                return Err(DataError::Invalid(format!("row {row}: missing value in column {:?}", spec.name)));
            }
            cells.push(parse_cell(row, spec, value)?);
        }
        rows.push(cells);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    /// `(x − mean)/sd`, or 0 when the train fold is constant.
    Continuous { name: String, mean: f64, sd: f64 },
    Ordinal {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<String>>,
    },
    Nominal { name: String, categories: Vec<String> },
}

/// Train-fold statistics mapping raw rows to model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub columns: Vec<Encoding>,
    pub target_mean: f64,
    pub target_sd: f64,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Outcome of encoding a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub dataset: Dataset,
    /// Table row index of each dataset row.
    pub kept: Vec<usize>,
    /// Rows that could not be encoded, with the reason.
    pub excluded: Vec<(usize, String)>,
}

impl Transformer {
    /// Fits on `rows` of `table`. Standard deviations are population
    /// (divide by n) so the encoded train fold has sd exactly 1.
    pub fn fit(table: &RawTable, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let mut columns = Vec::with_capacity(table.features.len());
        for (j, spec) in table.features.iter().enumerate() {
            let num = |i: &usize| match &table.rows[*i][j] {
                Cell::Num(v) => *v,
                Cell::Cat(_) => unreachable!(),
            };
            columns.push(match spec.kind {
                ColumnKind::Continuous => {
                    let (mean, sd) = mean_sd(rows.iter().map(num));
                    if !(sd > 1e-12 * mean.abs().max(1.0)) {
                        log::warn!("column {:?} is constant on the training rows; encoded as 0", spec.name);
                        Encoding::Continuous { name: spec.name.clone(), mean, sd: 0.0 }
                    } else {
                        Encoding::Continuous { name: spec.name.clone(), mean, sd }
                    }
                }
                ColumnKind::Ordinal => Encoding::Ordinal { name: spec.name.clone(), levels: spec.categories.clone() },
                ColumnKind::Nominal => {
                    let categories = match &spec.categories {
                        Some(c) => c.clone(),
                        None => {
                            let mut seen: Vec<String> = rows
                                .iter()
                                .map(|&i| match &table.rows[i][j] {
                                    Cell::Cat(s) => s.clone(),
                                    Cell::Num(_) => unreachable!(),
                                })
                                .collect();
                            seen.sort();
                            seen.dedup();
                            seen
                        }
                    };
                    Encoding::Nominal { name: spec.name.clone(), categories }
                }
                ColumnKind::Target | ColumnKind::Skip => unreachable!(),
            });
        }
        let (target_mean, sd) = mean_sd(rows.iter().map(|&i| table.targets[i]));
        let target_sd = if sd > 0.0 {
            sd
        } else {
            log::warn!("target is constant on the training rows; left unscaled");
            1.0
        };
        Ok(Self { columns, target_mean, target_sd })
    }

    pub fn schema(&self) -> Schema {
        let continuous = self.columns.iter().filter(|c| !matches!(c, Encoding::Nominal { .. })).count();
        let binary = self
            .columns
            .iter()
            .map(|c| match c {
                Encoding::Nominal { categories, .. } => categories.len(),
                _ => 0,
            })
            .sum();
        Schema::new(continuous, binary)
    }

    /// Encoded feature names in model order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .columns
            .iter()
            .filter_map(|c| match c {
                Encoding::Continuous { name, .. } | Encoding::Ordinal { name, .. } => Some(name.clone()),
                Encoding::Nominal { .. } => None,
            })
            .collect();
        for c in &self.columns {
            if let Encoding::Nominal { name, categories } = c {
                names.extend(categories.iter().map(|v| format!("{name}={v}")));
            }
        }
        names
    }

    /// Continuous and ordinal values first, then the one-hot blocks.
    pub fn encode_row(&self, cells: &[Cell]) -> std::result::Result<Vec<f64>, String> {
        if cells.len() != self.columns.len() {
            return Err(format!("{} cells for {} columns", cells.len(), self.columns.len()));
        }
        let mut head = Vec::new();
        let mut tail = Vec::new();
        for (enc, cell) in self.columns.iter().zip(cells) {
            match (enc, cell) {
                (Encoding::Continuous { sd, .. }, Cell::Num(_)) if *sd == 0.0 => head.push(0.0),
                (Encoding::Continuous { mean, sd, .. }, Cell::Num(v)) => head.push((v - mean) / sd),
                (Encoding::Ordinal { .. }, Cell::Num(v)) => head.push(*v),
                (Encoding::Nominal { name, categories }, Cell::Cat(v)) => {
                    let hot = categories
                        .iter()
                        .position(|c| c == v)
                        .ok_or_else(|| format!("unseen category {v:?} in column {name:?}"))?;
                    tail.extend((0..categories.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
                }
                _ => return Err("cell type does not match the column encoding".into()),
            }
        }
        head.extend(tail);
        Ok(head)
    }

    /// Raw input columns in the order `encode_row` expects.
    pub fn input_columns(&self) -> Vec<ColumnSpec> {
        self.columns
            .iter()
            .map(|c| match c {
                Encoding::Continuous { name, .. } => ColumnSpec::new(name, ColumnKind::Continuous),
                Encoding::Ordinal { name, levels } => {
                    ColumnSpec { name: name.clone(), kind: ColumnKind::Ordinal, categories: levels.clone() }
                }
                Encoding::Nominal { name, .. } => ColumnSpec::new(name, ColumnKind::Nominal),
            })
            .collect()
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_sd
    }

    pub fn unscale_target(&self, z: f64) -> f64 {
        z * self.target_sd + self.target_mean
    }

    /// Encodes `rows`; rows with unseen categories are excluded with a warning.
    pub fn transform(&self, table: &RawTable, rows: &[usize]) -> Result<Encoded> {
        let mut features = FeatureMatrix::new(self.schema());
        let mut targets = Vec::with_capacity(rows.len());
        let mut kept = Vec::with_capacity(rows.len());
        let mut excluded = Vec::new();
        for &i in rows {
            match self.encode_row(&table.rows[i]) {
                Ok(x) => {
                    features.push_row(&x).map_err(|e| DataError::Invalid(e.to_string()))?;
                    targets.push(self.scale_target(table.targets[i]));
                    kept.push(i);
                }
                Err(reason) => {
                    log::warn!("row {i} excluded: {reason}");
                    excluded.push((i, reason));
                }
            }
        }
        let dataset = Dataset::new(features, targets).map_err(|e| DataError::Invalid(e.to_string()))?;
        Ok(Encoded { dataset, kept, excluded })
    }
}

pub fn fit_transform(table: &RawTable, rows: &[usize]) -> Result<(Encoded, Transformer)> {
    let t = Transformer::fit(table, rows)?;
    Ok((t.transform(table, rows)?, t))
}

/// Seeded partition of `0..n` into `k` disjoint folds whose sizes differ by at
/// most one. Indices within a fold are sorted.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(DataError::Invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Builds a spec from a CSV header: `target` is the target, listed columns
/// get their kinds, everything else is continuous.
pub fn spec_from_header(
    path: &Path,
    target: &str,
    nominal: &[String],
    ordinal: &[String],
    skip: &[String],
) -> Result<Vec<ColumnSpec>> {
    let bytes = open(path)?;
    let header = reader(&bytes).headers()?.clone();
    let columns: Vec<ColumnSpec> = header
        .iter()
        .map(|h| {
            let kind = if h == target {
                ColumnKind::Target
            } else if nominal.iter().any(|c| c == h) {
                ColumnKind::Nominal
            } else if ordinal.iter().any(|c| c == h) {
                ColumnKind::Ordinal
            } else if skip.iter().any(|c| c == h) {
                ColumnKind::Skip
            } else {
                ColumnKind::Continuous
            };
            ColumnSpec::new(h, kind)
        })
        .collect();
    for name in std::iter::once(&target.to_string()).chain(nominal).chain(ordinal).chain(skip) {
        if !columns.iter().any(|c| &c.name == name) {
            return Err(DataError::MissingColumn(name.clone()));
        }
    }
    validate_spec(&columns)?;
    Ok(columns)
}
