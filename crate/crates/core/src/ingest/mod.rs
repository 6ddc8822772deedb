//! Raw CSV loading, label binarization, one-hot encoding, sanitization,
//! min-max normalization, and variance-based feature selection.
//!
//! The fit path runs on training data and records everything needed to apply
//! the identical transform to test data: categorical vocabularies, per-feature
//! (min, max) scaling, and the selected feature set.

mod schema;

pub use schema::{nsl_kdd_is_categorical, SchemaId, NSL_KDD_CATEGORICAL, NSL_KDD_FEATURES};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Role of a column within a raw table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

/// Column storage: numeric columns are parsed eagerly, categorical and
/// not-yet-binarized label columns stay as strings.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub data: ColumnData,
}

/// A parsed CSV table with schema-assigned column kinds.
///
/// Invariants: all columns have the same length and exactly one column has
/// kind [`ColumnKind::Label`].
#[derive(Debug, Clone)]
pub struct RawTable {
    pub source: SchemaId,
    pub columns: Vec<RawColumn>,
}

impl RawTable {
    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn label_column(&self) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Label)
    }

    fn label_column_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.kind == ColumnKind::Label)
    }

    /// Binary labels, available once [`binarize_labels`] has run.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        let col = self
            .label_column()
            .ok_or_else(|| Error::InvalidArgument("table has no label column".into()))?;
        match &col.data {
            ColumnData::Numeric(v) => v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x == 0.0 {
                        Ok(0u8)
                    } else if x == 1.0 {
                        Ok(1u8)
                    } else {
                        Err(Error::UnrecognizedLabel {
                            label: x.to_string(),
                            row: i + 1,
                        })
                    }
                })
                .collect(),
            ColumnData::Text(_) => Err(Error::InvalidArgument(
                "labels not binarized yet".into(),
            )),
        }
    }
}

/// Per-feature importance scores in [0, 1], one per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceVector {
    pub values: Vec<f64>,
    /// Formula used to compute the scores.
    pub method: String,
}

pub const SIGNIFICANCE_METHOD: &str = "relative-variance";

/// Normalized feature matrix with binary labels and scaling metadata.
///
/// Construction checks the invariants: every value in [0, 1], nothing
/// non-finite, labels in {0, 1}, and all lengths consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// Per-feature (min, max) used for normalization; reused on test data.
    pub scaling: Vec<(f64, f64)>,
    pub significance: Option<SignificanceVector>,
    pub labels: Vec<u8>,
    features: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        scaling: Vec<(f64, f64)>,
        labels: Vec<u8>,
        features: Vec<f64>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        if scaling.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: scaling.len(),
            });
        }
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "feature matrix size {} does not match {} samples x {} features",
                features.len(),
                labels.len(),
                dim
            )));
        }
        for &x in &features {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "feature value {x} outside [0, 1]"
                )));
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(Dataset {
            feature_names,
            scaling,
            significance: None,
            labels,
            features,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Column `f` of the feature matrix.
    pub fn feature_column(&self, f: usize) -> Vec<f64> {
        (0..self.num_samples())
            .map(|i| self.sample(i)[f])
            .collect()
    }
}

fn parse_numeric_token(tok: &str) -> Option<f64> {
    let t = tok.trim();
    if t.is_empty() {
        return Some(f64::NAN);
    }
    match t.to_ascii_lowercase().as_str() {
        "nan" => Some(f64::NAN),
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => t.parse::<f64>().ok(),
    }
}

/// Load a CSV file and assign column kinds per the named schema.
///
/// NSL-KDD files may be headerless (the distributed form); the canonical
/// column names are applied and a trailing difficulty column is dropped.
pub fn load_csv(path: impl AsRef<Path>, schema: SchemaId) -> Result<RawTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Csv(e),
        })?;

    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::HeaderMismatch {
                path: path.to_path_buf(),
                schema: schema.to_string(),
                detail: "file is empty".into(),
            })
        }
    };

    match schema {
        SchemaId::NslKdd => load_nsl_kdd(path, first, records),
        SchemaId::CicIds2017 => load_cic(path, first, records),
        SchemaId::Generic => load_generic(path, first, records),
    }
}

type RecordIter<'a> = csv::StringRecordsIter<'a, std::fs::File>;

fn load_nsl_kdd(path: &Path, first: csv::StringRecord, records: RecordIter) -> Result<RawTable> {
    let has_header = first.get(0).map(str::trim) == Some("duration")
        && first.get(1).map(str::trim) == Some("protocol_type");
    let width = first.len();
    if !(42..=43).contains(&width) {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            schema: SchemaId::NslKdd.to_string(),
            detail: format!("expected 42 or 43 columns, found {width}"),
        });
    }
    if has_header {
        for (i, name) in NSL_KDD_FEATURES.iter().enumerate() {
            if first.get(i).map(str::trim) != Some(*name) {
                return Err(Error::HeaderMismatch {
                    path: path.to_path_buf(),
                    schema: SchemaId::NslKdd.to_string(),
                    detail: format!(
                        "column {} is '{}', expected '{}'",
                        i,
                        first.get(i).unwrap_or(""),
                        name
                    ),
                });
            }
        }
    }

    let mut columns: Vec<RawColumn> = NSL_KDD_FEATURES
        .iter()
        .map(|&name| {
            let kind = if nsl_kdd_is_categorical(name) {
                ColumnKind::Categorical
            } else {
                ColumnKind::Numeric
            };
            RawColumn {
                name: name.to_string(),
                kind,
                data: match kind {
                    ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
                    _ => ColumnData::Text(Vec::new()),
                },
            }
        })
        .collect();
    columns.push(RawColumn {
        name: "label".into(),
        kind: ColumnKind::Label,
        data: ColumnData::Text(Vec::new()),
    });
    // Trailing difficulty column (width 43) is not a feature; ignored below.

    let mut row = 0usize;
    let mut push_record = |record: &csv::StringRecord, row: usize| -> Result<()> {
        if record.len() != width {
            return Err(Error::BadRow {
                path: path.to_path_buf(),
                row,
                detail: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (i, col) in columns.iter_mut().enumerate() {
            let tok = record.get(i).unwrap_or("");
            match &mut col.data {
                ColumnData::Numeric(v) => {
                    let x = parse_numeric_token(tok).ok_or_else(|| Error::BadRow {
                        path: path.to_path_buf(),
                        row,
                        detail: format!("non-numeric value '{tok}' in column '{}'", col.name),
                    })?;
                    v.push(x);
                }
                ColumnData::Text(v) => v.push(tok.trim().to_string()),
            }
        }
        Ok(())
    };

    if !has_header {
        row += 1;
        push_record(&first, row)?;
    }
    for record in records {
        let record = record?;
        row += 1;
        push_record(&record, row)?;
    }

    Ok(RawTable {
        source: SchemaId::NslKdd,
        columns,
    })
}

fn load_cic(path: &Path, header: csv::StringRecord, records: RecordIter) -> Result<RawTable> {
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let label_idx = names
        .iter()
        .position(|n| n.eq_ignore_ascii_case("label"))
        .ok_or_else(|| Error::HeaderMismatch {
            path: path.to_path_buf(),
            schema: SchemaId::CicIds2017.to_string(),
            detail: "no 'Label' column in header".into(),
        })?;

    let mut columns: Vec<RawColumn> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            if i == label_idx {
                RawColumn {
                    name: name.clone(),
                    kind: ColumnKind::Label,
                    data: ColumnData::Text(Vec::new()),
                }
            } else {
                RawColumn {
                    name: name.clone(),
                    kind: ColumnKind::Numeric,
                    data: ColumnData::Numeric(Vec::new()),
                }
            }
        })
        .collect();

    for (row_idx, record) in records.enumerate() {
        let record = record?;
        let row = row_idx + 1;
        if record.len() != columns.len() {
            return Err(Error::BadRow {
                path: path.to_path_buf(),
                row,
                detail: format!(
                    "expected {} fields, found {}",
                    columns.len(),
                    record.len()
                ),
            });
        }
        for (i, col) in columns.iter_mut().enumerate() {
            let tok = record.get(i).unwrap_or("");
            match &mut col.data {
                ColumnData::Numeric(v) => {
                    let x = parse_numeric_token(tok).ok_or_else(|| Error::BadRow {
                        path: path.to_path_buf(),
                        row,
                        detail: format!("non-numeric value '{tok}' in column '{}'", col.name),
                    })?;
                    v.push(x);
                }
                ColumnData::Text(v) => v.push(tok.trim().to_string()),
            }
        }
    }

    Ok(RawTable {
        source: SchemaId::CicIds2017,
        columns,
    })
}

fn load_generic(path: &Path, header: csv::StringRecord, records: RecordIter) -> Result<RawTable> {
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if names.len() < 2 {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            schema: SchemaId::Generic.to_string(),
            detail: "need at least one feature column and a label column".into(),
        });
    }
    let label_idx = names.len() - 1;

    // Collect raw cells first; infer column kinds from the values.
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (row_idx, record) in records.enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::BadRow {
                path: path.to_path_buf(),
                row: row_idx + 1,
                detail: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for (i, tok) in record.iter().enumerate() {
            cells[i].push(tok.trim().to_string());
        }
    }

    let columns = names
        .iter()
        .zip(cells)
        .enumerate()
        .map(|(i, (name, values))| {
            if i == label_idx {
                return RawColumn {
                    name: name.clone(),
                    kind: ColumnKind::Label,
                    data: ColumnData::Text(values),
                };
            }
            let parsed: Option<Vec<f64>> =
                values.iter().map(|t| parse_numeric_token(t)).collect();
            match parsed {
                Some(nums) => RawColumn {
                    name: name.clone(),
                    kind: ColumnKind::Numeric,
                    data: ColumnData::Numeric(nums),
                },
                None => RawColumn {
                    name: name.clone(),
                    kind: ColumnKind::Categorical,
                    data: ColumnData::Text(values),
                },
            }
        })
        .collect();

    Ok(RawTable {
        source: SchemaId::Generic,
        columns,
    })
}

/// Rewrite the label column to {0, 1}: benign/normal maps to 0, everything
/// else to 1.
pub fn binarize_labels(mut table: RawTable) -> Result<RawTable> {
    let source = table.source;
    let idx = table
        .label_column_index()
        .ok_or_else(|| Error::InvalidArgument("table has no label column".into()))?;
    let col = &mut table.columns[idx];
    let binary: Vec<f64> = match &col.data {
        ColumnData::Numeric(v) => v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x == 0.0 || x == 1.0 {
                    Ok(x)
                } else {
                    Err(Error::UnrecognizedLabel {
                        label: x.to_string(),
                        row: i + 1,
                    })
                }
            })
            .collect::<Result<_>>()?,
        ColumnData::Text(v) => v
            .iter()
            .enumerate()
            .map(|(i, s)| binarize_one(source, s, i + 1).map(|b| b as f64))
            .collect::<Result<_>>()?,
    };
    col.data = ColumnData::Numeric(binary);
    Ok(table)
}

fn binarize_one(source: SchemaId, label: &str, row: usize) -> Result<u8> {
    let l = label.trim();
    if l.is_empty() {
        return Err(Error::UnrecognizedLabel {
            label: label.to_string(),
            row,
        });
    }
    match source {
        SchemaId::NslKdd => Ok(if l.eq_ignore_ascii_case("normal") { 0 } else { 1 }),
        SchemaId::CicIds2017 => Ok(if l.eq_ignore_ascii_case("benign") { 0 } else { 1 }),
        SchemaId::Generic => match l.to_ascii_lowercase().as_str() {
            "0" | "benign" | "normal" => Ok(0),
            "1" | "malicious" | "attack" | "anomaly" | "anomalous" => Ok(1),
            _ => Err(Error::UnrecognizedLabel {
                label: label.to_string(),
                row,
            }),
        },
    }
}

/// Categorical vocabularies learned from training data: column name to the
/// sorted set of observed values.
pub type CategoricalVocab = BTreeMap<String, Vec<String>>;

/// Distinct values of every categorical column, sorted.
pub fn build_vocab(table: &RawTable) -> CategoricalVocab {
    let mut vocab = CategoricalVocab::new();
    for col in &table.columns {
        if col.kind == ColumnKind::Categorical {
            if let ColumnData::Text(values) = &col.data {
                let mut distinct: Vec<String> = values.clone();
                distinct.sort();
                distinct.dedup();
                vocab.insert(col.name.clone(), distinct);
            }
        }
    }
    vocab
}

/// Replace each categorical column with one-hot indicator columns named
/// `<col>=<value>`, ordered by value. Vocabulary is taken from the table
/// itself; see [`encode_with_vocab`] for applying a trained vocabulary.
pub fn encode_categoricals(table: RawTable) -> RawTable {
    let vocab = build_vocab(&table);
    encode_with_vocab(table, &vocab)
}

/// One-hot encode with a fixed vocabulary. Values absent from the vocabulary
/// encode as all-zero indicators.
pub fn encode_with_vocab(table: RawTable, vocab: &CategoricalVocab) -> RawTable {
    let num_rows = table.num_rows();
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in table.columns {
        if col.kind != ColumnKind::Categorical {
            columns.push(col);
            continue;
        }
        let ColumnData::Text(values) = &col.data else {
            columns.push(col);
            continue;
        };
        let empty = Vec::new();
        let entries = vocab.get(&col.name).unwrap_or(&empty);
        for value in entries {
            let mut indicator = vec![0.0f64; num_rows];
            for (i, v) in values.iter().enumerate() {
                if v == value {
                    indicator[i] = 1.0;
                }
            }
            columns.push(RawColumn {
                name: format!("{}={}", col.name, value),
                kind: ColumnKind::Numeric,
                data: ColumnData::Numeric(indicator),
            });
        }
    }
    RawTable {
        source: table.source,
        columns,
    }
}

/// Per-column replacement counts from [`sanitize`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SanitizeReport {
    pub columns: Vec<ColumnSanitize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSanitize {
    pub column: String,
    pub nan: usize,
    pub pos_inf: usize,
    pub neg_inf: usize,
}

impl SanitizeReport {
    pub fn total_replaced(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.nan + c.pos_inf + c.neg_inf)
            .sum()
    }
}

/// Replace NaN with 0, +Inf with the column's finite maximum, and -Inf with
/// its finite minimum. A column with rows but no finite value is an error.
pub fn sanitize(mut table: RawTable) -> Result<(RawTable, SanitizeReport)> {
    let mut report = SanitizeReport::default();
    for col in &mut table.columns {
        let ColumnData::Numeric(values) = &mut col.data else {
            continue;
        };
        let mut counts = ColumnSanitize {
            column: col.name.clone(),
            nan: 0,
            pos_inf: 0,
            neg_inf: 0,
        };
        let mut finite_min = f64::INFINITY;
        let mut finite_max = f64::NEG_INFINITY;
        for &x in values.iter() {
            if x.is_finite() {
                finite_min = finite_min.min(x);
                finite_max = finite_max.max(x);
            }
        }
        let any_nonfinite = values.iter().any(|x| !x.is_finite());
        if any_nonfinite && !finite_min.is_finite() {
            return Err(Error::NonFiniteColumn {
                column: col.name.clone(),
            });
        }
        for x in values.iter_mut() {
            if x.is_nan() {
                *x = 0.0;
                counts.nan += 1;
            } else if *x == f64::INFINITY {
                *x = finite_max;
                counts.pos_inf += 1;
            } else if *x == f64::NEG_INFINITY {
                *x = finite_min;
                counts.neg_inf += 1;
            }
        }
        if counts.nan + counts.pos_inf + counts.neg_inf > 0 {
            report.columns.push(counts);
        }
    }
    Ok((table, report))
}

fn scale_value(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Min-max normalize every feature column to [0, 1], fitting (min, max) from
/// this table. Constant columns map to 0 everywhere.
pub fn normalize(table: &RawTable) -> Result<Dataset> {
    let mut names = Vec::new();
    let mut scaling = Vec::new();
    for col in &table.columns {
        if col.kind == ColumnKind::Label {
            continue;
        }
        let ColumnData::Numeric(values) = &col.data else {
            return Err(Error::InvalidArgument(format!(
                "column '{}' is not numeric; encode categoricals first",
                col.name
            )));
        };
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &x in values {
            if !x.is_finite() {
                return Err(Error::NonFiniteColumn {
                    column: col.name.clone(),
                });
            }
            min = min.min(x);
            max = max.max(x);
        }
        if values.is_empty() {
            min = 0.0;
            max = 0.0;
        }
        names.push(col.name.clone());
        scaling.push((min, max));
    }
    normalize_with(table, &names, &scaling)
}

/// Normalize the named columns with previously fitted scaling, clamping to
/// [0, 1]. Applying the fit scaling back to the training table reproduces
/// the training matrix bit-for-bit.
pub fn normalize_with(
    table: &RawTable,
    feature_names: &[String],
    scaling: &[(f64, f64)],
) -> Result<Dataset> {
    if feature_names.len() != scaling.len() {
        return Err(Error::DimensionMismatch {
            expected: feature_names.len(),
            actual: scaling.len(),
        });
    }
    let labels = table.binary_labels()?;
    let num_rows = table.num_rows();
    let dim = feature_names.len();

    let mut column_refs = Vec::with_capacity(dim);
    for name in feature_names {
        let col = table
            .columns
            .iter()
            .find(|c| &c.name == name && c.kind != ColumnKind::Label)
            .ok_or_else(|| Error::FeatureMismatch {
                detail: format!("column '{name}' missing from table"),
            })?;
        let ColumnData::Numeric(values) = &col.data else {
            return Err(Error::InvalidArgument(format!(
                "column '{name}' is not numeric"
            )));
        };
        column_refs.push(values);
    }

    let mut features = vec![0.0f64; num_rows * dim];
    for (f, (values, &(min, max))) in column_refs.iter().zip(scaling).enumerate() {
        for (i, &x) in values.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFiniteColumn {
                    column: feature_names[f].clone(),
                });
            }
            features[i * dim + f] = scale_value(x, min, max);
        }
    }

    Dataset::new(feature_names.to_vec(), scaling.to_vec(), labels, features)
}

/// Per-feature sample variance divided by the maximum per-feature variance,
/// so the highest-variance feature scores 1 and constant features score 0.
pub fn feature_significance(data: &Dataset) -> Result<SignificanceVector> {
    let n = data.num_samples();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "feature significance needs at least 2 samples".into(),
        ));
    }
    let variances: Vec<f64> = (0..data.dim())
        .map(|f| sample_variance(&data.feature_column(f)))
        .collect();
    let max_var = variances.iter().cloned().fold(0.0f64, f64::max);
    let values = if max_var > 0.0 {
        variances.iter().map(|v| v / max_var).collect()
    } else {
        vec![0.0; variances.len()]
    };
    Ok(SignificanceVector {
        values,
        method: SIGNIFICANCE_METHOD.to_string(),
    })
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Keep exactly the features whose significance strictly exceeds the
/// threshold, preserving order. Errors if nothing survives.
pub fn select_features(
    data: &Dataset,
    sig: &SignificanceVector,
    threshold: f64,
) -> Result<Dataset> {
    if sig.values.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: sig.values.len(),
        });
    }
    let keep: Vec<usize> = (0..data.dim())
        .filter(|&f| sig.values[f] > threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::NoFeaturesSelected { threshold });
    }

    let names: Vec<String> = keep.iter().map(|&f| data.feature_names[f].clone()).collect();
    let scaling: Vec<(f64, f64)> = keep.iter().map(|&f| data.scaling[f]).collect();
    let dim = keep.len();
    let mut features = vec![0.0f64; data.num_samples() * dim];
    for i in 0..data.num_samples() {
        let row = data.sample(i);
        for (j, &f) in keep.iter().enumerate() {
            features[i * dim + j] = row[f];
        }
    }
    let mut out = Dataset::new(names, scaling, data.labels.clone(), features)?;
    out.significance = Some(SignificanceVector {
        values: keep.iter().map(|&f| sig.values[f]).collect(),
        method: sig.method.clone(),
    });
    Ok(out)
}

/// Seeded stratified row subsample preserving the class ratio. Requires
/// binarized labels. Returns the table unchanged when `n` covers all rows.
pub fn subsample_stratified(table: &RawTable, n: usize, seed: u64) -> Result<RawTable> {
    let labels = table.binary_labels()?;
    let total = labels.len();
    if n >= total {
        return Ok(table.clone());
    }
    if n == 0 {
        return Err(Error::InvalidArgument("subsample size must be > 0".into()));
    }
    let mut class0: Vec<usize> = Vec::new();
    let mut class1: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            class0.push(i);
        } else {
            class1.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    class0.shuffle(&mut rng);
    class1.shuffle(&mut rng);

    let mut n0 = ((n as f64) * (class0.len() as f64) / (total as f64)).round() as usize;
    n0 = n0.min(class0.len()).min(n);
    let mut n1 = n - n0;
    if n1 > class1.len() {
        // Not enough minority rows; backfill from the other class.
        n0 = (n0 + (n1 - class1.len())).min(class0.len());
        n1 = class1.len();
    }

    let mut picked: Vec<usize> = class0[..n0].iter().chain(class1[..n1].iter()).copied().collect();
    picked.sort_unstable();

    let columns = table
        .columns
        .iter()
        .map(|col| RawColumn {
            name: col.name.clone(),
            kind: col.kind,
            data: match &col.data {
                ColumnData::Numeric(v) => {
                    ColumnData::Numeric(picked.iter().map(|&i| v[i]).collect())
                }
                ColumnData::Text(v) => {
                    ColumnData::Text(picked.iter().map(|&i| v[i].clone()).collect())
                }
            },
        })
        .collect();
    Ok(RawTable {
        source: table.source,
        columns,
    })
}

/// Everything learned from the training table that test data must reuse:
/// vocabularies, the selected feature set, and its scaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub schema: SchemaId,
    pub vocab: CategoricalVocab,
    pub feature_names: Vec<String>,
    pub scaling: Vec<(f64, f64)>,
    pub significance: SignificanceVector,
    pub threshold: f64,
}

/// Output of [`fit_pipeline`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub dataset: Dataset,
    pub fitted: FittedPipeline,
    pub sanitize: SanitizeReport,
    /// Significance of every encoded feature before selection.
    pub significance_all: Vec<(String, f64)>,
}

/// Run the full preprocessing chain on training data:
/// binarize, optionally subsample, one-hot encode, sanitize, normalize,
/// score significance, and select features above the threshold.
pub fn fit_pipeline(
    table: RawTable,
    threshold: f64,
    subsample: Option<(usize, u64)>,
) -> Result<FitResult> {
    let schema = table.source;
    let mut table = binarize_labels(table)?;
    if let Some((n, seed)) = subsample {
        table = subsample_stratified(&table, n, seed)?;
    }
    let vocab = build_vocab(&table);
    let table = encode_with_vocab(table, &vocab);
    let (table, sanitize_report) = sanitize(table)?;
    let full = normalize(&table)?;
    let sig = feature_significance(&full)?;
    let significance_all: Vec<(String, f64)> = full
        .feature_names
        .iter()
        .cloned()
        .zip(sig.values.iter().copied())
        .collect();
    let dataset = select_features(&full, &sig, threshold)?;
    let fitted = FittedPipeline {
        schema,
        vocab,
        feature_names: dataset.feature_names.clone(),
        scaling: dataset.scaling.clone(),
        significance: dataset.significance.clone().expect("set by select_features"),
        threshold,
    };
    Ok(FitResult {
        dataset,
        fitted,
        sanitize: sanitize_report,
        significance_all,
    })
}

impl FittedPipeline {
    /// Apply the trained transform to a test table: same vocabularies, same
    /// feature set, same scaling (values clamped to [0, 1]).
    pub fn transform(&self, table: RawTable) -> Result<(Dataset, SanitizeReport)> {
        let table = binarize_labels(table)?;
        let table = encode_with_vocab(table, &self.vocab);
        let (table, report) = sanitize(table)?;
        let mut dataset = normalize_with(&table, &self.feature_names, &self.scaling)?;
        dataset.significance = Some(self.significance.clone());
        Ok((dataset, report))
    }
}
