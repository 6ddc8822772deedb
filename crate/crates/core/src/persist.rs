//! On-disk document formats: processed datasets (JSON manifest + sidecar
//! CSV matrix), trained models, evaluation reports, and explanation bundle
//! directories. All writers are deterministic and all floats round-trip
//! exactly.

use crate::classify::{LabeledMap, UnitLabel};
use crate::error::{Error, Result};
use crate::explain::{ClusterAssignment, ExplanationBundle, Grid, LocalExplanation, StarburstOverlay};
use crate::ingest::{Dataset, FittedPipeline, SignificanceVector};
use crate::quality::QualityReport;
use crate::som::{SomMap, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const DATASET_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
pub const BUNDLE_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Manifest for a processed dataset; the feature matrix lives in the
/// sidecar CSV named by `data_path` (relative to this document).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub scaling: Vec<(f64, f64)>,
    pub significance: Option<SignificanceVector>,
    pub data_path: String,
    /// Fit state recorded with training datasets so the identical transform
    /// can be re-applied later.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<FittedPipeline>,
    /// Run configuration echoed by the producing tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// Write `<stem>.dataset.json` plus `<stem>.data.csv` under `dir`.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    stem: &str,
    dataset: &Dataset,
    pipeline: Option<&FittedPipeline>,
    metadata: Option<serde_json::Value>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let csv_name = format!("{stem}.data.csv");
    let json_path = dir.join(format!("{stem}.dataset.json"));
    let csv_path = dir.join(&csv_name);

    let mut writer = csv::Writer::from_path(&csv_path)?;
    let mut header: Vec<&str> = dataset.feature_names.iter().map(|s| s.as_str()).collect();
    header.push("label");
    writer.write_record(&header)?;
    for i in 0..dataset.num_samples() {
        let mut record = csv::StringRecord::new();
        for &x in dataset.sample(i) {
            record.push_field(&x.to_string());
        }
        record.push_field(&dataset.labels[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    let doc = DatasetDocument {
        version: DATASET_VERSION,
        feature_names: dataset.feature_names.clone(),
        scaling: dataset.scaling.clone(),
        significance: dataset.significance.clone(),
        data_path: csv_name,
        pipeline: pipeline.cloned(),
        metadata,
    };
    write_json(&json_path, &doc)?;
    Ok(json_path)
}

/// Load a dataset document and its sidecar matrix.
pub fn load_dataset(json_path: impl AsRef<Path>) -> Result<(Dataset, DatasetDocument)> {
    let json_path = json_path.as_ref();
    let doc: DatasetDocument = read_json(json_path)?;
    if doc.version != DATASET_VERSION {
        return Err(Error::BadVersion {
            found: doc.version,
            expected: DATASET_VERSION,
        });
    }
    let csv_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&doc.data_path);

    let dim = doc.feature_names.len();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::BadRow {
                path: csv_path.clone(),
                row: row_idx + 1,
                detail: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        for f in 0..dim {
            let tok = record.get(f).unwrap();
            let x: f64 = tok.parse().map_err(|_| Error::BadRow {
                path: csv_path.clone(),
                row: row_idx + 1,
                detail: format!("bad feature value '{tok}'"),
            })?;
            features.push(x);
        }
        let tok = record.get(dim).unwrap();
        let label: u8 = tok.parse().map_err(|_| Error::BadRow {
            path: csv_path.clone(),
            row: row_idx + 1,
            detail: format!("bad label '{tok}'"),
        })?;
        labels.push(label);
    }

    let mut dataset = Dataset::new(doc.feature_names.clone(), doc.scaling.clone(), labels, features)?;
    dataset.significance = doc.significance.clone();
    Ok((dataset, doc))
}

/// Unit-labeling statistics recorded with a trained model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LabelingStats {
    pub num_units: usize,
    /// Units that received at least one training hit.
    pub labeled_units: usize,
    /// Malicious units before and after nearest-unit resolution.
    pub malicious_units_pre_resolve: usize,
    pub malicious_units_resolved: usize,
}

impl LabelingStats {
    pub fn malicious_fraction_pre_resolve(&self) -> f64 {
        self.malicious_units_pre_resolve as f64 / self.num_units as f64
    }

    pub fn malicious_fraction_resolved(&self) -> f64 {
        self.malicious_units_resolved as f64 / self.num_units as f64
    }
}

/// A trained, labeled model plus its quality metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub feature_names: Vec<String>,
    /// Row-major unit weights, one inner array per unit.
    pub weights: Vec<Vec<f64>>,
    pub train_config: TrainConfig,
    pub final_metrics: QualityReport,
    pub unit_labels: Vec<UnitLabel>,
    pub hit_counts: Vec<(usize, usize)>,
    pub labeling: LabelingStats,
    /// Run configuration echoed by the producing tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl ModelDocument {
    pub fn from_parts(
        lm: &LabeledMap,
        feature_names: Vec<String>,
        train_config: TrainConfig,
        final_metrics: QualityReport,
        labeling: LabelingStats,
    ) -> ModelDocument {
        let map = &lm.map;
        let weights = (0..map.num_units())
            .map(|u| map.unit_weights(u).to_vec())
            .collect();
        ModelDocument {
            version: MODEL_VERSION,
            rows: map.rows,
            cols: map.cols,
            dim: map.dim,
            feature_names,
            weights,
            train_config,
            final_metrics,
            unit_labels: lm.unit_labels.clone(),
            hit_counts: lm.hit_counts.clone(),
            labeling,
            metadata: None,
        }
    }

    pub fn labeled_map(&self) -> Result<LabeledMap> {
        let flat: Vec<f64> = self.weights.iter().flatten().copied().collect();
        if flat.len() != self.rows * self.cols * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols * self.dim,
                actual: flat.len(),
            });
        }
        Ok(LabeledMap {
            map: SomMap {
                rows: self.rows,
                cols: self.cols,
                dim: self.dim,
                weights: flat,
            },
            unit_labels: self.unit_labels.clone(),
            hit_counts: self.hit_counts.clone(),
        })
    }
}

pub fn save_model(path: impl AsRef<Path>, doc: &ModelDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let doc: ModelDocument = read_json(path)?;
    if doc.version != MODEL_VERSION {
        return Err(Error::BadVersion {
            found: doc.version,
            expected: MODEL_VERSION,
        });
    }
    Ok(doc)
}

/// File layout of an explanation bundle directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub unit_labels: Vec<UnitLabel>,
    pub umatrix: String,
    pub starburst: String,
    pub clusters: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<String>,
    pub heatmaps: Vec<HeatmapEntry>,
    pub locals: Vec<LocalEntry>,
    /// Run configuration echoed for reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapEntry {
    pub feature: String,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEntry {
    pub sample: usize,
    pub file: String,
}

/// Lowercased, filesystem-safe version of a feature name.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Write a bundle as a directory of JSON artifacts plus `manifest.json`.
pub fn save_bundle(
    dir: impl AsRef<Path>,
    bundle: &ExplanationBundle,
    metadata: Option<serde_json::Value>,
) -> Result<BundleManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_json(dir.join("umatrix.json"), &bundle.umatrix)?;
    write_json(dir.join("starburst.json"), &bundle.starburst)?;
    write_json(dir.join("clusters.json"), &bundle.clusters)?;

    let significance = match &bundle.significance {
        Some(sig) => {
            write_json(dir.join("significance.json"), sig)?;
            Some("significance.json".to_string())
        }
        None => None,
    };

    let mut heatmaps = Vec::with_capacity(bundle.heatmaps.len());
    for (idx, (feature, grid)) in bundle.heatmaps.iter().enumerate() {
        let file = format!("heatmap_{idx:03}_{}.json", slugify(feature));
        write_json(dir.join(&file), grid)?;
        heatmaps.push(HeatmapEntry {
            feature: feature.clone(),
            file,
        });
    }

    let mut locals = Vec::with_capacity(bundle.locals.len());
    for (sample, explanation) in &bundle.locals {
        let file = format!("local_{sample}.json");
        write_json(dir.join(&file), explanation)?;
        locals.push(LocalEntry {
            sample: *sample,
            file,
        });
    }

    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        rows: bundle.umatrix.rows,
        cols: bundle.umatrix.cols,
        k: bundle.clusters.k,
        unit_labels: bundle.unit_labels.clone(),
        umatrix: "umatrix.json".into(),
        starburst: "starburst.json".into(),
        clusters: "clusters.json".into(),
        significance,
        heatmaps,
        locals,
        metadata,
    };
    write_json(dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Read a bundle directory back into memory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(BundleManifest, ExplanationBundle)> {
    let dir = dir.as_ref();
    let manifest: BundleManifest = read_json(dir.join("manifest.json"))?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::BadVersion {
            found: manifest.version,
            expected: BUNDLE_VERSION,
        });
    }
    let umatrix: Grid = read_json(dir.join(&manifest.umatrix))?;
    let starburst: StarburstOverlay = read_json(dir.join(&manifest.starburst))?;
    let clusters: ClusterAssignment = read_json(dir.join(&manifest.clusters))?;
    let significance: Option<SignificanceVector> = match &manifest.significance {
        Some(file) => Some(read_json(dir.join(file))?),
        None => None,
    };
    let mut heatmaps = Vec::with_capacity(manifest.heatmaps.len());
    for entry in &manifest.heatmaps {
        let grid: Grid = read_json(dir.join(&entry.file))?;
        heatmaps.push((entry.feature.clone(), grid));
    }
    let mut locals = Vec::with_capacity(manifest.locals.len());
    for entry in &manifest.locals {
        let explanation: LocalExplanation = read_json(dir.join(&entry.file))?;
        locals.push((entry.sample, explanation));
    }
    let bundle = ExplanationBundle {
        umatrix,
        starburst,
        unit_labels: manifest.unit_labels.clone(),
        clusters,
        heatmaps,
        significance,
        locals,
    };
    Ok((manifest, bundle))
}
