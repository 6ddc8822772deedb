//! The five pipeline subcommands. Each one reads its inputs from the output
//! directory of the previous phase, so every phase is independently
//! inspectable and re-runnable.

use crate::config::{ensure_out_dir, out_path, RunConfig};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use xsom_core::classify::{self, LabeledMap, UnitLabel};
use xsom_core::explain::{self, ExplanationBundle, Grid};
use xsom_core::ingest::{self, Dataset};
use xsom_core::persist::{self, BundleManifest, LabelingStats, ModelDocument};
use xsom_core::quality;
use xsom_core::render::{render_bars, render_grid, ChartStyle, RenderSpec};
use xsom_core::som::{self, SomMap, TrainConfig};

/// Config echo written into every output manifest.
fn run_metadata(config: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "tool": "xsom",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": config,
    })
}

#[derive(Serialize)]
struct SignificanceReport<'a> {
    method: &'a str,
    threshold: f64,
    features: Vec<SignificanceEntry>,
}

#[derive(Serialize)]
struct SignificanceEntry {
    name: String,
    significance: f64,
    selected: bool,
}

pub fn preprocess(config: &RunConfig) -> Result<()> {
    let schema = config.schema_id()?;
    let train_csv = config
        .train_csv
        .as_ref()
        .context("no training CSV; set train_csv in the config or pass --train-csv")?;
    ensure_out_dir(config)?;

    // All artifacts are written before anything is printed, so a closed
    // stdout pipe cannot truncate the pipeline's outputs.
    let table = ingest::load_csv(train_csv, schema)?;
    let rows_in = table.num_rows();
    let fit = ingest::fit_pipeline(
        table,
        config.threshold,
        config.sample.map(|n| (n, config.seed)),
    )?;
    let train_path = persist::save_dataset(
        &config.out_dir,
        "train",
        &fit.dataset,
        Some(&fit.fitted),
        Some(run_metadata(config)),
    )?;

    let report = SignificanceReport {
        method: ingest::SIGNIFICANCE_METHOD,
        threshold: config.threshold,
        features: fit
            .significance_all
            .iter()
            .map(|(name, sig)| SignificanceEntry {
                name: name.clone(),
                significance: *sig,
                selected: *sig > config.threshold,
            })
            .collect(),
    };
    persist::write_json(out_path(config, "significance.json"), &report)?;

    let test_result = match &config.test_csv {
        Some(test_csv) => {
            let table = ingest::load_csv(test_csv, schema)?;
            let (test_ds, test_sanitize) = fit.fitted.transform(table)?;
            let test_path = persist::save_dataset(
                &config.out_dir,
                "test",
                &test_ds,
                None,
                Some(run_metadata(config)),
            )?;
            Some((test_path, test_ds.num_samples(), test_sanitize))
        }
        None => None,
    };

    println!(
        "preprocess: {} rows in, {} used, {} of {} features selected (threshold {})",
        rows_in,
        fit.dataset.num_samples(),
        fit.dataset.dim(),
        fit.significance_all.len(),
        config.threshold,
    );
    for col in &fit.sanitize.columns {
        println!(
            "  sanitized '{}': {} NaN, {} +Inf, {} -Inf",
            col.column, col.nan, col.pos_inf, col.neg_inf
        );
    }
    println!("selected features:");
    for name in &fit.dataset.feature_names {
        println!("  {name}");
    }
    println!("wrote {}", train_path.display());
    if let Some((test_path, rows, test_sanitize)) = test_result {
        if test_sanitize.total_replaced() > 0 {
            println!(
                "  test sanitize replaced {} values",
                test_sanitize.total_replaced()
            );
        }
        println!("wrote {} ({rows} rows)", test_path.display());
    }
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<()> {
    let train_json = out_path(config, "train.dataset.json");
    let (data, _) = persist::load_dataset(&train_json)
        .with_context(|| format!("cannot load {}; run preprocess first", train_json.display()))?;
    if data.num_samples() == 0 {
        bail!("training dataset is empty");
    }

    let total_steps = config.total_steps(data.num_samples())?;
    let mut train_config = TrainConfig::new(total_steps, config.lr0, config.radius0(), config.seed);
    train_config.trace_every = config.trace_every;
    train_config.validate()?;

    let map = SomMap::random(config.map_rows, config.map_cols, data.dim(), config.seed)?;
    println!(
        "training {}x{} map on {} samples x {} features for {} steps (lr0 {}, radius0 {})",
        config.map_rows,
        config.map_cols,
        data.num_samples(),
        data.dim(),
        total_steps,
        train_config.lr0,
        train_config.radius0,
    );
    let (trained, trace) = som::train(&map, &data, &train_config)?;

    let metrics = quality::quality_report(&trained, &data, config.confidence)?;
    let labeled = classify::label_units(&trained, &data)?;
    let labeled_units = labeled
        .unit_labels
        .iter()
        .filter(|l| **l != UnitLabel::Unlabeled)
        .count();
    let malicious_pre = labeled
        .unit_labels
        .iter()
        .filter(|l| **l == UnitLabel::Malicious)
        .count();
    let resolved = classify::resolve_unlabeled(labeled)?;
    let malicious_post = resolved
        .unit_labels
        .iter()
        .filter(|l| **l == UnitLabel::Malicious)
        .count();
    let stats = LabelingStats {
        num_units: resolved.map.num_units(),
        labeled_units,
        malicious_units_pre_resolve: malicious_pre,
        malicious_units_resolved: malicious_post,
    };

    let mut doc = ModelDocument::from_parts(
        &resolved,
        data.feature_names.clone(),
        train_config,
        metrics.clone(),
        stats,
    );
    doc.metadata = Some(run_metadata(config));
    let model_path = out_path(config, "model.json");
    persist::save_model(&model_path, &doc)?;

    println!("quality:");
    println!("  quantization error    {:.6}", metrics.quantization_error);
    println!("  topographic error     {:.6}", metrics.topographic_error);
    println!("  topographic accuracy  {:.6}", metrics.topographic_accuracy);
    println!("  embedding accuracy    {:.6}", metrics.embedding_accuracy);
    println!("  convergence index     {:.6}", metrics.convergence_index);
    println!(
        "labeling: {}/{} units hit, {:.1}% malicious before resolve, {:.1}% after",
        stats.labeled_units,
        stats.num_units,
        100.0 * stats.malicious_fraction_pre_resolve(),
        100.0 * stats.malicious_fraction_resolved(),
    );
    if let Some(last) = trace.checkpoints.last() {
        println!(
            "trace: QE {:.6} -> {:.6} over {} checkpoints",
            trace.checkpoints[0].quantization_error,
            last.quantization_error,
            trace.checkpoints.len(),
        );
    }
    println!("wrote {}", model_path.display());
    Ok(())
}

fn load_model_and_data(
    config: &RunConfig,
    data_override: Option<&Path>,
    fall_back_to_train: bool,
) -> Result<(ModelDocument, LabeledMap, Dataset, PathBuf)> {
    let model_path = out_path(config, "model.json");
    let doc = persist::load_model(&model_path)
        .with_context(|| format!("cannot load {}; run train first", model_path.display()))?;
    let lm = doc.labeled_map()?;

    let data_path = match data_override {
        Some(p) => p.to_path_buf(),
        None => {
            let test = out_path(config, "test.dataset.json");
            if test.exists() {
                test
            } else if fall_back_to_train {
                out_path(config, "train.dataset.json")
            } else {
                bail!(
                    "no test dataset at {}; preprocess with --test-csv or pass --data",
                    test.display()
                );
            }
        }
    };
    let (data, _) = persist::load_dataset(&data_path)
        .with_context(|| format!("cannot load dataset {}", data_path.display()))?;

    if doc.feature_names != data.feature_names {
        let missing: Vec<&String> = doc
            .feature_names
            .iter()
            .filter(|n| !data.feature_names.contains(n))
            .collect();
        let extra: Vec<&String> = data
            .feature_names
            .iter()
            .filter(|n| !doc.feature_names.contains(n))
            .collect();
        bail!(
            "feature names differ between model and {}: missing {:?}, unexpected {:?}",
            data_path.display(),
            missing,
            extra
        );
    }
    Ok((doc, lm, data, data_path))
}

#[derive(Serialize)]
struct EvalDocument<'a> {
    dataset: String,
    num_samples: usize,
    report: &'a classify::EvalReport,
    labeling: &'a LabelingStats,
    metadata: serde_json::Value,
}

pub fn evaluate(config: &RunConfig, data_override: Option<&Path>) -> Result<()> {
    let (doc, lm, data, data_path) = load_model_and_data(config, data_override, false)?;
    let report = classify::evaluate(&lm, &data)?;

    println!(
        "{:<12} {:>7} {:>10} {:>8} {:>7} {:>7}",
        "dataset", "F1", "Precision", "Recall", "FPR", "FNR"
    );
    println!(
        "{:<12} {:>6.1}% {:>9.1}% {:>7.1}% {:>6.1}% {:>6.1}%",
        data_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
            .trim_end_matches(".dataset"),
        100.0 * report.f1,
        100.0 * report.precision,
        100.0 * report.recall,
        100.0 * report.fpr,
        100.0 * report.fnr,
    );
    println!(
        "confusion: TP {} FP {} TN {} FN {} (n = {})",
        report.tp,
        report.fp,
        report.tn,
        report.fn_,
        report.total()
    );
    println!(
        "malicious units: {:.1}% of {} (before resolve)",
        100.0 * doc.labeling.malicious_fraction_pre_resolve(),
        doc.labeling.num_units,
    );

    let eval_doc = EvalDocument {
        dataset: data_path.display().to_string(),
        num_samples: data.num_samples(),
        report: &report,
        labeling: &doc.labeling,
        metadata: run_metadata(config),
    };
    let eval_path = out_path(config, "eval.json");
    persist::write_json(&eval_path, &eval_doc)?;
    println!("wrote {}", eval_path.display());
    Ok(())
}

pub fn explain(config: &RunConfig, samples: &[usize], data_override: Option<&Path>) -> Result<()> {
    let (_, lm, data, data_path) = load_model_and_data(config, data_override, true)?;
    let mut bundle = explain::explanation_bundle(&lm, &data, config.k, config.seed, samples)?;
    if config.umatrix_neighbors == 8 {
        bundle.umatrix = explain::u_matrix_with(&lm.map, true);
        bundle.starburst = explain::starburst(&bundle.umatrix);
    }

    let bundle_dir = out_path(config, "bundle");
    let mut metadata = run_metadata(config);
    metadata["dataset"] = serde_json::Value::String(data_path.display().to_string());
    let manifest = persist::save_bundle(&bundle_dir, &bundle, Some(metadata))?;
    let written = write_svgs(&bundle_dir, &manifest, &bundle, config)?;

    println!(
        "explain: wrote bundle with {} heatmaps, {} local explanations",
        manifest.heatmaps.len(),
        manifest.locals.len()
    );
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

pub fn render(config: &RunConfig, bundle_dir: Option<&Path>) -> Result<()> {
    let dir = bundle_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_path(config, "bundle"));
    let (manifest, bundle) = persist::load_bundle(&dir)
        .with_context(|| format!("cannot load bundle {}; run explain first", dir.display()))?;
    let written = write_svgs(&dir, &manifest, &bundle, config)?;
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

fn spec_for(config: &RunConfig, title: String) -> RenderSpec {
    RenderSpec {
        width: config.render_width,
        height: config.render_height,
        colormap: config.colormap,
        show_labels: true,
        title,
    }
}

/// Render every artifact of a bundle as SVG files next to its JSON.
/// Returns the written paths.
pub fn write_svgs(
    dir: &Path,
    manifest: &BundleManifest,
    bundle: &ExplanationBundle,
    config: &RunConfig,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let labels: Vec<Option<u8>> = bundle
        .unit_labels
        .iter()
        .map(|l| l.as_binary())
        .collect();

    let save = |name: &str, svg: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, svg)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    };

    let svg = render_grid(
        &bundle.umatrix,
        &spec_for(config, "U-Matrix with starburst overlay".into()),
        Some(&bundle.starburst),
        Some(&labels),
    )?;
    written.push(save("umatrix.svg", svg)?);

    let cluster_grid = Grid {
        rows: bundle.umatrix.rows,
        cols: bundle.umatrix.cols,
        values: bundle.clusters.cluster_of.iter().map(|&c| c as f64).collect(),
    };
    let svg = render_grid(
        &cluster_grid,
        &spec_for(config, format!("K-means clusters (k = {})", bundle.clusters.k)),
        None,
        Some(&labels),
    )?;
    written.push(save("clusters.svg", svg)?);

    for (entry, (feature, grid)) in manifest.heatmaps.iter().zip(&bundle.heatmaps) {
        let svg = render_grid(
            grid,
            &spec_for(config, format!("Feature heatmap: {feature}")),
            None,
            None,
        )?;
        let name = entry.file.replace(".json", ".svg");
        written.push(save(&name, svg)?);
    }

    if let Some(sig) = &bundle.significance {
        let mut entries: Vec<(String, f64)> = bundle
            .heatmaps
            .iter()
            .map(|(name, _)| name.clone())
            .zip(sig.values.iter().copied())
            .collect();
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let svg = render_bars(
            &entries,
            &spec_for(config, "Global feature significance".into()),
            ChartStyle::Bars,
        )?;
        written.push(save("significance.svg", svg)?);
    }

    for (sample, local) in &bundle.locals {
        let verdict = if local.predicted == 1 {
            "malicious (1)"
        } else {
            "benign (0)"
        };
        let svg = render_bars(
            &local.scores,
            &spec_for(
                config,
                format!("Local explanation for sample {sample}: {verdict}"),
            ),
            ChartStyle::Dots,
        )?;
        written.push(save(&format!("local_{sample}.svg"), svg)?);
    }

    Ok(written)
}
