//! Library-level end-to-end flow: raw CSV through preprocessing, training,
//! quality gating, classification, explanation, rendering, and persistence.

use xsom_core::classify::{evaluate, label_units, resolve_unlabeled};
use xsom_core::explain::explanation_bundle;
use xsom_core::ingest::{self, SchemaId};
use xsom_core::persist;
use xsom_core::quality::quality_report;
use xsom_core::render::{render_grid, RenderSpec};
use xsom_core::som::{train, SomMap, TrainConfig};
use xsom_core::synth;

#[test]
fn csv_to_explanations_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flows.csv");
    synth::to_generic_csv(&synth::two_gaussians(600, 4, 0.05, 5), &csv).unwrap();

    // Pre-modeling.
    let table = ingest::load_csv(&csv, SchemaId::Generic).unwrap();
    let fit = ingest::fit_pipeline(table, 0.01, None).unwrap();
    let data = &fit.dataset;
    assert_eq!(data.num_samples(), 600);

    // Modeling.
    let map = SomMap::random(8, 8, data.dim(), 5).unwrap();
    let mut config = TrainConfig::new(5_000, 0.7, 4.0, 5);
    config.trace_every = 1_000;
    let (trained, trace) = train(&map, data, &config).unwrap();
    assert!(trace.checkpoints.len() >= 2);
    assert!(
        trace.checkpoints.last().unwrap().quantization_error
            < trace.checkpoints[0].quantization_error
    );

    let metrics = quality_report(&trained, data, 0.95).unwrap();
    assert!(metrics.convergence_index > 0.5, "model failed its quality gate");

    // Classification.
    let lm = resolve_unlabeled(label_units(&trained, data).unwrap()).unwrap();
    let report = evaluate(&lm, data).unwrap();
    assert!(report.f1 > 0.95);

    // Post-modeling explainability.
    let bundle = explanation_bundle(&lm, data, 2, 5, &[0, 1, 2]).unwrap();
    assert_eq!(bundle.heatmaps.len(), data.dim());
    assert_eq!(bundle.locals.len(), 3);

    // The malicious cluster sits at higher feature values, so every
    // heatmap's mean over malicious-labeled units must exceed its mean
    // over benign-labeled units.
    for (name, grid) in &bundle.heatmaps {
        let (mut hi, mut hi_n, mut lo, mut lo_n) = (0.0, 0usize, 0.0, 0usize);
        for (unit, label) in bundle.unit_labels.iter().enumerate() {
            match label.as_binary() {
                Some(1) => {
                    hi += grid.values[unit];
                    hi_n += 1;
                }
                Some(0) => {
                    lo += grid.values[unit];
                    lo_n += 1;
                }
                _ => {}
            }
        }
        assert!(
            hi / hi_n as f64 > lo / lo_n as f64,
            "feature '{name}' heatmap does not co-locate with the malicious region"
        );
    }

    // Persistence round trip, then render from the reloaded artifacts.
    let bundle_dir = dir.path().join("bundle");
    persist::save_bundle(&bundle_dir, &bundle, None).unwrap();
    let (_, reloaded) = persist::load_bundle(&bundle_dir).unwrap();
    assert_eq!(reloaded, bundle);

    let labels: Vec<Option<u8>> = reloaded.unit_labels.iter().map(|l| l.as_binary()).collect();
    let svg = render_grid(
        &reloaded.umatrix,
        &RenderSpec::default(),
        Some(&reloaded.starburst),
        Some(&labels),
    )
    .unwrap();
    assert_eq!(svg.matches("<rect ").count(), 64);
}

/// Separable two-Gaussian data must classify almost perfectly on at least
/// 9 of 10 seeds.
#[test]
fn separable_clusters_reach_f1_095() {
    let mut ok = 0;
    for seed in 0..10u64 {
        let train_ds = synth::two_gaussians(1_000, 4, 0.05, seed);
        let test_ds = synth::two_gaussians(500, 4, 0.05, seed + 100);
        let map = SomMap::random(8, 8, 4, seed).unwrap();
        let config = TrainConfig::new(5_000, 0.7, 4.0, seed);
        let (trained, _) = train(&map, &train_ds, &config).unwrap();
        let lm = resolve_unlabeled(label_units(&trained, &train_ds).unwrap()).unwrap();
        let report = evaluate(&lm, &test_ds).unwrap();
        if report.f1 >= 0.95 {
            ok += 1;
        }
    }
    assert!(ok >= 9, "F1 >= 0.95 on only {ok}/10 seeds");
}

/// Model persistence under training data reproduces predictions exactly.
#[test]
fn persisted_model_predicts_identically() {
    let data = synth::imbalanced_two_class(800, 3, 0.7, 77);
    let map = SomMap::random(6, 6, 3, 77).unwrap();
    let config = TrainConfig::new(4_000, 0.7, 3.0, 77);
    let (trained, _) = train(&map, &data, &config).unwrap();
    let lm = resolve_unlabeled(label_units(&trained, &data).unwrap()).unwrap();
    let metrics = quality_report(&trained, &data, 0.95).unwrap();
    let stats = persist::LabelingStats {
        num_units: 36,
        labeled_units: 36,
        malicious_units_pre_resolve: 0,
        malicious_units_resolved: 0,
    };
    let doc = persist::ModelDocument::from_parts(
        &lm,
        data.feature_names.clone(),
        config,
        metrics,
        stats,
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    persist::save_model(&path, &doc).unwrap();
    let restored = persist::load_model(&path).unwrap().labeled_map().unwrap();

    for i in 0..data.num_samples() {
        let a = xsom_core::classify::predict(&lm, data.sample(i)).unwrap();
        let b = xsom_core::classify::predict(&restored, data.sample(i)).unwrap();
        assert_eq!(a, b, "prediction diverged for sample {i}");
    }
}
