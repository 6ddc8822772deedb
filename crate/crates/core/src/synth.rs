//! Seeded synthetic datasets for benchmarks and the acceptance suite.

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::Path;

/// Standard normal draw via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn gaussian_sample(rng: &mut ChaCha8Rng, center: f64, sigma: f64) -> f64 {
    (center + sigma * normal(rng)).clamp(0.0, 1.0)
}

fn build(features: Vec<f64>, labels: Vec<u8>, dim: usize) -> Dataset {
    Dataset::new(
        (0..dim).map(|i| format!("f{i}")).collect(),
        vec![(0.0, 1.0); dim],
        labels,
        features,
    )
    .expect("synthetic values are clamped to [0, 1]")
}

/// Balanced two-cluster dataset: benign around 0.25, malicious around 0.75
/// per dimension, each with standard deviation `sigma`. With the default
/// sigma of 0.05 the cluster separation is 10 sigma per dimension.
pub fn two_gaussians(n_samples: usize, dim: usize, sigma: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = (i % 2) as u8;
        let center = if label == 0 { 0.25 } else { 0.75 };
        for _ in 0..dim {
            features.push(gaussian_sample(&mut rng, center, sigma));
        }
        labels.push(label);
    }
    build(features, labels, dim)
}

/// Imbalanced traffic mix: a broad benign cloud and a tight malicious
/// cluster that the benign tail bleeds into. The overlap pushes errors
/// toward false positives rather than misses.
pub fn imbalanced_two_class(
    n_samples: usize,
    dim: usize,
    benign_fraction: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let label = if rng.random::<f64>() < benign_fraction {
            0u8
        } else {
            1u8
        };
        let (center, sigma) = if label == 0 { (0.42, 0.2) } else { (0.74, 0.06) };
        for _ in 0..dim {
            features.push(gaussian_sample(&mut rng, center, sigma));
        }
        labels.push(label);
    }
    build(features, labels, dim)
}

/// Write a dataset as a raw generic-schema CSV (feature columns plus a
/// trailing 0/1 label column), e.g. to drive the CLI end to end.
pub fn to_generic_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
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
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_gaussians_is_deterministic_and_bounded() {
        let a = two_gaussians(200, 4, 0.05, 3);
        let b = two_gaussians(200, 4, 0.05, 3);
        assert_eq!(a.features(), b.features());
        assert_eq!(a.num_samples(), 200);
        assert!(a.features().iter().all(|x| (0.0..=1.0).contains(x)));
        let ones = a.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 100);
    }

    #[test]
    fn clusters_are_separated() {
        let ds = two_gaussians(400, 3, 0.05, 1);
        let mut benign_mean = 0.0;
        let mut malicious_mean = 0.0;
        for i in 0..ds.num_samples() {
            let m: f64 = ds.sample(i).iter().sum::<f64>() / 3.0;
            if ds.labels[i] == 0 {
                benign_mean += m;
            } else {
                malicious_mean += m;
            }
        }
        benign_mean /= 200.0;
        malicious_mean /= 200.0;
        assert!(malicious_mean - benign_mean > 0.3);
    }

    #[test]
    fn imbalanced_fraction_is_close() {
        let ds = imbalanced_two_class(2000, 4, 0.7, 11);
        let benign = ds.labels.iter().filter(|&&l| l == 0).count() as f64;
        let frac = benign / 2000.0;
        assert!((frac - 0.7).abs() < 0.05, "benign fraction {frac}");
    }

    #[test]
    fn generic_csv_round_trips_through_ingest() {
        let ds = two_gaussians(50, 3, 0.05, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        to_generic_csv(&ds, &path).unwrap();
        let table = crate::ingest::load_csv(&path, crate::ingest::SchemaId::Generic).unwrap();
        assert_eq!(table.num_rows(), 50);
        let table = crate::ingest::binarize_labels(table).unwrap();
        assert_eq!(table.binary_labels().unwrap(), ds.labels);
    }
}
