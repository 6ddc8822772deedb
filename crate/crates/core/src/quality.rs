//! Model-quality measures gating explanation generation: quantization
//! error, topographic error/accuracy, map embedding accuracy, and the
//! convergence index.

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::som::SomMap;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

/// The four quality measures plus the derived identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub quantization_error: f64,
    pub topographic_error: f64,
    pub topographic_accuracy: f64,
    pub embedding_accuracy: f64,
    pub convergence_index: f64,
    pub confidence: f64,
}

/// Compute every quality measure at the given confidence level.
pub fn quality_report(map: &SomMap, data: &Dataset, confidence: f64) -> Result<QualityReport> {
    let qe = quantization_error(map, data)?;
    let te = topographic_error(map, data)?;
    let ta = 1.0 - te;
    let ea = embedding_accuracy(map, data, confidence)?;
    Ok(QualityReport {
        quantization_error: qe,
        topographic_error: te,
        topographic_accuracy: ta,
        embedding_accuracy: ea,
        convergence_index: convergence_index(ea, ta)?,
        confidence,
    })
}

/// Mean Euclidean distance from each sample to its best-matching unit.
pub fn quantization_error(map: &SomMap, data: &Dataset) -> Result<f64> {
    if data.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for i in 0..data.num_samples() {
        let (_, dist) = map.best_matching_unit(data.sample(i))?;
        total += dist;
    }
    Ok(total / data.num_samples() as f64)
}

/// Fraction of samples whose BMU and second BMU are not grid-adjacent.
pub fn topographic_error(map: &SomMap, data: &Dataset) -> Result<f64> {
    if data.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    if map.num_units() < 2 {
        return Err(Error::InvalidArgument(
            "topographic error needs at least 2 units".into(),
        ));
    }
    let mut non_adjacent = 0usize;
    for i in 0..data.num_samples() {
        let (best, second) = map.two_best(data.sample(i));
        if !map.adjacent(best.0, second.0) {
            non_adjacent += 1;
        }
    }
    Ok(non_adjacent as f64 / data.num_samples() as f64)
}

/// Fraction of features whose distribution over the map weights is
/// statistically indistinguishable from the data's distribution: a feature
/// counts as embedded when a two-sample mean test and an F variance test
/// both fail to reject at the given confidence.
pub fn embedding_accuracy(map: &SomMap, data: &Dataset, confidence: f64) -> Result<f64> {
    if data.num_samples() < 2 || map.num_units() < 2 {
        return Err(Error::InvalidArgument(
            "embedding accuracy needs >= 2 samples and >= 2 units".into(),
        ));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    if data.dim() != map.dim {
        return Err(Error::DimensionMismatch {
            expected: map.dim,
            actual: data.dim(),
        });
    }
    let alpha = 1.0 - confidence;
    let num_units = map.num_units();
    let mut embedded = 0usize;
    for f in 0..data.dim() {
        let xs = data.feature_column(f);
        let ws: Vec<f64> = (0..num_units).map(|u| map.unit_weights(u)[f]).collect();
        if feature_embedded(&xs, &ws, alpha) {
            embedded += 1;
        }
    }
    Ok(embedded as f64 / data.dim() as f64)
}

fn feature_embedded(xs: &[f64], ws: &[f64], alpha: f64) -> bool {
    let (mx, vx) = mean_variance(xs);
    let (mw, vw) = mean_variance(ws);

    // Degenerate spreads: identical constants embed, anything else rejects.
    const TINY: f64 = 1e-24;
    if vx < TINY || vw < TINY {
        return vx < TINY && vw < TINY && (mx - mw).abs() < 1e-12;
    }

    means_indistinguishable(mx, vx, xs.len(), mw, vw, ws.len(), alpha)
        && variances_indistinguishable(vx, xs.len(), vw, ws.len(), alpha)
}

fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's two-sample t test; true when the means are not significantly
/// different at level `alpha`.
fn means_indistinguishable(
    m1: f64,
    v1: f64,
    n1: usize,
    m2: f64,
    v2: f64,
    n2: usize,
    alpha: f64,
) -> bool {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let se2 = v1 / n1f + v2 / n2f;
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2
        / ((v1 / n1f).powi(2) / (n1f - 1.0) + (v2 / n2f).powi(2) / (n2f - 1.0));
    let dist = match StudentsT::new(0.0, 1.0, df) {
        Ok(d) => d,
        Err(_) => return false,
    };
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    p > alpha
}

/// Two-sided F test on the variance ratio; true when the variances are not
/// significantly different at level `alpha`.
fn variances_indistinguishable(v1: f64, n1: usize, v2: f64, n2: usize, alpha: f64) -> bool {
    let f = v1 / v2;
    let dist = match FisherSnedecor::new(n1 as f64 - 1.0, n2 as f64 - 1.0) {
        Ok(d) => d,
        Err(_) => return false,
    };
    let cdf = dist.cdf(f);
    let p = 2.0 * cdf.min(1.0 - cdf);
    p > alpha
}

/// Arithmetic mean of embedding accuracy and topographic accuracy.
pub fn convergence_index(embedding_accuracy: f64, topographic_accuracy: f64) -> Result<f64> {
    for v in [embedding_accuracy, topographic_accuracy] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "convergence index inputs must be in [0, 1], got {v}"
            )));
        }
    }
    Ok((embedding_accuracy + topographic_accuracy) / 2.0)
}
