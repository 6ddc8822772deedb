//! Turn a trained map into a binary anomaly classifier: label units by
//! majority vote of their training hits, predict via BMU, and report
//! confusion-derived accuracy metrics.

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::som::{squared_distance, SomMap};
use serde::{Deserialize, Serialize};

/// Per-unit class after the labeling pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitLabel {
    Benign,
    Malicious,
    Unlabeled,
}

impl UnitLabel {
    pub fn as_binary(self) -> Option<u8> {
        match self {
            UnitLabel::Benign => Some(0),
            UnitLabel::Malicious => Some(1),
            UnitLabel::Unlabeled => None,
        }
    }
}

/// A trained map plus per-unit majority labels and hit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMap {
    pub map: SomMap,
    pub unit_labels: Vec<UnitLabel>,
    /// (benign hits, malicious hits) per unit from the labeling pass.
    pub hit_counts: Vec<(usize, usize)>,
}

impl LabeledMap {
    pub fn is_fully_labeled(&self) -> bool {
        self.unit_labels
            .iter()
            .all(|l| *l != UnitLabel::Unlabeled)
    }

    /// Fraction of all units labeled malicious (unlabeled units count in
    /// the denominator only).
    pub fn malicious_unit_fraction(&self) -> f64 {
        if self.unit_labels.is_empty() {
            return 0.0;
        }
        let malicious = self
            .unit_labels
            .iter()
            .filter(|l| **l == UnitLabel::Malicious)
            .count();
        malicious as f64 / self.unit_labels.len() as f64
    }
}

/// Assign every training sample to its BMU and give each unit the majority
/// label of its hits. Zero-hit units stay unlabeled; ties go to malicious
/// so that ambiguous regions alert rather than stay silent.
pub fn label_units(map: &SomMap, train: &Dataset) -> Result<LabeledMap> {
    if train.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    if train.dim() != map.dim {
        return Err(Error::DimensionMismatch {
            expected: map.dim,
            actual: train.dim(),
        });
    }
    let mut hit_counts = vec![(0usize, 0usize); map.num_units()];
    for i in 0..train.num_samples() {
        let (bmu, _) = map.best_matching_unit(train.sample(i))?;
        if train.labels[i] == 0 {
            hit_counts[bmu].0 += 1;
        } else {
            hit_counts[bmu].1 += 1;
        }
    }
    let unit_labels = hit_counts
        .iter()
        .map(|&(benign, malicious)| {
            if benign == 0 && malicious == 0 {
                UnitLabel::Unlabeled
            } else if malicious >= benign {
                UnitLabel::Malicious
            } else {
                UnitLabel::Benign
            }
        })
        .collect();
    Ok(LabeledMap {
        map: map.clone(),
        unit_labels,
        hit_counts,
    })
}

/// Give every unlabeled unit the label of its nearest labeled unit in
/// weight space (ties to the lower unit index).
pub fn resolve_unlabeled(mut lm: LabeledMap) -> Result<LabeledMap> {
    let labeled: Vec<usize> = (0..lm.unit_labels.len())
        .filter(|&u| lm.unit_labels[u] != UnitLabel::Unlabeled)
        .collect();
    if labeled.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot resolve: no unit has a label".into(),
        ));
    }
    let resolved: Vec<UnitLabel> = (0..lm.unit_labels.len())
        .map(|u| {
            if lm.unit_labels[u] != UnitLabel::Unlabeled {
                return lm.unit_labels[u];
            }
            let w = lm.map.unit_weights(u);
            let mut best = (usize::MAX, f64::INFINITY);
            for &other in &labeled {
                let d2 = squared_distance(w, lm.map.unit_weights(other));
                if d2 < best.1 {
                    best = (other, d2);
                }
            }
            lm.unit_labels[best.0]
        })
        .collect();
    lm.unit_labels = resolved;
    Ok(lm)
}

/// Label of the sample's best-matching unit. Requires a fully labeled map.
pub fn predict(lm: &LabeledMap, sample: &[f64]) -> Result<u8> {
    if !lm.is_fully_labeled() {
        return Err(Error::InvalidArgument(
            "map has unlabeled units; run resolve_unlabeled first".into(),
        ));
    }
    let (bmu, _) = lm.map.best_matching_unit(sample)?;
    Ok(lm.unit_labels[bmu]
        .as_binary()
        .expect("fully labeled map"))
}

/// Confusion counts and the derived accuracy metrics, with malicious as the
/// positive class. Ratios with a zero denominator are defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub fnr: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> EvalReport {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport {
            tp,
            fp,
            tn,
            fn_,
            f1,
            precision,
            recall,
            fpr: ratio(fp, fp + tn),
            fnr: ratio(fn_, fn_ + tp),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predict every test sample and accumulate the confusion matrix.
pub fn evaluate(lm: &LabeledMap, test: &Dataset) -> Result<EvalReport> {
    if test.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..test.num_samples() {
        let predicted = predict(lm, test.sample(i))?;
        match (predicted, test.labels[i]) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            _ => unreachable!(),
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Dataset;

    fn map_from(rows: usize, cols: usize, dim: usize, w: &[f64]) -> SomMap {
        SomMap {
            rows,
            cols,
            dim,
            weights: w.to_vec(),
        }
    }

    fn dataset(dim: usize, rows: &[(&[f64], u8)]) -> Dataset {
        let features: Vec<f64> = rows.iter().flat_map(|(r, _)| r.iter().copied()).collect();
        let labels: Vec<u8> = rows.iter().map(|(_, l)| *l).collect();
        Dataset::new(
            (0..dim).map(|i| format!("f{i}")).collect(),
            vec![(0.0, 1.0); dim],
            labels,
            features,
        )
        .unwrap()
    }

    #[test]
    fn majority_labeling_and_zero_hit_units() {
        let map = map_from(1, 2, 1, &[0.0, 1.0]);
        // Unit 0 gets 3 benign + 1 malicious; unit 1 gets nothing.
        let train = dataset(
            1,
            &[(&[0.0], 0), (&[0.1], 0), (&[0.2], 0), (&[0.05], 1)],
        );
        let lm = label_units(&map, &train).unwrap();
        assert_eq!(lm.unit_labels[0], UnitLabel::Benign);
        assert_eq!(lm.unit_labels[1], UnitLabel::Unlabeled);
        assert_eq!(lm.hit_counts[0], (3, 1));
        assert_eq!(lm.hit_counts[1], (0, 0));
        let total_hits: usize = lm.hit_counts.iter().map(|(b, m)| b + m).sum();
        assert_eq!(total_hits, train.num_samples());
    }

    #[test]
    fn hit_tie_labels_malicious() {
        let map = map_from(1, 1, 1, &[0.5]);
        let train = dataset(1, &[(&[0.4], 0), (&[0.6], 1)]);
        let lm = label_units(&map, &train).unwrap();
        assert_eq!(lm.unit_labels[0], UnitLabel::Malicious);
    }

    #[test]
    fn resolve_single_source_floods_map() {
        let map = map_from(2, 2, 1, &[0.0, 0.3, 0.6, 0.9]);
        let train = dataset(1, &[(&[0.0], 1)]);
        let lm = label_units(&map, &train).unwrap();
        let lm = resolve_unlabeled(lm).unwrap();
        assert!(lm.is_fully_labeled());
        assert!(lm
            .unit_labels
            .iter()
            .all(|&l| l == UnitLabel::Malicious));
    }

    #[test]
    fn resolve_equidistant_takes_lower_index() {
        // Unit 1 (weight 0.5) is equidistant from unit 0 (0.0, benign) and
        // unit 2 (1.0, malicious). Lower index wins.
        let map = map_from(1, 3, 1, &[0.0, 0.5, 1.0]);
        let mut lm = LabeledMap {
            map,
            unit_labels: vec![
                UnitLabel::Benign,
                UnitLabel::Unlabeled,
                UnitLabel::Malicious,
            ],
            hit_counts: vec![(1, 0), (0, 0), (0, 1)],
        };
        lm = resolve_unlabeled(lm).unwrap();
        assert_eq!(lm.unit_labels[1], UnitLabel::Benign);
    }

    #[test]
    fn resolve_fully_labeled_is_identity() {
        let map = map_from(1, 2, 1, &[0.0, 1.0]);
        let lm = LabeledMap {
            map,
            unit_labels: vec![UnitLabel::Benign, UnitLabel::Malicious],
            hit_counts: vec![(1, 0), (0, 1)],
        };
        let resolved = resolve_unlabeled(lm.clone()).unwrap();
        assert_eq!(resolved, lm);
    }

    #[test]
    fn resolve_needs_at_least_one_label() {
        let map = map_from(1, 2, 1, &[0.0, 1.0]);
        let lm = LabeledMap {
            map,
            unit_labels: vec![UnitLabel::Unlabeled, UnitLabel::Unlabeled],
            hit_counts: vec![(0, 0), (0, 0)],
        };
        assert!(resolve_unlabeled(lm).is_err());
    }

    #[test]
    fn predict_returns_bmu_label() {
        let map = map_from(1, 2, 1, &[0.1, 0.9]);
        let lm = LabeledMap {
            map,
            unit_labels: vec![UnitLabel::Benign, UnitLabel::Malicious],
            hit_counts: vec![(1, 0), (0, 1)],
        };
        assert_eq!(predict(&lm, &[0.9]).unwrap(), 1);
        assert_eq!(predict(&lm, &[0.0]).unwrap(), 0);
        // Deterministic.
        assert_eq!(predict(&lm, &[0.45]).unwrap(), predict(&lm, &[0.45]).unwrap());
    }

    #[test]
    fn predict_rejects_unlabeled_map() {
        let map = map_from(1, 2, 1, &[0.1, 0.9]);
        let lm = LabeledMap {
            map,
            unit_labels: vec![UnitLabel::Benign, UnitLabel::Unlabeled],
            hit_counts: vec![(1, 0), (0, 0)],
        };
        assert!(predict(&lm, &[0.9]).is_err());
    }

    #[test]
    fn evaluate_perfect_classifier() {
        let map = map_from(1, 2, 1, &[0.0, 1.0]);
        let train = dataset(1, &[(&[0.0], 0), (&[1.0], 1)]);
        let lm = resolve_unlabeled(label_units(&map, &train).unwrap()).unwrap();
        let test = dataset(1, &[(&[0.1], 0), (&[0.2], 0), (&[0.9], 1), (&[0.8], 1)]);
        let report = evaluate(&lm, &test).unwrap();
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.fpr, 0.0);
        assert_eq!(report.fnr, 0.0);
        assert_eq!(report.total(), 4);
    }

    #[test]
    fn eval_report_formulas() {
        let r = EvalReport::from_counts(8, 2, 6, 4);
        assert_eq!(r.precision, 0.8);
        assert!((r.recall - 8.0 / 12.0).abs() < 1e-15);
        let expect_f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
        assert_eq!(r.f1, expect_f1);
        assert_eq!(r.fpr, 0.25);
        assert_eq!(r.fnr, 4.0 / 12.0);
        assert_eq!(r.total(), 20);
    }

    #[test]
    fn eval_report_zero_denominators() {
        let r = EvalReport::from_counts(0, 0, 5, 0);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.fpr, 0.0);
        assert_eq!(r.fnr, 0.0);
    }
}
