//! Self-organizing map: initialization, best-matching-unit search,
//! neighborhood-weighted updates, and decaying training schedules.

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::quality;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Guard against division by zero in the neighborhood kernel.
const RADIUS_EPSILON: f64 = 1e-9;

/// A rectangular grid of units, each holding a weight vector of the input
/// dimension. Unit `u` sits at grid coordinate `(u / cols, u % cols)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomMap {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    /// Row-major `(rows * cols) x dim` weight matrix.
    pub weights: Vec<f64>,
}

impl SomMap {
    /// Allocate a map with every weight drawn i.i.d. uniform [0, 1] from a
    /// seeded RNG. The same `(rows, cols, dim, seed)` always produces the
    /// identical map.
    pub fn random(rows: usize, cols: usize, dim: usize, seed: u64) -> Result<SomMap> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "map dimensions must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..rows * cols * dim)
            .map(|_| rng.random_range(0.0..=1.0))
            .collect();
        Ok(SomMap {
            rows,
            cols,
            dim,
            weights,
        })
    }

    pub fn num_units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn unit_weights(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.dim..(unit + 1) * self.dim]
    }

    pub fn coords(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols, unit % self.cols)
    }

    pub fn unit_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Euclidean distance between two units' grid coordinates.
    pub fn grid_distance(&self, a: usize, b: usize) -> f64 {
        let (ar, ac) = self.coords(a);
        let (br, bc) = self.coords(b);
        let dr = ar as f64 - br as f64;
        let dc = ac as f64 - bc as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// Whether two units are 4-neighborhood adjacent on the grid.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ar, ac) = self.coords(a);
        let (br, bc) = self.coords(b);
        ar.abs_diff(br) + ac.abs_diff(bc) == 1
    }

    /// The up/down/left/right neighbors of a unit, in index order.
    pub fn neighbors4(&self, unit: usize) -> Vec<usize> {
        let (r, c) = self.coords(unit);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(self.unit_index(r - 1, c));
        }
        if c > 0 {
            out.push(self.unit_index(r, c - 1));
        }
        if c + 1 < self.cols {
            out.push(self.unit_index(r, c + 1));
        }
        if r + 1 < self.rows {
            out.push(self.unit_index(r + 1, c));
        }
        out
    }

    /// All 8 surrounding neighbors (diagonals included), in index order.
    pub fn neighbors8(&self, unit: usize) -> Vec<usize> {
        let (r, c) = self.coords(unit);
        let mut out = Vec::with_capacity(8);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let nr = r as i64 + dr;
                let nc = c as i64 + dc;
                if nr >= 0 && nc >= 0 && (nr as usize) < self.rows && (nc as usize) < self.cols {
                    out.push(self.unit_index(nr as usize, nc as usize));
                }
            }
        }
        out
    }

    fn check_dim(&self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: sample.len(),
            });
        }
        Ok(())
    }

    /// The unit minimizing Euclidean distance to the sample; ties break to
    /// the lowest unit index.
    pub fn best_matching_unit(&self, sample: &[f64]) -> Result<(usize, f64)> {
        self.check_dim(sample)?;
        let mut best = (0usize, f64::INFINITY);
        for unit in 0..self.num_units() {
            let d2 = squared_distance(self.unit_weights(unit), sample);
            if d2 < best.1 {
                best = (unit, d2);
            }
        }
        Ok((best.0, best.1.sqrt()))
    }

    /// The unit with the second-smallest distance, same tie-break; always a
    /// different unit than the BMU.
    pub fn second_bmu(&self, sample: &[f64]) -> Result<(usize, f64)> {
        self.check_dim(sample)?;
        if self.num_units() < 2 {
            return Err(Error::InvalidArgument(
                "second BMU needs at least 2 units".into(),
            ));
        }
        let (_, second) = self.two_best(sample);
        Ok((second.0, second.1.sqrt()))
    }

    /// Single pass returning (BMU, second BMU) as (index, squared distance).
    pub(crate) fn two_best(&self, sample: &[f64]) -> ((usize, f64), (usize, f64)) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for unit in 0..self.num_units() {
            let d2 = squared_distance(self.unit_weights(unit), sample);
            if d2 < best.1 {
                second = best;
                best = (unit, d2);
            } else if d2 < second.1 {
                second = (unit, d2);
            }
        }
        (best, second)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Decay family for the learning-rate and radius schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    #[default]
    Exponential,
}

/// Training parameters. `total_steps` counts individual sample
/// presentations, not passes over the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub lr0: f64,
    pub radius0: f64,
    pub seed: u64,
    pub schedule: ScheduleKind,
    /// Record a trace checkpoint every this many steps (0 disables tracing).
    pub trace_every: usize,
}

impl TrainConfig {
    pub fn new(total_steps: usize, lr0: f64, radius0: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            total_steps,
            lr0,
            radius0,
            seed,
            schedule: ScheduleKind::Exponential,
            trace_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidArgument("total_steps must be >= 1".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lr0 must be in (0, 1], got {}",
                self.lr0
            )));
        }
        if !(self.radius0 >= 0.0 && self.radius0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius0 must be >= 0, got {}",
                self.radius0
            )));
        }
        Ok(())
    }

    /// Learning rate and neighborhood radius at step `t`, both exponentially
    /// decaying and non-increasing in `t`. The radius reaches ~1 at the end
    /// of training (and never decays when it starts at or below 1).
    pub fn schedule(&self, t: usize) -> (f64, f64) {
        let t = t as f64;
        let total = self.total_steps as f64;
        let lr = self.lr0 * (-t / total).exp();
        let radius = self.radius0 * (-t * self.radius0.max(1.0).ln() / total).exp();
        (lr, radius)
    }
}

/// Quality snapshots recorded during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub checkpoints: Vec<TraceCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCheckpoint {
    /// Number of completed steps at the time of the snapshot.
    pub step: usize,
    pub quantization_error: f64,
    pub topographic_error: f64,
}

/// One training update: find the sample's BMU, then move every unit within
/// `radius` grid distance toward the sample with a Gaussian-weighted rate.
/// With radius 0 only the BMU row changes.
pub fn train_step(map: &mut SomMap, sample: &[f64], lr: f64, radius: f64) -> Result<usize> {
    let (bmu, _) = map.best_matching_unit(sample)?;
    let (br, bc) = map.coords(bmu);
    let reach = radius.floor() as usize;
    let r_lo = br.saturating_sub(reach);
    let r_hi = (br + reach).min(map.rows - 1);
    let c_lo = bc.saturating_sub(reach);
    let c_hi = (bc + reach).min(map.cols - 1);

    let denom = 2.0 * radius.max(RADIUS_EPSILON).powi(2);
    let dim = map.dim;
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            let unit = map.unit_index(r, c);
            let dr = r as f64 - br as f64;
            let dc = c as f64 - bc as f64;
            let d2 = dr * dr + dc * dc;
            if d2.sqrt() > radius {
                continue;
            }
            let rate = lr * (-d2 / denom).exp();
            let w = &mut map.weights[unit * dim..(unit + 1) * dim];
            for (wi, &xi) in w.iter_mut().zip(sample) {
                *wi -= rate * (*wi - xi);
            }
        }
    }
    Ok(bmu)
}

/// Train for exactly `config.total_steps` sample presentations, picking a
/// uniformly random sample each step from a seeded RNG. Deterministic given
/// the initial map and the config seed.
pub fn train(map: &SomMap, data: &Dataset, config: &TrainConfig) -> Result<(SomMap, TrainTrace)> {
    config.validate()?;
    if data.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != map.dim {
        return Err(Error::DimensionMismatch {
            expected: map.dim,
            actual: data.dim(),
        });
    }

    let mut map = map.clone();
    let mut trace = TrainTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    if config.trace_every > 0 {
        record_checkpoint(&mut trace, &map, data, 0);
    }
    for t in 0..config.total_steps {
        let idx = rng.random_range(0..data.num_samples());
        let (lr, radius) = config.schedule(t);
        train_step(&mut map, data.sample(idx), lr, radius)?;
        let done = t + 1;
        if config.trace_every > 0
            && (done % config.trace_every == 0 || done == config.total_steps)
        {
            record_checkpoint(&mut trace, &map, data, done);
        }
    }
    Ok((map, trace))
}

fn record_checkpoint(trace: &mut TrainTrace, map: &SomMap, data: &Dataset, step: usize) {
    if trace.checkpoints.last().is_some_and(|c| c.step == step) {
        return;
    }
    let qe = quality::quantization_error(map, data).unwrap_or(0.0);
    let te = quality::topographic_error(map, data).unwrap_or(0.0);
    trace.checkpoints.push(TraceCheckpoint {
        step,
        quantization_error: qe,
        topographic_error: te,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Dataset;

    pub(crate) fn map_from_weights(rows: usize, cols: usize, dim: usize, w: &[f64]) -> SomMap {
        assert_eq!(w.len(), rows * cols * dim);
        SomMap {
            rows,
            cols,
            dim,
            weights: w.to_vec(),
        }
    }

    fn square_map() -> SomMap {
        // 2x2 units with weights (0,0), (1,0), (0,1), (1,1).
        map_from_weights(2, 2, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn random_init_bounds_and_shape() {
        let map = SomMap::random(18, 18, 6, 99).unwrap();
        assert_eq!(map.num_units(), 324);
        assert_eq!(map.weights.len(), 324 * 6);
        assert!(map.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));

        let tiny = SomMap::random(1, 1, 1, 0).unwrap();
        assert_eq!(tiny.weights.len(), 1);
        assert!((0.0..=1.0).contains(&tiny.weights[0]));
    }

    #[test]
    fn random_init_is_deterministic() {
        let a = SomMap::random(5, 7, 3, 42).unwrap();
        let b = SomMap::random(5, 7, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = SomMap::random(5, 7, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_init_rejects_zero_dims() {
        assert!(SomMap::random(0, 2, 2, 1).is_err());
        assert!(SomMap::random(2, 0, 2, 1).is_err());
        assert!(SomMap::random(2, 2, 0, 1).is_err());
    }

    #[test]
    fn bmu_on_square_map() {
        let map = square_map();
        let (unit, dist) = map.best_matching_unit(&[0.9, 0.1]).unwrap();
        assert_eq!(unit, 1);
        assert!((dist - 0.02f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bmu_exact_match_distance_zero() {
        let map = square_map();
        let (unit, dist) = map.best_matching_unit(&[0.0, 1.0]).unwrap();
        assert_eq!(unit, 2);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn bmu_tie_breaks_to_lowest_index() {
        let map = map_from_weights(2, 2, 1, &[0.5, 0.5, 0.5, 0.5]);
        let (unit, _) = map.best_matching_unit(&[0.3]).unwrap();
        assert_eq!(unit, 0);
    }

    #[test]
    fn bmu_dimension_mismatch() {
        let map = square_map();
        assert!(map.best_matching_unit(&[0.1]).is_err());
    }

    #[test]
    fn second_bmu_tie_breaks_to_lowest_index() {
        let map = square_map();
        // Units 0 and 3 are equidistant (sqrt 0.82); index 0 wins.
        let (unit, dist) = map.second_bmu(&[0.9, 0.1]).unwrap();
        assert_eq!(unit, 0);
        assert!((dist - 0.82f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn second_bmu_on_two_unit_map() {
        let map = map_from_weights(1, 2, 1, &[0.0, 1.0]);
        let (bmu, _) = map.best_matching_unit(&[0.1]).unwrap();
        let (second, _) = map.second_bmu(&[0.1]).unwrap();
        assert_eq!(bmu, 0);
        assert_eq!(second, 1);
    }

    #[test]
    fn second_bmu_requires_two_units() {
        let map = map_from_weights(1, 1, 1, &[0.5]);
        assert!(map.second_bmu(&[0.5]).is_err());
    }

    #[test]
    fn schedule_boundary_and_decay() {
        let config = TrainConfig::new(100, 0.5, 4.0, 0);
        let (lr, radius) = config.schedule(0);
        assert_eq!(lr, 0.5);
        assert_eq!(radius, 4.0);

        // t = round(T * ln 2) halves the learning rate.
        let t = (100.0 * std::f64::consts::LN_2).round() as usize;
        let (lr, _) = config.schedule(t);
        assert!((lr - 0.25).abs() < 0.01);
    }

    #[test]
    fn schedule_radius_one_is_constant() {
        let config = TrainConfig::new(50, 0.3, 1.0, 0);
        for t in 0..50 {
            let (_, radius) = config.schedule(t);
            assert_eq!(radius, 1.0);
        }
    }

    #[test]
    fn schedules_are_non_increasing() {
        let config = TrainConfig::new(200, 0.9, 7.5, 0);
        let mut prev = config.schedule(0);
        for t in 1..200 {
            let cur = config.schedule(t);
            assert!(cur.0 <= prev.0);
            assert!(cur.1 <= prev.1);
            prev = cur;
        }
        // Learning rate never hits zero.
        assert!(config.schedule(199).0 > 0.0);
    }

    #[test]
    fn train_step_radius_zero_touches_only_bmu() {
        let mut map = square_map();
        let before = map.weights.clone();
        let bmu = train_step(&mut map, &[0.4, 0.6], 0.1, 0.0).unwrap();
        assert_eq!(bmu, 2); // closest to (0, 1)
        for unit in 0..4 {
            if unit == bmu {
                continue;
            }
            assert_eq!(
                map.unit_weights(unit),
                &before[unit * 2..unit * 2 + 2],
                "unit {unit} moved"
            );
        }
    }

    #[test]
    fn train_step_update_formula() {
        // Single unit at (0.5, 0.5), sample (1, 0), lr 0.1.
        let mut map = map_from_weights(1, 1, 2, &[0.5, 0.5]);
        train_step(&mut map, &[1.0, 0.0], 0.1, 0.0).unwrap();
        assert!((map.weights[0] - 0.55).abs() < 1e-12);
        assert!((map.weights[1] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn train_step_zero_lr_is_identity() {
        let mut map = square_map();
        let before = map.weights.clone();
        train_step(&mut map, &[0.9, 0.9], 0.0, 2.0).unwrap();
        assert_eq!(map.weights, before);
    }

    #[test]
    fn train_step_fixed_point_when_sample_equals_weights() {
        let mut map = map_from_weights(1, 1, 2, &[0.3, 0.7]);
        train_step(&mut map, &[0.3, 0.7], 0.5, 0.0).unwrap();
        assert_eq!(map.weights, vec![0.3, 0.7]);
    }

    fn single_point_dataset(point: &[f64], copies: usize) -> Dataset {
        let features: Vec<f64> = point
            .iter()
            .cycle()
            .take(point.len() * copies)
            .copied()
            .collect();
        Dataset::new(
            (0..point.len()).map(|i| format!("f{i}")).collect(),
            vec![(0.0, 1.0); point.len()],
            vec![0; copies],
            features,
        )
        .unwrap()
    }

    #[test]
    fn train_rejects_zero_steps() {
        let map = SomMap::random(2, 2, 2, 1).unwrap();
        let data = single_point_dataset(&[0.5, 0.5], 4);
        let config = TrainConfig::new(0, 0.5, 1.0, 1);
        assert!(train(&map, &data, &config).is_err());
    }

    #[test]
    fn train_single_step_runs() {
        let map = SomMap::random(2, 2, 2, 1).unwrap();
        let data = single_point_dataset(&[0.5, 0.5], 4);
        let config = TrainConfig::new(1, 0.5, 1.0, 1);
        let (trained, _) = train(&map, &data, &config).unwrap();
        assert_ne!(trained.weights, map.weights);
    }

    #[test]
    fn train_contracts_toward_repeated_point() {
        let map = SomMap::random(3, 3, 2, 7).unwrap();
        let data = single_point_dataset(&[0.25, 0.75], 10);
        let config = TrainConfig::new(500, 0.5, 1.5, 7);
        let (trained, _) = train(&map, &data, &config).unwrap();
        let qe_before = quality::quantization_error(&map, &data).unwrap();
        let qe_after = quality::quantization_error(&trained, &data).unwrap();
        assert!(qe_after < qe_before);
    }

    #[test]
    fn train_is_deterministic() {
        let map = SomMap::random(4, 4, 3, 11).unwrap();
        let features: Vec<f64> = (0..60).map(|i| (i as f64 * 0.618) % 1.0).collect();
        let data = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0.0, 1.0); 3],
            vec![0; 20],
            features,
        )
        .unwrap();
        let mut config = TrainConfig::new(300, 0.7, 2.0, 5);
        config.trace_every = 50;
        let (m1, t1) = train(&map, &data, &config).unwrap();
        let (m2, t2) = train(&map, &data, &config).unwrap();
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(t1, t2);
        assert!(!t1.checkpoints.is_empty());
        for pair in t1.checkpoints.windows(2) {
            assert!(pair[0].step < pair[1].step);
        }
    }

    #[test]
    fn train_rejects_dimension_mismatch() {
        let map = SomMap::random(2, 2, 3, 1).unwrap();
        let data = single_point_dataset(&[0.5, 0.5], 4);
        let config = TrainConfig::new(10, 0.5, 1.0, 1);
        assert!(matches!(
            train(&map, &data, &config),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_map_and_sample() -> impl Strategy<Value = (SomMap, Vec<f64>)> {
        (1usize..5, 1usize..5, 1usize..4, any::<u64>()).prop_flat_map(|(r, c, d, seed)| {
            let map = SomMap::random(r, c, d, seed).unwrap();
            let sample = proptest::collection::vec(0.0f64..=1.0, d);
            (Just(map), sample)
        })
    }

    proptest! {
        #[test]
        fn bmu_matches_exhaustive_scan((map, sample) in arb_map_and_sample()) {
            let (bmu, dist) = map.best_matching_unit(&sample).unwrap();
            let all: Vec<f64> = (0..map.num_units())
                .map(|u| euclidean_distance(map.unit_weights(u), &sample))
                .collect();
            let oracle = all
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
                .unwrap();
            prop_assert_eq!(bmu, oracle.0);
            prop_assert!((dist - all[bmu]).abs() < 1e-12);
        }

        #[test]
        fn weights_stay_in_unit_interval(
            (map, sample) in arb_map_and_sample(),
            lr in 0.0f64..=1.0,
            radius in 0.0f64..4.0,
        ) {
            let mut map = map;
            for _ in 0..5 {
                train_step(&mut map, &sample, lr, radius).unwrap();
            }
            prop_assert!(map.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }

        #[test]
        fn distance_symmetric_and_nonnegative(
            a in proptest::collection::vec(0.0f64..=1.0, 1..6),
            seed in any::<u64>(),
        ) {
            let b: Vec<f64> = {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                a.iter().map(|_| rng.random_range(0.0..=1.0)).collect()
            };
            let d_ab = euclidean_distance(&a, &b);
            let d_ba = euclidean_distance(&b, &a);
            prop_assert!(d_ab >= 0.0);
            prop_assert_eq!(d_ab, d_ba);
        }
    }
}
