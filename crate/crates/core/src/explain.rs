//! Explanation artifacts mined from a trained, labeled map: U-Matrix,
//! starburst basin overlay, K-means cluster map, per-feature heatmaps, and
//! per-sample local explanations.

use crate::classify::{LabeledMap, UnitLabel};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, SignificanceVector};
use crate::som::{euclidean_distance, squared_distance, SomMap};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A value per map unit, in the map's row-major grid layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Mean Euclidean distance from each unit's weights to its existing
/// 4-neighbors' weights. Low values mark cluster interiors, high values
/// mark boundaries.
pub fn u_matrix(map: &SomMap) -> Grid {
    u_matrix_with(map, false)
}

/// U-Matrix over either the 4-neighborhood (default) or, with
/// `diagonal_neighbors`, the full 8-neighborhood for comparison.
pub fn u_matrix_with(map: &SomMap, diagonal_neighbors: bool) -> Grid {
    let values = (0..map.num_units())
        .map(|u| {
            let neighbors = if diagonal_neighbors {
                map.neighbors8(u)
            } else {
                map.neighbors4(u)
            };
            if neighbors.is_empty() {
                return 0.0;
            }
            let total: f64 = neighbors
                .iter()
                .map(|&v| euclidean_distance(map.unit_weights(u), map.unit_weights(v)))
                .sum();
            total / neighbors.len() as f64
        })
        .collect();
    Grid {
        rows: map.rows,
        cols: map.cols,
        values,
    }
}

/// Steepest-descent overlay on a U-Matrix: each unit walks to its basin
/// minimum, the walk's first hop becomes the unit's segment, and walk
/// endpoints are the cluster origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarburstOverlay {
    /// One `(from, to)` hop per non-center unit, toward the unit's lowest
    /// strictly-lower 4-neighbor.
    pub segments: Vec<(usize, usize)>,
    /// Units with no strictly lower 4-neighbor.
    pub centers: Vec<usize>,
    /// Per-unit terminal center; basins partition the grid.
    pub basin_of: Vec<usize>,
}

/// Trace steepest-descent paths on the U-Matrix. From each unit, step to
/// the lowest-valued 4-neighbor while one is strictly lower (ties to the
/// lowest unit index).
pub fn starburst(um: &Grid) -> StarburstOverlay {
    let n = um.values.len();
    let grid_map = SomMap {
        rows: um.rows,
        cols: um.cols,
        dim: 1,
        weights: vec![0.0; n],
    };

    // next_hop[u] = downhill neighbor, or u itself when u is a center.
    // neighbors4 yields ascending indices, so a strict `<` keeps the lowest
    // index among tied minima.
    let next_hop: Vec<usize> = (0..n)
        .map(|u| {
            let mut best = (u, um.values[u]);
            for v in grid_map.neighbors4(u) {
                if um.values[v] < best.1 {
                    best = (v, um.values[v]);
                }
            }
            best.0
        })
        .collect();

    let mut segments = Vec::new();
    let mut centers = Vec::new();
    for (u, &hop) in next_hop.iter().enumerate() {
        if hop == u {
            centers.push(u);
        } else {
            segments.push((u, hop));
        }
    }

    let basin_of = (0..n)
        .map(|mut u| {
            while next_hop[u] != u {
                u = next_hop[u];
            }
            u
        })
        .collect();

    StarburstOverlay {
        segments,
        centers,
        basin_of,
    }
}

/// K-means assignment of map units in weight space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster id per unit, in [0, k).
    pub cluster_of: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

/// Lloyd's algorithm over the unit weight vectors with seeded k-means++
/// initialization. Runs to an assignment fixpoint or 100 iterations; an
/// emptied cluster is reseeded to the point farthest from its centroid.
pub fn kmeans_units(map: &SomMap, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = map.num_units();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must be in [1, {n}], got {k}"
        )));
    }
    let points: Vec<&[f64]> = (0..n).map(|u| map.unit_weights(u)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, k, &mut rng);

    let mut assignment = assign(&points, &centroids);
    let mut prev_objective = objective_of(&points, &assignment, &centroids);
    for _ in 0..100 {
        recompute_centroids(&points, &assignment, &mut centroids);
        let next = assign(&points, &centroids);
        let objective = objective_of(&points, &next, &centroids);
        debug_assert!(
            objective <= prev_objective + 1e-9,
            "k-means objective increased: {prev_objective} -> {objective}"
        );
        prev_objective = objective;
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(ClusterAssignment {
        k,
        cluster_of: assignment,
        centroids,
    })
}

fn kmeans_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..points.len());
    centroids.push(points[first].to_vec());

    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            // All remaining points coincide with a centroid; take the first
            // index not yet used so k distinct slots still exist.
            (0..points.len())
                .find(|&i| !centroids.iter().any(|c| c.as_slice() == points[i]))
                .unwrap_or(0)
        };
        centroids.push(points[chosen].to_vec());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, centroids.last().unwrap()));
        }
    }
    centroids
}

fn objective_of(points: &[&[f64]], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| squared_distance(p, &centroids[c]))
        .sum()
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d2 = squared_distance(p, centroid);
                if d2 < best.1 {
                    best = (c, d2);
                }
            }
            best.0
        })
        .collect()
}

fn recompute_centroids(points: &[&[f64]], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, &x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            // Reseed to the point farthest from its own centroid.
            let farthest = points
                .iter()
                .enumerate()
                .max_by(|(i, p), (j, q)| {
                    let da = squared_distance(p, &centroids[assignment[*i]]);
                    let db = squared_distance(q, &centroids[assignment[*j]]);
                    da.partial_cmp(&db).unwrap().then(j.cmp(i))
                })
                .map(|(i, _)| i)
                .unwrap();
            centroids[c] = points[farthest].to_vec();
        } else {
            for (j, s) in sums[c].iter().enumerate() {
                centroids[c][j] = s / counts[c] as f64;
            }
        }
    }
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn kmeans_objective(map: &SomMap, clusters: &ClusterAssignment) -> f64 {
    (0..map.num_units())
        .map(|u| squared_distance(map.unit_weights(u), &clusters.centroids[clusters.cluster_of[u]]))
        .sum()
}

/// Column `feature` of the weight matrix laid out on the grid.
pub fn feature_heatmap(map: &SomMap, feature: usize) -> Result<Grid> {
    if feature >= map.dim {
        return Err(Error::InvalidArgument(format!(
            "feature index {feature} out of range (dim {})",
            map.dim
        )));
    }
    let values = (0..map.num_units())
        .map(|u| map.unit_weights(u)[feature])
        .collect();
    Ok(Grid {
        rows: map.rows,
        cols: map.cols,
        values,
    })
}

/// Per-feature distance ranking for one prediction. Smaller distance means
/// the feature matched its BMU value more closely, i.e. mattered more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub bmu: usize,
    pub predicted: u8,
    /// (feature name, |x_f - w_bmu,f|) sorted ascending by distance.
    pub scores: Vec<(String, f64)>,
}

/// Rank every feature of a sample by its distance to the BMU weight.
pub fn local_explanation(
    lm: &LabeledMap,
    sample: &[f64],
    names: &[String],
) -> Result<LocalExplanation> {
    if names.len() != lm.map.dim {
        return Err(Error::DimensionMismatch {
            expected: lm.map.dim,
            actual: names.len(),
        });
    }
    let predicted = crate::classify::predict(lm, sample)?;
    let (bmu, _) = lm.map.best_matching_unit(sample)?;
    let weights = lm.map.unit_weights(bmu);
    let mut scores: Vec<(String, f64)> = names
        .iter()
        .cloned()
        .zip(sample.iter().zip(weights).map(|(x, w)| (x - w).abs()))
        .collect();
    scores.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(LocalExplanation {
        bmu,
        predicted,
        scores,
    })
}

/// Everything the explanation phase produces, ready for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub umatrix: Grid,
    pub starburst: StarburstOverlay,
    pub unit_labels: Vec<UnitLabel>,
    pub clusters: ClusterAssignment,
    /// One (feature name, grid) per feature, in feature order.
    pub heatmaps: Vec<(String, Grid)>,
    pub significance: Option<SignificanceVector>,
    /// (sample id, explanation) for each requested sample.
    pub locals: Vec<(usize, LocalExplanation)>,
}

/// Aggregate U-Matrix, starburst, unit labels, clusters, all heatmaps, the
/// global significance vector, and local explanations for the requested
/// sample ids.
pub fn explanation_bundle(
    lm: &LabeledMap,
    data: &Dataset,
    k: usize,
    seed: u64,
    sample_ids: &[usize],
) -> Result<ExplanationBundle> {
    if data.dim() != lm.map.dim {
        return Err(Error::DimensionMismatch {
            expected: lm.map.dim,
            actual: data.dim(),
        });
    }
    let um = u_matrix(&lm.map);
    let overlay = starburst(&um);
    let clusters = kmeans_units(&lm.map, k, seed)?;
    let heatmaps = data
        .feature_names
        .iter()
        .enumerate()
        .map(|(f, name)| Ok((name.clone(), feature_heatmap(&lm.map, f)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut locals = Vec::with_capacity(sample_ids.len());
    for &id in sample_ids {
        if id >= data.num_samples() {
            return Err(Error::InvalidArgument(format!(
                "unknown sample id {id} (dataset has {} samples)",
                data.num_samples()
            )));
        }
        locals.push((
            id,
            local_explanation(lm, data.sample(id), &data.feature_names)?,
        ));
    }
    Ok(ExplanationBundle {
        umatrix: um,
        starburst: overlay,
        unit_labels: lm.unit_labels.clone(),
        clusters,
        heatmaps,
        significance: data.significance.clone(),
        locals,
    })
}
