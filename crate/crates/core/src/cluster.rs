//! Spherical k-means.
//!
//! Rows are L2-normalised; a point's affinity to a centroid is their cosine.
//! Centroids are normalised means of their members. The objective, the sum of
//! member-to-centroid cosines, never decreases from one iteration to the next.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Key, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iter: 100,
            tol: 1e-6,
            restarts: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// `k x d`, unit rows.
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Sum over points of the cosine to their assigned centroid.
    pub objective: f64,
    pub iterations_run: usize,
    /// Objective after initial assignment and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Index of the restart that produced this model.
    pub restart: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// Recomputes the objective of the stored assignment against `points`.
    pub fn objective_for(&self, points: &Array2<f64>) -> Result<f64> {
        let unit = normalize_rows(points)?;
        Ok(self
            .assignments
            .iter()
            .enumerate()
            .map(|(i, &c)| unit.row(i).dot(&self.centroids.row(c)))
            .sum())
    }
}

/// L2-normalises every row; zero or non-finite rows are rejected.
pub fn normalize_rows(points: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = points.clone();
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {i}")));
        }
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm(i));
        }
        row /= norm;
    }
    Ok(out)
}

fn best_centroid(x: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in centroids.outer_iter().enumerate() {
        let s = x.dot(&c);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

/// Index of the centroid with the highest cosine to `embedding`; ties go to
/// the smallest index.
pub fn assign(model: &ClusterModel, embedding: &[f64]) -> Result<usize> {
    if embedding.len() != model.centroids.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dim {} vs centroid dim {}",
            embedding.len(),
            model.centroids.ncols()
        )));
    }
    Ok(best_centroid(ArrayView1::from(embedding), &model.centroids).0)
}

fn assign_all(unit: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let pairs: Vec<(usize, f64)> = (0..unit.nrows())
        .into_par_iter()
        .map(|i| best_centroid(unit.row(i), centroids))
        .collect();
    pairs.into_iter().unzip()
}

/// Index drawn with probability proportional to `weights` (one uniform draw).
fn weighted_pick(weights: &[f64], rng: &mut StreamRng) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random();
    if total > 0.0 {
        let target = u * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if acc > target {
                return i;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    } else {
        ((u * weights.len() as f64) as usize).min(weights.len() - 1)
    }
}

/// k-means++ seeding with `d(x, c) = 1 - cos(x, c)` and D^2 sampling.
fn init_centroids(unit: &Array2<f64>, k: usize, rng: &mut StreamRng) -> Array2<f64> {
    let n = unit.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(weighted_pick(&vec![1.0; n], rng));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| (1.0 - unit.row(i).dot(&unit.row(chosen[0]))).max(0.0))
        .collect();
    while chosen.len() < k {
        let mut weights: Vec<f64> = dist.iter().map(|d| d * d).collect();
        if weights.iter().all(|&w| w == 0.0) {
            // Every point coincides with a chosen centre; pick among unchosen.
            weights = (0..n).map(|i| if chosen.contains(&i) { 0.0 } else { 1.0 }).collect();
        }
        let next = weighted_pick(&weights, rng);
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min((1.0 - unit.row(i).dot(&unit.row(next))).max(0.0));
        }
    }
    let mut centroids = Array2::zeros((k, unit.ncols()));
    for (j, &i) in chosen.iter().enumerate() {
        centroids.row_mut(j).assign(&unit.row(i));
    }
    centroids
}

/// One Lloyd-style run from a k-means++ start. `unit` must have unit rows.
fn run_once(unit: &Array2<f64>, k: usize, max_iter: usize, tol: f64, rng: &mut StreamRng) -> ClusterModel {
    let n = unit.nrows();
    let mut centroids = init_centroids(unit, k, rng);
    let (mut assignments, mut sims) = assign_all(unit, &centroids);
    let mut objective: f64 = sims.iter().sum();
    let mut trace = vec![objective];
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        // Empty clusters take the worst-fitting point of a cluster that can
        // spare one.
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .min_by(|&a, &b| sims[a].total_cmp(&sims[b]).then(a.cmp(&b)));
            if let Some(p) = donor {
                counts[assignments[p]] -= 1;
                counts[j] += 1;
                assignments[p] = j;
                sims[p] = 1.0;
            }
        }
        let mut sums = Array2::<f64>::zeros((k, unit.ncols()));
        for (i, &a) in assignments.iter().enumerate() {
            let mut row = sums.row_mut(a);
            row += &unit.row(i);
        }
        for (j, sum) in sums.outer_iter().enumerate() {
            let norm = sum.dot(&sum).sqrt();
            if norm > 0.0 {
                centroids.row_mut(j).assign(&(&sum / norm));
            }
        }
        let (next_assign, next_sims) = assign_all(unit, &centroids);
        let next_objective: f64 = next_sims.iter().sum();
        iterations_run += 1;
        trace.push(next_objective);
        let improvement = next_objective - objective;
        assignments = next_assign;
        sims = next_sims;
        objective = next_objective;
        if improvement < tol {
            break;
        }
    }

    ClusterModel {
        centroids,
        assignments,
        objective,
        iterations_run,
        objective_trace: trace,
        restart: 0,
    }
}

/// Best-objective model over `config.restarts` seeded runs (ties: earliest).
pub fn spherical_kmeans(embeddings: &Array2<f64>, config: &KMeansConfig) -> Result<ClusterModel> {
    let n = embeddings.nrows();
    if config.k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {}", config.k)));
    }
    if n < config.k {
        return Err(Error::InvalidArgument(format!(
            "cannot form {} clusters from {n} points",
            config.k
        )));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let unit = normalize_rows(embeddings)?;
    let runs: Vec<ClusterModel> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, "spherical-kmeans", &[Key::from(r)]);
            let mut m = run_once(&unit, config.k, config.max_iter, config.tol, &mut rng);
            m.restart = r;
            m
        })
        .collect();
    let mut best = None::<ClusterModel>;
    for m in runs {
        if best.as_ref().is_none_or(|b| m.objective > b.objective) {
            best = Some(m);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Centroid of a set of unit rows, normalised. Exposed for callers that
/// build centroids from external assignments.
pub fn normalized_mean<'a>(rows: impl IntoIterator<Item = ArrayView1<'a, f64>>, dim: usize) -> Option<Array1<f64>> {
    let mut sum = Array1::<f64>::zeros(dim);
    for r in rows {
        sum += &r;
    }
    let norm = sum.dot(&sum).sqrt();
    (norm > 0.0).then(|| sum / norm)
}
