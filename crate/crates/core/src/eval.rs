//! Clustering metrics: Hungarian-matched accuracy, adjusted mutual
//! information and the cosine silhouette score.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::normalize_rows;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `row_to_col[r]` is the column matched to row `r` in the (zero-padded)
    /// square problem.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching, O(n^3) shortest augmenting paths with
/// potentials. Rectangular inputs are padded with zero-cost dummy rows or
/// columns.
pub fn hungarian(cost: &Array2<f64>) -> Result<Assignment> {
    if let Some(((r, c), _)) = cost.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cost[{r}][{c}]")));
    }
    let n = cost.nrows().max(cost.ncols());
    if n == 0 {
        return Ok(Assignment {
            row_to_col: vec![],
            cost: 0.0,
        });
    }
    let at = |r: usize, c: usize| cost.get((r, c)).copied().unwrap_or(0.0);

    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(r, &c)| at(r, c)).sum();
    Ok(Assignment {
        row_to_col,
        cost: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub acc: f64,
    /// Cluster id -> label id used for scoring.
    pub mapping: BTreeMap<usize, usize>,
    /// `confusion[label][cluster]` counts.
    pub confusion: Vec<Vec<usize>>,
}

fn check_lengths(labels: &[usize], clusters: &[usize]) -> Result<()> {
    if labels.len() != clusters.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} cluster assignments",
            labels.len(),
            clusters.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no points to evaluate".into()));
    }
    Ok(())
}

/// Accuracy under the best one-to-one cluster-to-label mapping.
pub fn clustering_accuracy(labels: &[usize], clusters: &[usize]) -> Result<AccuracyResult> {
    check_lengths(labels, clusters)?;
    let k_true = labels.iter().max().map_or(0, |m| m + 1);
    let k_pred = clusters.iter().max().map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; k_pred]; k_true];
    for (&l, &c) in labels.iter().zip(clusters) {
        confusion[l][c] += 1;
    }
    let size = k_true.max(k_pred);
    let cost = Array2::from_shape_fn((size, size), |(c, l)| {
        if c < k_pred && l < k_true {
            -(confusion[l][c] as f64)
        } else {
            0.0
        }
    });
    let assignment = hungarian(&cost)?;
    let mapping: BTreeMap<usize, usize> = assignment
        .row_to_col
        .iter()
        .enumerate()
        .filter(|&(c, &l)| c < k_pred && l < k_true)
        .map(|(c, &l)| (c, l))
        .collect();
    let hits = labels
        .iter()
        .zip(clusters)
        .filter(|(l, c)| mapping.get(c) == Some(l))
        .count();
    Ok(AccuracyResult {
        acc: hits as f64 / labels.len() as f64,
        mapping,
        confusion,
    })
}

/// Dense contingency table between two labelings with arbitrary ids.
pub fn contingency(labels: &[usize], clusters: &[usize]) -> Result<Vec<Vec<usize>>> {
    check_lengths(labels, clusters)?;
    let dense = |xs: &[usize]| {
        let mut ids: Vec<usize> = xs.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let map: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        (ids.len(), xs.iter().map(|x| map[x]).collect::<Vec<_>>())
    };
    let (ku, u) = dense(labels);
    let (kv, v) = dense(clusters);
    let mut table = vec![vec![0usize; kv]; ku];
    for (a, b) in u.into_iter().zip(v) {
        table[a][b] += 1;
    }
    Ok(table)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn marginals(table: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>, usize) {
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let kv = table.first().map_or(0, Vec::len);
    let cols: Vec<usize> = (0..kv).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let n = rows.iter().sum();
    (rows, cols, n)
}

pub fn mutual_information(table: &[Vec<usize>]) -> f64 {
    let (rows, cols, n) = marginals(table);
    let n = n as f64;
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Expected mutual information of two partitions with the given marginals
/// under the hypergeometric (random permutation) model.
pub fn expected_mutual_information(table: &[Vec<usize>]) -> f64 {
    let (rows, cols, n) = marginals(table);
    if n == 0 {
        return 0.0;
    }
    // ln(x!) for x in 0..=n.
    let mut ln_fact = vec![0.0f64; n + 1];
    for x in 1..=n {
        ln_fact[x] = ln_fact[x - 1] + (x as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in &rows {
        for &b in &cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = ln_fact[a] + ln_fact[b] + ln_fact[n - a] + ln_fact[n - b] - ln_fact[n];
            for nij in lo..=hi {
                let ln_p = fixed
                    - ln_fact[nij]
                    - ln_fact[a - nij]
                    - ln_fact[b - nij]
                    - ln_fact[n + nij - a - b];
                let x = nij as f64;
                emi += x / nf * (nf * x / (a as f64 * b as f64)).ln() * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with natural logs and arithmetic-mean
/// normalisation. Two single-cluster partitions score 1.
pub fn adjusted_mutual_information(labels: &[usize], clusters: &[usize]) -> Result<f64> {
    let table = contingency(labels, clusters)?;
    let (rows, cols, n) = marginals(&table);
    if rows.len() == 1 && cols.len() == 1 {
        return Ok(1.0);
    }
    let nf = n as f64;
    let mi = mutual_information(&table);
    let emi = expected_mutual_information(&table);
    let normalizer = 0.5 * (entropy(&rows, nf) + entropy(&cols, nf));
    let mut denominator = normalizer - emi;
    // Same guard as the common reference implementation for a vanishing
    // denominator.
    let eps = f64::EPSILON;
    denominator = if denominator < 0.0 {
        denominator.min(-eps)
    } else {
        denominator.max(eps)
    };
    Ok((mi - emi) / denominator)
}

/// Mean silhouette with cosine distance `1 - cos`.
///
/// Points in singleton clusters score 0, as do points with `a = b = 0`. When
/// there are more than `sample_cap` points a seeded subsample of that size is
/// scored on its own.
pub fn silhouette_score(
    embeddings: &Array2<f64>,
    assignments: &[usize],
    sample_cap: Option<usize>,
    seed: u64,
) -> Result<f64> {
    let n = embeddings.nrows();
    if assignments.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} assignments for {n} embeddings",
            assignments.len()
        )));
    }
    let idx: Vec<usize> = match sample_cap {
        Some(cap) if n > cap => {
            let mut r = rng::stream(seed, "silhouette-sample", &[]);
            let mut s = rand::seq::index::sample(&mut r, n, cap).into_vec();
            s.sort_unstable();
            s
        }
        _ => (0..n).collect(),
    };
    let mut cluster_ids: Vec<usize> = idx.iter().map(|&i| assignments[i]).collect();
    cluster_ids.sort_unstable();
    cluster_ids.dedup();
    if cluster_ids.len() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two non-empty clusters".into(),
        ));
    }
    let dense: HashMap<usize, usize> = cluster_ids.iter().enumerate().map(|(d, &c)| (c, d)).collect();
    let k = cluster_ids.len();

    let sub = Array2::from_shape_fn((idx.len(), embeddings.ncols()), |(r, c)| embeddings[[idx[r], c]]);
    let unit = normalize_rows(&sub)?;
    let labels: Vec<usize> = idx.iter().map(|&i| dense[&assignments[i]]).collect();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }

    let scores: Vec<f64> = (0..idx.len())
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0f64; k];
            let xi = unit.row(i);
            for (j, xj) in unit.outer_iter().enumerate() {
                if j != i {
                    sums[labels[j]] += (1.0 - xi.dot(&xj)).max(0.0);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub ami: f64,
    /// Raw silhouette in [-1, 1] (multiply by 100 for percent tables).
    pub silhouette: Option<f64>,
    pub mapping: BTreeMap<usize, usize>,
    pub confusion: Vec<Vec<usize>>,
}

/// Label-based metrics plus, when embeddings are given, the silhouette.
pub fn evaluate(
    labels: &[usize],
    clusters: &[usize],
    embeddings: Option<&Array2<f64>>,
    sample_cap: Option<usize>,
    seed: u64,
) -> Result<EvalReport> {
    let acc = clustering_accuracy(labels, clusters)?;
    let ami = adjusted_mutual_information(labels, clusters)?;
    let silhouette = embeddings
        .map(|e| silhouette_score(e, clusters, sample_cap, seed))
        .transpose()?;
    Ok(EvalReport {
        acc: acc.acc,
        ami,
        silhouette,
        mapping: acc.mapping,
        confusion: acc.confusion,
    })
}
