//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;
use rayon::prelude::*;

use super::{ClusterAssignment, ClusterError, Result, WithinClusterOrder};
use crate::rng;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate(rows: &[Vec<f64>], k: usize) -> Result<usize> {
    let n = rows.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(ClusterError::DegenerateInput("zero-dimensional rows"));
    }
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(ClusterError::DimMismatch {
            row,
            expected: dim,
            found: r.len(),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ClusterError::DegenerateInput("non-finite coordinate"));
    }
    Ok(dim)
}

fn plus_plus_init(rows: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut rng = rng::seeded(seed);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| squared_distance(r, &rows[first])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Every point coincides with a centroid.
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[next] = true;
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, &rows[next]));
        }
        centroids.push(rows[next].clone());
    }
    centroids
}

/// Nearest centroid (lowest index on ties) and squared distance, per row.
fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    rows.par_iter()
        .map(|r| {
            let mut best = 0;
            let mut best_d = squared_distance(r, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(r, centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            (best, best_d)
        })
        .unzip()
}

fn update(rows: &[Vec<f64>], labels: &[usize], d2: &[f64], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    // Empty clusters move to the point currently farthest from its centroid.
    let mut used = vec![false; rows.len()];
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            sums[c].iter_mut().for_each(|s| *s *= inv);
            continue;
        }
        let mut far = None;
        for (i, &d) in d2.iter().enumerate() {
            if used[i] {
                continue;
            }
            if far.is_none_or(|f: usize| d > d2[f]) {
                far = Some(i);
            }
        }
        let far = far.unwrap_or(0);
        used[far] = true;
        sums[c] = rows[far].clone();
    }
    sums
}

/// Clusters `rows` into `k` groups. Runs at most `iters` Lloyd updates and
/// stops early at an assignment fixpoint. The affinity of each row is its
/// Euclidean distance to its centroid.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, iters: usize) -> Result<ClusterAssignment> {
    let dim = validate(rows, k)?;
    let mut centroids = plus_plus_init(rows, k, seed);
    let (mut labels, mut d2) = assign(rows, &centroids);
    let mut trace = vec![d2.iter().sum::<f64>()];
    for _ in 0..iters {
        centroids = update(rows, &labels, &d2, k, dim);
        let (next_labels, next_d2) = assign(rows, &centroids);
        trace.push(next_d2.iter().sum());
        let converged = next_labels == labels;
        labels = next_labels;
        d2 = next_d2;
        if converged {
            break;
        }
    }
    Ok(ClusterAssignment {
        k,
        labels,
        affinity: d2.iter().map(|d| d.sqrt()).collect(),
        order: WithinClusterOrder::AscendingDistance,
        topic_weights: Vec::new(),
        objective_trace: trace,
    })
}
