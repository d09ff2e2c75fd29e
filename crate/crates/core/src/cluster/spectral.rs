//! Spectral clustering over a mutual-kNN cosine graph.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{kmeans, ClusterAssignment, ClusterError, Result, WithinClusterOrder};
use crate::corpus::EmbeddingSet;

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Dense adjacency of the mutual k-nearest-neighbour graph: `i` and `j` are
/// joined with weight `max(0, cos)` when each is among the other's
/// `n_neighbors` most similar points (similarity ties go to the lower index).
pub fn mutual_knn_graph(vectors: &[Vec<f64>], n_neighbors: usize) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let sim: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| cosine_similarity(&vectors[i], &vectors[j])).collect())
        .collect();
    let mut is_neighbor = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| sim[i][b].total_cmp(&sim[i][a]).then(a.cmp(&b)));
        for &j in others.iter().take(n_neighbors) {
            is_neighbor[i][j] = true;
        }
    }
    let mut adj = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && is_neighbor[i][j] && is_neighbor[j][i] {
                adj[i][j] = sim[i][j].max(0.0);
            }
        }
    }
    adj
}

/// `L = I - D^{-1/2} A D^{-1/2}`; rows of isolated vertices reduce to the identity.
pub fn normalized_laplacian(adj: &[Vec<f64>]) -> DMatrix<f64> {
    let n = adj.len();
    let inv_sqrt: Vec<f64> = adj
        .iter()
        .map(|row| {
            let d: f64 = row.iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - inv_sqrt[i] * adj[i][j] * inv_sqrt[j]
    })
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[c]` is the unit eigenvector for `values[c]`.
    pub vectors: Vec<Vec<f64>>,
}

/// The `count` smallest eigenpairs of a symmetric matrix.
pub fn smallest_eigenpairs(matrix: &DMatrix<f64>, count: usize) -> EigenPairs {
    let eigen = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .total_cmp(&eigen.eigenvalues[b])
            .then(a.cmp(&b))
    });
    order.truncate(count);
    EigenPairs {
        values: order.iter().map(|&c| eigen.eigenvalues[c]).collect(),
        vectors: order
            .iter()
            .map(|&c| eigen.eigenvectors.column(c).iter().copied().collect())
            .collect(),
    }
}

const KMEANS_ITERS: usize = 300;

/// The seed-independent part of spectral clustering: the graph, its
/// eigenvectors and the row-normalized spectral coordinates.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    k: usize,
    /// Row of each input in `distinct`.
    representative: Vec<usize>,
    distinct: Vec<Vec<f64>>,
    /// Indices into `distinct` that have at least one mutual neighbour.
    connected: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

/// Builds the spectral coordinates for the samples `ids`.
///
/// Exact duplicate vectors are collapsed onto their first occurrence before
/// the graph is built, and share its label. Vertices left without a mutual
/// neighbour are excluded from the eigenproblem.
pub fn spectral_embedding(
    embeddings: &EmbeddingSet,
    ids: &[String],
    k: usize,
    n_neighbors: usize,
) -> Result<SpectralEmbedding> {
    let n = ids.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    if n_neighbors == 0 || n_neighbors >= n {
        return Err(ClusterError::BadNeighbors { n_neighbors, n });
    }
    embeddings.ensure_usable()?;
    let vectors: Vec<&[f64]> = ids
        .iter()
        .map(|id| embeddings.get(id))
        .collect::<std::result::Result<_, _>>()?;

    // Collapse exact duplicates.
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut representative = Vec::with_capacity(n);
    for v in &vectors {
        let key: Vec<u64> = v.iter().map(|x| (x + 0.0).to_bits()).collect();
        let next = distinct.len();
        let slot = *seen.entry(key).or_insert(next);
        if slot == next {
            distinct.push(v.to_vec());
        }
        representative.push(slot);
    }
    let m = distinct.len();
    let mut out = SpectralEmbedding {
        k,
        representative,
        distinct,
        connected: Vec::new(),
        rows: Vec::new(),
    };
    if m == 1 {
        return Ok(out);
    }

    let adj = mutual_knn_graph(&out.distinct, n_neighbors.min(m - 1));
    let connected: Vec<usize> = (0..m)
        .filter(|&i| adj[i].iter().any(|&w| w > 0.0))
        .collect();
    if connected.is_empty() {
        return Ok(out);
    }
    let sub: Vec<Vec<f64>> = connected
        .iter()
        .map(|&i| connected.iter().map(|&j| adj[i][j]).collect())
        .collect();
    let k_eff = k.min(connected.len());
    let pairs = smallest_eigenpairs(&normalized_laplacian(&sub), k_eff);
    out.rows = (0..connected.len())
        .map(|r| {
            let row: Vec<f64> = pairs.vectors.iter().map(|v| v[r]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    out.connected = connected;
    Ok(out)
}

impl SpectralEmbedding {
    /// Seeded k-means on the spectral coordinates. Isolated vertices are
    /// attached to the cluster whose mean embedding is most cosine-similar;
    /// their affinity is `2 + (1 - cos)`, which ranks them after every
    /// connected member.
    pub fn cluster(&self, seed: u64) -> Result<ClusterAssignment> {
        let n = self.representative.len();
        if self.connected.is_empty() {
            return Ok(ClusterAssignment {
                k: self.k,
                labels: vec![0; n],
                affinity: vec![0.0; n],
                order: WithinClusterOrder::AscendingDistance,
                topic_weights: Vec::new(),
                objective_trace: Vec::new(),
            });
        }
        let m = self.distinct.len();
        let k_eff = self.k.min(self.connected.len());
        let inner = kmeans(&self.rows, k_eff, seed, KMEANS_ITERS)?;

        let mut distinct_label = vec![usize::MAX; m];
        let mut distinct_affinity = vec![0.0; m];
        for (pos, &i) in self.connected.iter().enumerate() {
            distinct_label[i] = inner.labels[pos];
            distinct_affinity[i] = inner.affinity[pos];
        }

        let dim = self.distinct[0].len();
        let mut means = vec![vec![0.0; dim]; k_eff];
        for (pos, &i) in self.connected.iter().enumerate() {
            let v = &self.distinct[i];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (acc, x) in means[inner.labels[pos]].iter_mut().zip(v) {
                    *acc += x / norm;
                }
            }
        }
        for i in 0..m {
            if distinct_label[i] != usize::MAX {
                continue;
            }
            let mut best = 0;
            let mut best_cos = f64::NEG_INFINITY;
            for (c, mean) in means.iter().enumerate() {
                let cos = cosine_similarity(&self.distinct[i], mean);
                if cos > best_cos {
                    best = c;
                    best_cos = cos;
                }
            }
            distinct_label[i] = best;
            distinct_affinity[i] = 2.0 + (1.0 - best_cos);
        }

        Ok(ClusterAssignment {
            k: self.k,
            labels: self.representative.iter().map(|&r| distinct_label[r]).collect(),
            affinity: self.representative.iter().map(|&r| distinct_affinity[r]).collect(),
            order: WithinClusterOrder::AscendingDistance,
            topic_weights: Vec::new(),
            objective_trace: inner.objective_trace,
        })
    }
}

/// Clusters the samples `ids` by their embeddings; see [`spectral_embedding`]
/// and [`SpectralEmbedding::cluster`].
pub fn spectral_clusters(
    embeddings: &EmbeddingSet,
    ids: &[String],
    k: usize,
    n_neighbors: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    spectral_embedding(embeddings, ids, k, n_neighbors)?.cluster(seed)
}
