//! Seeded, deterministic clustering: k-means, NMF and LDA topic models, and
//! spectral clustering over embeddings.
//!
//! All algorithms return a [`ClusterAssignment`] indexed by input row
//! (benchmark order). Ties resolve to the lowest index everywhere.

mod kmeans;
mod lda;
mod nmf;
mod spectral;

pub use kmeans::{kmeans, squared_distance};
pub use lda::{lda_topics, LdaCorpus, LdaParams};
pub use nmf::{nmf, nmf_topics, NmfFactors};
pub use spectral::{
    cosine_similarity, mutual_knn_graph, normalized_laplacian, smallest_eigenpairs,
    spectral_clusters, spectral_embedding, EigenPairs, SpectralEmbedding,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot form {k} clusters from {n} items")]
    BadK { k: usize, n: usize },
    #[error("no input rows")]
    EmptyInput,
    #[error("row {row} has dimension {found}, expected {expected}")]
    DimMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("n_neighbors = {n_neighbors} must be below the item count {n}")]
    BadNeighbors { n_neighbors: usize, n: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// How members of one cluster are ranked for within-cluster selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinClusterOrder {
    /// Closest to the centroid first (k-means, spectral).
    AscendingDistance,
    /// Largest dominant-topic weight first (NMF, LDA).
    DescendingWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster index in `[0, k)` per input row.
    pub labels: Vec<usize>,
    /// Per-row ranking key: distance to centroid or dominant-topic weight.
    pub affinity: Vec<f64>,
    pub order: WithinClusterOrder,
    /// Per-row topic weights (NMF `W` rows, LDA proportions); empty for
    /// centroid-based methods.
    pub topic_weights: Vec<Vec<f64>>,
    /// k-means: inertia after each assignment step. NMF: squared Frobenius
    /// reconstruction error per iteration. LDA: tokens reassigned per sweep.
    pub objective_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn n_clusters_used(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s > 0).count()
    }
}

/// `clamp(round(sqrt(n / 2)), 2, 25)`, never above `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64 / 2.0).sqrt().round() as usize).clamp(2, 25);
    k.min(n.max(1))
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
