//! Non-negative matrix factorization with multiplicative updates.

use rand::Rng;

use super::{argmax, ClusterAssignment, ClusterError, Result, WithinClusterOrder};
use crate::rng;
use crate::vectorize::{SparseRow, TfidfMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    /// n_rows x k
    pub w: Vec<Vec<f64>>,
    /// k x n_cols
    pub h: Vec<Vec<f64>>,
    /// Squared Frobenius error, before the first update and after each one.
    pub error_trace: Vec<f64>,
}

fn gram(m: &[Vec<f64>], k: usize, by_rows: bool) -> Vec<Vec<f64>> {
    // by_rows: M^T M for an (n x k) matrix; otherwise M M^T for a (k x n) one.
    let mut g = vec![vec![0.0; k]; k];
    if by_rows {
        for row in m {
            for a in 0..k {
                for b in a..k {
                    g[a][b] += row[a] * row[b];
                }
            }
        }
    } else {
        for a in 0..k {
            for b in a..k {
                g[a][b] = m[a].iter().zip(&m[b]).map(|(x, y)| x * y).sum();
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[a][b] = g[b][a];
        }
    }
    g
}

fn squared_error(v: &[SparseRow], v_norm2: f64, w: &[Vec<f64>], h: &[Vec<f64>], k: usize) -> f64 {
    // ||V||^2 - 2 <V, WH> + <W^T W, H H^T>
    let mut cross = 0.0;
    for (i, row) in v.iter().enumerate() {
        for &(t, x) in row {
            let wh: f64 = (0..k).map(|a| w[i][a] * h[a][t]).sum();
            cross += x * wh;
        }
    }
    let wtw = gram(w, k, true);
    let hht = gram(h, k, false);
    let mut quad = 0.0;
    for a in 0..k {
        for b in 0..k {
            quad += wtw[a][b] * hht[a][b];
        }
    }
    (v_norm2 - 2.0 * cross + quad).max(0.0)
}

/// Factorizes the non-negative sparse matrix `V` (rows x `n_cols`) into
/// `W * H` of inner rank `k`, starting from seeded uniform (0, 1] factors.
pub fn nmf(v: &[SparseRow], n_cols: usize, k: usize, seed: u64, iters: usize) -> Result<NmfFactors> {
    let n = v.len();
    if n == 0 || n_cols == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 || k > n.min(n_cols) {
        return Err(ClusterError::BadK { k, n: n.min(n_cols) });
    }
    let mut v_norm2 = 0.0;
    for row in v {
        for &(t, x) in row {
            if t >= n_cols {
                return Err(ClusterError::DimMismatch {
                    row: t,
                    expected: n_cols,
                    found: t + 1,
                });
            }
            if !(x >= 0.0) || !x.is_finite() {
                return Err(ClusterError::DegenerateInput("matrix has a negative or non-finite entry"));
            }
            v_norm2 += x * x;
        }
    }
    if v_norm2 == 0.0 {
        return Err(ClusterError::DegenerateInput("all-zero matrix"));
    }

    let mut rng = rng::seeded(seed);
    let mut draw = || 1.0 - rng.random::<f64>();
    let mut w: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| draw()).collect()).collect();
    let mut h: Vec<Vec<f64>> = (0..k).map(|_| (0..n_cols).map(|_| draw()).collect()).collect();

    let mut trace = vec![squared_error(v, v_norm2, &w, &h, k)];
    for _ in 0..iters {
        // H <- H * (W^T V) / (W^T W H)
        let mut numer = vec![vec![0.0; n_cols]; k];
        for (i, row) in v.iter().enumerate() {
            for &(t, x) in row {
                for a in 0..k {
                    numer[a][t] += w[i][a] * x;
                }
            }
        }
        let wtw = gram(&w, k, true);
        for t in 0..n_cols {
            let column: Vec<f64> = (0..k).map(|b| h[b][t]).collect();
            for a in 0..k {
                let denom: f64 = (0..k).map(|b| wtw[a][b] * column[b]).sum();
                if denom > 0.0 {
                    h[a][t] = column[a] * numer[a][t] / denom;
                }
            }
        }

        // W <- W * (V H^T) / (W H H^T)
        let hht = gram(&h, k, false);
        for (i, row) in v.iter().enumerate() {
            let mut numer = vec![0.0; k];
            for &(t, x) in row {
                for a in 0..k {
                    numer[a] += x * h[a][t];
                }
            }
            let current = w[i].clone();
            for a in 0..k {
                let denom: f64 = (0..k).map(|b| current[b] * hht[b][a]).sum();
                if denom > 0.0 {
                    w[i][a] = current[a] * numer[a] / denom;
                }
            }
        }
        trace.push(squared_error(v, v_norm2, &w, &h, k));
    }
    Ok(NmfFactors {
        w,
        h,
        error_trace: trace,
    })
}

/// Topic clustering of TF-IDF rows: each document takes the topic with the
/// largest weight in its `W` row, and that weight is its affinity.
pub fn nmf_topics(tfidf: &TfidfMatrix, k: usize, seed: u64, iters: usize) -> Result<ClusterAssignment> {
    if tfidf.is_all_zero() {
        return Err(ClusterError::DegenerateInput("all-zero matrix"));
    }
    let factors = nmf(&tfidf.rows, tfidf.n_terms(), k, seed, iters)?;
    let labels: Vec<usize> = factors.w.iter().map(|row| argmax(row)).collect();
    let affinity = factors
        .w
        .iter()
        .zip(&labels)
        .map(|(row, &l)| row[l])
        .collect();
    Ok(ClusterAssignment {
        k,
        labels,
        affinity,
        order: WithinClusterOrder::DescendingWeight,
        topic_weights: factors.w,
        objective_trace: factors.error_trace,
    })
}
