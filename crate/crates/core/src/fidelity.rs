//! How well subset scores preserve the full-benchmark picture.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ResultMatrix;
use crate::sampler::SubsetPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FidelityError {
    #[error("subset is empty")]
    EmptyPool,
    #[error("vector lengths differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {found}")]
    TooShort { needed: usize, found: usize },
    #[error("sample {0:?} is not in the result matrix")]
    UnknownSample(String),
    #[error("model sets differ between {0:?} and {1:?}")]
    ModelSetMismatch(String, String),
    #[error("need at least two models, got {0}")]
    TooFewModels(usize),
    #[error("no curve has a point in the window [{lo}, {hi}]")]
    WindowUncovered { lo: u32, hi: u32 },
    #[error("plans mix methods {0:?} and {1:?}")]
    MixedMethods(String, String),
    #[error("non-finite value in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, FidelityError>;

/// Mean score per model over some sample set. Models are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub models: Vec<String>,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn full(results: &ResultMatrix) -> Self {
        Self {
            models: results.models().to_vec(),
            scores: results.full_means(),
        }
    }

    pub fn get(&self, model: &str) -> Option<f64> {
        self.models
            .binary_search_by(|m| m.as_str().cmp(model))
            .ok()
            .map(|i| self.scores[i])
    }
}

/// Per-model mean over `ids`. Columns are summed in matrix order, so the
/// full id set reproduces the full-benchmark means bit for bit.
pub fn subset_scores<S: AsRef<str>>(results: &ResultMatrix, ids: &[S]) -> Result<ScoreVector> {
    if ids.is_empty() {
        return Err(FidelityError::EmptyPool);
    }
    let mut cols = Vec::with_capacity(ids.len());
    for id in ids {
        let id = id.as_ref();
        cols.push(
            results
                .sample_position(id)
                .ok_or_else(|| FidelityError::UnknownSample(id.to_string()))?,
        );
    }
    cols.sort_unstable();
    let scores = (0..results.n_models())
        .map(|m| {
            let row = results.row(m);
            cols.iter().map(|&j| row[j]).sum::<f64>() / cols.len() as f64
        })
        .collect();
    Ok(ScoreVector {
        models: results.models().to_vec(),
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// One side had zero variance; `value` is then 0.
    pub constant_input: bool,
}

fn check_pair(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(FidelityError::DimMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < needed {
        return Err(FidelityError::TooShort {
            needed,
            found: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FidelityError::NonFinite);
    }
    Ok(())
}

/// Product-moment correlation, reporting constant input instead of warning.
pub fn pearson_checked(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            constant_input: true,
        });
    }
    Ok(Correlation {
        value: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        constant_input: false,
    })
}

/// Pearson correlation; 0 (with a warning) when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let c = pearson_checked(x, y)?;
    if c.constant_input {
        log::warn!("pearson: constant input, correlation taken as 0");
    }
    Ok(c.value)
}

/// 1-based ranks, ties sharing their average rank. `descending` ranks the
/// largest value first.
pub fn average_ranks(x: &[f64], descending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        let c = x[a].total_cmp(&x[b]);
        if descending { c.reverse() } else { c }
    });
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman_checked(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y, 2)?;
    pearson_checked(&average_ranks(x, false), &average_ranks(y, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wasserstein {
    pub value: f64,
    /// All inputs were in [0, 1] and `value` is expressed ×100.
    pub scaled: bool,
}

/// Mean absolute difference of the sorted samples (equal sizes).
pub fn wasserstein_raw(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 1)?;
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64)
}

/// [`wasserstein_raw`], reported ×100 when every input lies in [0, 1].
pub fn wasserstein_1d(x: &[f64], y: &[f64]) -> Result<Wasserstein> {
    let raw = wasserstein_raw(x, y)?;
    let scaled = x.iter().chain(y).all(|v| (0.0..=1.0).contains(v));
    Ok(Wasserstein {
        value: if scaled { raw * 100.0 } else { raw },
        scaled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub method: String,
    pub rate_pct: u32,
    pub pearson: f64,
    pub spearman: f64,
    pub wd: f64,
    pub variance: f64,
    pub n_seeds: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// One point per rate: Pearson, Spearman and WD against `fullset`, each
/// averaged over the seeds at that rate, plus the across-seed variance of
/// Pearson. Points come out in ascending rate order.
pub fn fidelity_curve(results: &ResultMatrix, plans: &[SubsetPlan], fullset: &ScoreVector) -> Result<Vec<FidelityPoint>> {
    let Some(first) = plans.first() else {
        return Ok(Vec::new());
    };
    if let Some(other) = plans.iter().find(|p| p.method != first.method) {
        return Err(FidelityError::MixedMethods(first.method.clone(), other.method.clone()));
    }
    if fullset.models != results.models() {
        return Err(FidelityError::ModelSetMismatch("fullset".into(), results.benchmark_name().into()));
    }
    let per_plan: Vec<(f64, f64, f64, bool)> = plans
        .par_iter()
        .map(|p| {
            let sub = subset_scores(results, &p.ids)?;
            let r = pearson_checked(&sub.scores, &fullset.scores)?;
            let s = spearman_checked(&sub.scores, &fullset.scores)?;
            let w = wasserstein_1d(&sub.scores, &fullset.scores)?;
            Ok((r.value, s.value, w.value, r.constant_input))
        })
        .collect::<Result<_>>()?;
    let constant = per_plan.iter().filter(|v| v.3).count();
    if constant > 0 {
        log::warn!(
            "{}: {constant} subset(s) gave constant scores; their correlation is taken as 0",
            first.method
        );
    }

    let mut by_rate: BTreeMap<u32, Vec<(u64, (f64, f64, f64))>> = BTreeMap::new();
    for (p, v) in plans.iter().zip(&per_plan) {
        by_rate.entry(p.rate_pct).or_default().push((p.seed, (v.0, v.1, v.2)));
    }
    Ok(by_rate
        .into_iter()
        .map(|(rate, mut vals)| {
            vals.sort_by_key(|v| v.0);
            let r: Vec<f64> = vals.iter().map(|v| v.1 .0).collect();
            let s: Vec<f64> = vals.iter().map(|v| v.1 .1).collect();
            let w: Vec<f64> = vals.iter().map(|v| v.1 .2).collect();
            FidelityPoint {
                method: first.method.clone(),
                rate_pct: rate,
                pearson: mean(&r),
                spearman: mean(&s),
                wd: mean(&w),
                variance: sample_variance(&r),
                n_seeds: vals.len(),
            }
        })
        .collect())
}

/// Pointwise mean of several benchmarks' curves for one method, over the
/// rates every curve has. Variance is averaged too.
pub fn mean_curve(curves: &[&[FidelityPoint]]) -> Vec<FidelityPoint> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    first
        .iter()
        .filter_map(|p| {
            let matched: Vec<&FidelityPoint> = curves
                .iter()
                .map(|c| c.iter().find(|q| q.rate_pct == p.rate_pct))
                .collect::<Option<_>>()?;
            let avg = |f: fn(&FidelityPoint) -> f64| matched.iter().map(|q| f(q)).sum::<f64>() / matched.len() as f64;
            Some(FidelityPoint {
                method: p.method.clone(),
                rate_pct: p.rate_pct,
                pearson: avg(|q| q.pearson),
                spearman: avg(|q| q.spearman),
                wd: avg(|q| q.wd),
                variance: avg(|q| q.variance),
                n_seeds: matched.iter().map(|q| q.n_seeds).min().unwrap_or(0),
            })
        })
        .collect()
}

pub const CURVES_HEADER: &str = "benchmark,method,rate_pct,pearson,spearman,wd,variance,n_seeds";

/// `curves.csv` body rows (no header) for one benchmark.
pub fn curve_rows(benchmark: &str, points: &[FidelityPoint]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            benchmark, p.method, p.rate_pct, p.pearson, p.spearman, p.wd, p.variance, p.n_seeds
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinRateTable {
    pub benchmarks: Vec<String>,
    pub models: Vec<String>,
    /// `per_benchmark[b][m]`
    pub per_benchmark: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

impl WinRateTable {
    /// `(model, average win-rate)`, best first; ties by model id.
    pub fn ranking(&self) -> Vec<(String, f64)> {
        let mut r: Vec<(String, f64)> = self.models.iter().cloned().zip(self.average.iter().copied()).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        r
    }
}

/// Win-rate `(M - rank) / (M - 1)` per benchmark (rank 1 = highest score,
/// ties at their average rank) and its mean across benchmarks.
pub fn win_rate(per_benchmark: &[(String, ScoreVector)]) -> Result<WinRateTable> {
    let Some((first_name, first)) = per_benchmark.first() else {
        return Err(FidelityError::EmptyPool);
    };
    let m = first.models.len();
    if m < 2 {
        return Err(FidelityError::TooFewModels(m));
    }
    for (name, sv) in per_benchmark {
        if sv.models != first.models {
            return Err(FidelityError::ModelSetMismatch(first_name.clone(), name.clone()));
        }
        if sv.scores.iter().any(|v| !v.is_finite()) {
            return Err(FidelityError::NonFinite);
        }
    }
    let denom = (m - 1) as f64;
    let table: Vec<Vec<f64>> = per_benchmark
        .iter()
        .map(|(_, sv)| {
            average_ranks(&sv.scores, true)
                .into_iter()
                .map(|rank| (m as f64 - rank) / denom)
                .collect()
        })
        .collect();
    let average = (0..m)
        .map(|i| table.iter().map(|row| row[i]).sum::<f64>() / table.len() as f64)
        .collect();
    Ok(WinRateTable {
        benchmarks: per_benchmark.iter().map(|(n, _)| n.clone()).collect(),
        models: first.models.clone(),
        per_benchmark: table,
        average,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub window: (u32, u32),
    pub threshold: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            window: (5, 25),
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodWindowStats {
    pub covers_window: bool,
    pub mean_pearson: Option<f64>,
    pub mean_wd: Option<f64>,
    pub mean_variance: Option<f64>,
    /// Smallest rate (over the whole curve) whose Pearson reaches the threshold.
    pub first_rate_at_threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveReport {
    pub selected: String,
    pub window: [u32; 2],
    pub threshold: f64,
    pub per_method: BTreeMap<String, MethodWindowStats>,
}

const PEARSON_TIE: f64 = 1e-6;

/// Picks the method with the highest mean Pearson inside the window. Means
/// within 1e-6 of the best are tied and separated by lower mean WD, then
/// lower mean variance, then method id. Curves with no point in the window
/// are reported but not eligible.
pub fn adaptive_select(
    curves: &BTreeMap<String, Vec<FidelityPoint>>,
    config: &AdaptiveConfig,
) -> Result<(String, AdaptiveReport)> {
    let (lo, hi) = config.window;
    let mut per_method = BTreeMap::new();
    let mut eligible: Vec<(&str, f64, f64, f64)> = Vec::new();
    for (id, points) in curves {
        let inside: Vec<&FidelityPoint> = points.iter().filter(|p| (lo..=hi).contains(&p.rate_pct)).collect();
        let first_rate_at_threshold = points
            .iter()
            .filter(|p| p.pearson >= config.threshold)
            .map(|p| p.rate_pct)
            .min();
        let stats = if inside.is_empty() {
            MethodWindowStats {
                covers_window: false,
                mean_pearson: None,
                mean_wd: None,
                mean_variance: None,
                first_rate_at_threshold,
            }
        } else {
            let n = inside.len() as f64;
            let r = inside.iter().map(|p| p.pearson).sum::<f64>() / n;
            let w = inside.iter().map(|p| p.wd).sum::<f64>() / n;
            let v = inside.iter().map(|p| p.variance).sum::<f64>() / n;
            eligible.push((id.as_str(), r, w, v));
            MethodWindowStats {
                covers_window: true,
                mean_pearson: Some(r),
                mean_wd: Some(w),
                mean_variance: Some(v),
                first_rate_at_threshold,
            }
        };
        per_method.insert(id.clone(), stats);
    }
    let best_r = eligible
        .iter()
        .map(|e| e.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let selected = eligible
        .iter()
        .filter(|e| e.1 >= best_r - PEARSON_TIE)
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(a.3.total_cmp(&b.3))
                .then_with(|| a.0.cmp(b.0))
        })
        .ok_or(FidelityError::WindowUncovered { lo, hi })?
        .0
        .to_string();
    Ok((
        selected.clone(),
        AdaptiveReport {
            selected,
            window: [lo, hi],
            threshold: config.threshold,
            per_method,
        },
    ))
}
