//! Subset plans: which samples a method keeps at a given sampling rate.
//!
//! Subset size is `max(1, round_half_up(rate_pct * N / 100))`. Random and
//! ranked plans are nested: for a fixed seed, a lower-rate plan is a prefix of
//! every higher-rate plan.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterAssignment, WithinClusterOrder};
use crate::corpus::{Benchmark, BenchmarkView};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("no samples left to draw from")]
    EmptyPool,
    #[error("sampling rate {0}% is outside 1..=100")]
    BadRate(u32),
    #[error("no metric value for sample {0:?}")]
    MissingMetric(String),
    #[error("metric value for sample {0:?} is not finite")]
    BadMetric(String),
    #[error("cluster assignment covers {found} samples, benchmark has {expected}")]
    AssignmentMismatch { expected: usize, found: usize },
    #[error("method {method}: no cluster assignment for seed {seed}")]
    MissingAssignment { method: String, seed: u64 },
    #[error("unknown sampling method {0:?}")]
    UnknownMethod(String),
    #[error("method {0:?} listed twice")]
    DuplicateMethod(String),
    #[error("method {method} at {rate}%: {source}")]
    Method {
        method: String,
        rate: u32,
        #[source]
        source: Box<SamplerError>,
    },
}

pub type Result<T> = std::result::Result<T, SamplerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascending,
    Descending,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ascending" | "asc" => Ok(Self::Ascending),
            "descending" | "desc" => Ok(Self::Descending),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QualityMetric {
    SpellingErrors,
    RepeatingWords,
    LexicalDiversity,
    AvgWordLength,
    Cpd,
}

impl QualityMetric {
    /// Column name in metric tables.
    pub fn column(self) -> &'static str {
        match self {
            Self::SpellingErrors => "spelling_errors",
            Self::RepeatingWords => "repeating_words",
            Self::LexicalDiversity => "lexical_diversity",
            Self::AvgWordLength => "avg_word_length",
            Self::Cpd => "cpd",
        }
    }

    pub fn default_direction(self) -> Direction {
        match self {
            Self::SpellingErrors | Self::RepeatingWords => Direction::Ascending,
            Self::LexicalDiversity | Self::AvgWordLength | Self::Cpd => Direction::Descending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Random,
    Quality(QualityMetric),
    Difficulty,
    ClusterNmf,
    ClusterLda,
    ClusterKmeans,
    /// Spectral clustering of the embedding set with this tag.
    ClusterSpectral(String),
}

impl MethodKind {
    pub fn is_ranked(&self) -> bool {
        matches!(self, Self::Quality(_) | Self::Difficulty)
    }

    pub fn is_cluster(&self) -> bool {
        matches!(
            self,
            Self::ClusterNmf | Self::ClusterLda | Self::ClusterKmeans | Self::ClusterSpectral(_)
        )
    }
}

/// A sampling method as configured for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpec {
    pub id: String,
    pub kind: MethodKind,
    /// Ranking direction; meaningful for ranked methods only.
    pub direction: Direction,
    pub params: BTreeMap<String, String>,
}

impl MethodSpec {
    /// Parses a method id such as `quality_cpd` or `cluster_spectral_mteb`,
    /// with the default direction for ranked methods.
    pub fn parse(id: &str) -> Result<Self> {
        let kind = match id {
            "random" => MethodKind::Random,
            "quality_spelling_error" | "quality_spelling_errors" => {
                MethodKind::Quality(QualityMetric::SpellingErrors)
            }
            "quality_repeating_words" => MethodKind::Quality(QualityMetric::RepeatingWords),
            "quality_lexical_diversity" => MethodKind::Quality(QualityMetric::LexicalDiversity),
            "quality_avg_word_length" => MethodKind::Quality(QualityMetric::AvgWordLength),
            "quality_cpd" => MethodKind::Quality(QualityMetric::Cpd),
            "difficulty_composite" => MethodKind::Difficulty,
            "cluster_nmf_tfidf" => MethodKind::ClusterNmf,
            "cluster_lda_tfidf" => MethodKind::ClusterLda,
            "cluster_kmeans_tfidf" => MethodKind::ClusterKmeans,
            other => match other.strip_prefix("cluster_spectral_") {
                Some(tag) if !tag.is_empty() => MethodKind::ClusterSpectral(tag.to_string()),
                _ => return Err(SamplerError::UnknownMethod(other.to_string())),
            },
        };
        let direction = match &kind {
            MethodKind::Quality(m) => m.default_direction(),
            _ => Direction::Descending,
        };
        Ok(Self {
            id: id.to_string(),
            kind,
            direction,
            params: BTreeMap::new(),
        })
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn param<T: FromStr>(&self, key: &str) -> Option<std::result::Result<T, T::Err>> {
        self.params.get(key).map(|v| v.parse())
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Ordered sample ids chosen by one method at one rate and seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPlan {
    pub benchmark: String,
    pub method: String,
    pub rate_pct: u32,
    pub seed: u64,
    pub ids: Vec<String>,
}

/// Running union of selected samples across benchmarks at one (method, rate).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperSubset {
    pub method: String,
    pub rate_pct: u32,
    /// (benchmark, sample id)
    pub ids: BTreeSet<(String, String)>,
}

impl SuperSubset {
    pub fn new(method: impl Into<String>, rate_pct: u32) -> Self {
        Self {
            method: method.into(),
            rate_pct,
            ids: BTreeSet::new(),
        }
    }

    pub fn contains(&self, benchmark: &str, id: &str) -> bool {
        self.ids.contains(&(benchmark.to_string(), id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn check_rate(rate_pct: u32) -> Result<()> {
    if (1..=100).contains(&rate_pct) {
        Ok(())
    } else {
        Err(SamplerError::BadRate(rate_pct))
    }
}

/// `max(1, round_half_up(rate_pct * n / 100))`.
pub fn subset_size(rate_pct: u32, n: usize) -> usize {
    ((rate_pct as usize * n + 50) / 100).max(1)
}

fn target_size(view: &BenchmarkView<'_>, rate_pct: u32) -> Result<usize> {
    check_rate(rate_pct)?;
    if view.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    Ok(subset_size(rate_pct, view.len()))
}

fn plan(view: &BenchmarkView<'_>, method: &str, rate_pct: u32, seed: u64, ids: Vec<String>) -> SubsetPlan {
    SubsetPlan {
        benchmark: view.benchmark().name().to_string(),
        method: method.to_string(),
        rate_pct,
        seed,
        ids,
    }
}

/// Seeded Fisher-Yates shuffle of the pool, truncated to the subset size.
pub fn sample_random(view: &BenchmarkView<'_>, method: &str, rate_pct: u32, seed: u64) -> Result<SubsetPlan> {
    let size = target_size(view, rate_pct)?;
    let mut ids: Vec<String> = view.samples().map(|s| s.id.clone()).collect();
    ids.shuffle(&mut rng::seeded(seed));
    ids.truncate(size);
    Ok(plan(view, method, rate_pct, seed, ids))
}

/// Sorts the pool by `(score, id)` in the given score direction (ids always
/// ascending) and keeps the prefix.
pub fn sample_by_score(
    view: &BenchmarkView<'_>,
    method: &str,
    scores: &BTreeMap<String, f64>,
    direction: Direction,
    rate_pct: u32,
    seed: u64,
) -> Result<SubsetPlan> {
    let size = target_size(view, rate_pct)?;
    let mut keyed = Vec::with_capacity(view.len());
    for s in view.samples() {
        let v = *scores
            .get(&s.id)
            .ok_or_else(|| SamplerError::MissingMetric(s.id.clone()))?;
        if !v.is_finite() {
            return Err(SamplerError::BadMetric(s.id.clone()));
        }
        keyed.push((v, s.id.as_str()));
    }
    keyed.sort_by(|a, b| {
        let by_score = match direction {
            Direction::Ascending => a.0.total_cmp(&b.0),
            Direction::Descending => b.0.total_cmp(&a.0),
        };
        by_score.then_with(|| a.1.cmp(b.1))
    });
    let ids = keyed.into_iter().take(size).map(|(_, id)| id.to_string()).collect();
    Ok(plan(view, method, rate_pct, seed, ids))
}

/// Splits `total` across groups proportionally to `sizes` by the largest
/// remainder rule (remainder ties go to the lower index), never giving a
/// group more than its size.
pub fn largest_remainder_quotas(sizes: &[usize], total: usize) -> Vec<usize> {
    let mut quotas = vec![0usize; sizes.len()];
    let mut capped = vec![false; sizes.len()];
    let mut remaining = total.min(sizes.iter().sum());
    while remaining > 0 {
        let open: Vec<usize> = (0..sizes.len())
            .filter(|&c| !capped[c] && quotas[c] < sizes[c])
            .collect();
        let weight: u128 = open.iter().map(|&c| sizes[c] as u128).sum();
        if weight == 0 {
            break;
        }
        let mut share: Vec<(usize, usize, u128)> = open
            .iter()
            .map(|&c| {
                let num = remaining as u128 * sizes[c] as u128;
                (c, (num / weight) as usize, num % weight)
            })
            .collect();
        let assigned: usize = share.iter().map(|s| s.1).sum();
        let mut leftover = remaining - assigned;
        let mut by_remainder: Vec<usize> = (0..share.len()).collect();
        by_remainder.sort_by(|&a, &b| share[b].2.cmp(&share[a].2).then(share[a].0.cmp(&share[b].0)));
        for &i in &by_remainder {
            if leftover == 0 {
                break;
            }
            share[i].1 += 1;
            leftover -= 1;
        }
        remaining = 0;
        for (c, add, _) in share {
            let room = sizes[c] - quotas[c];
            if add >= room {
                quotas[c] = sizes[c];
                capped[c] = true;
                remaining += add - room;
            } else {
                quotas[c] += add;
            }
        }
    }
    quotas
}

/// Per-cluster quotas by largest remainder; within a cluster, members are
/// taken in affinity order (closest to centroid, or heaviest dominant topic)
/// with id as tie-break. Output is grouped by cluster index.
pub fn sample_stratified(
    view: &BenchmarkView<'_>,
    method: &str,
    assignment: &ClusterAssignment,
    rate_pct: u32,
    seed: u64,
) -> Result<SubsetPlan> {
    let size = target_size(view, rate_pct)?;
    let benchmark = view.benchmark();
    if assignment.len() != benchmark.len() {
        return Err(SamplerError::AssignmentMismatch {
            expected: benchmark.len(),
            found: assignment.len(),
        });
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); assignment.k];
    for &i in view.members() {
        groups[assignment.labels[i]].push(i);
    }
    let samples = benchmark.samples();
    for members in &mut groups {
        members.sort_by(|&a, &b| {
            let by_affinity = match assignment.order {
                WithinClusterOrder::AscendingDistance => {
                    assignment.affinity[a].total_cmp(&assignment.affinity[b])
                }
                WithinClusterOrder::DescendingWeight => {
                    assignment.affinity[b].total_cmp(&assignment.affinity[a])
                }
            };
            by_affinity.then_with(|| samples[a].id.cmp(&samples[b].id))
        });
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quotas = largest_remainder_quotas(&sizes, size);
    let ids = groups
        .iter()
        .zip(&quotas)
        .flat_map(|(members, &q)| members.iter().take(q).map(|&i| samples[i].id.clone()))
        .collect();
    Ok(plan(view, method, rate_pct, seed, ids))
}

/// Method inputs resolved ahead of plan construction.
#[derive(Debug, Clone)]
pub enum PreparedMethod {
    Random,
    Ranked {
        scores: BTreeMap<String, f64>,
        direction: Direction,
    },
    /// One clustering per seed, indexed by benchmark position.
    Stratified {
        assignments: BTreeMap<u64, ClusterAssignment>,
    },
}

/// One plan for the method at one rate and seed.
pub fn sample_one(
    view: &BenchmarkView<'_>,
    method: &str,
    prepared: &PreparedMethod,
    rate_pct: u32,
    seed: u64,
) -> Result<SubsetPlan> {
    match prepared {
        PreparedMethod::Random => sample_random(view, method, rate_pct, seed),
        PreparedMethod::Ranked { scores, direction } => {
            sample_by_score(view, method, scores, *direction, rate_pct, seed)
        }
        PreparedMethod::Stratified { assignments } => {
            let assignment = assignments
                .get(&seed)
                .ok_or_else(|| SamplerError::MissingAssignment {
                    method: method.to_string(),
                    seed,
                })?;
            sample_stratified(view, method, assignment, rate_pct, seed)
        }
    }
}

/// Sorted, deduplicated copy of a rate or seed list.
pub fn canonical<T: Ord + Copy>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Every (method, rate, seed) plan, ordered by method (as given), then rate,
/// then seed. Ranked methods do not depend on the seed and produce a single
/// plan per rate carrying the first seed.
pub fn build_plan_grid(
    view: &BenchmarkView<'_>,
    methods: &[(MethodSpec, PreparedMethod)],
    rates: &[u32],
    seeds: &[u64],
) -> Result<Vec<SubsetPlan>> {
    let rates = canonical(rates);
    let seeds = canonical(seeds);
    if let Some(&bad) = rates.iter().find(|&&r| check_rate(r).is_err()) {
        return Err(SamplerError::BadRate(bad));
    }
    let mut seen = HashSet::new();
    for (spec, _) in methods {
        if !seen.insert(spec.id.as_str()) {
            return Err(SamplerError::DuplicateMethod(spec.id.clone()));
        }
    }
    if rates.is_empty() || seeds.is_empty() {
        return Ok(Vec::new());
    }
    let mut tasks = Vec::new();
    for (m, (_, prepared)) in methods.iter().enumerate() {
        let method_seeds: &[u64] = match prepared {
            PreparedMethod::Ranked { .. } => &seeds[..1],
            _ => &seeds,
        };
        for &rate in &rates {
            for &seed in method_seeds {
                tasks.push((m, rate, seed));
            }
        }
    }
    tasks
        .par_iter()
        .map(|&(m, rate, seed)| {
            let (spec, prepared) = &methods[m];
            sample_one(view, &spec.id, prepared, rate, seed).map_err(|e| SamplerError::Method {
                method: spec.id.clone(),
                rate,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Checks the size rule, id uniqueness and membership, and (for random and
/// ranked methods) the nested-prefix property across rates per seed.
pub fn validate_plans(view: &BenchmarkView<'_>, plans: &[SubsetPlan], nested: bool) -> std::result::Result<(), String> {
    let pool: HashSet<&str> = view.samples().map(|s| s.id.as_str()).collect();
    for p in plans {
        if p.ids.len() != subset_size(p.rate_pct, view.len()) {
            return Err(format!(
                "{} at {}%: {} ids, expected {}",
                p.method,
                p.rate_pct,
                p.ids.len(),
                subset_size(p.rate_pct, view.len())
            ));
        }
        let distinct: HashSet<&str> = p.ids.iter().map(String::as_str).collect();
        if distinct.len() != p.ids.len() || !distinct.is_subset(&pool) {
            return Err(format!("{} at {}%: duplicate or foreign ids", p.method, p.rate_pct));
        }
    }
    if nested {
        let mut by_seed: BTreeMap<(&str, u64), Vec<&SubsetPlan>> = BTreeMap::new();
        for p in plans {
            by_seed.entry((p.method.as_str(), p.seed)).or_default().push(p);
        }
        for group in by_seed.values_mut() {
            group.sort_by_key(|p| p.rate_pct);
            for w in group.windows(2) {
                if !w[1].ids.starts_with(&w[0].ids) {
                    return Err(format!(
                        "{} seed {}: {}% plan is not a prefix of the {}% plan",
                        w[0].method, w[0].seed, w[0].rate_pct, w[1].rate_pct
                    ));
                }
            }
        }
    }
    Ok(())
}

/// A cross-benchmark redundancy link between two samples.
pub type SampleRef = (String, String);

/// The benchmark restricted to samples with no redundant partner already in
/// the SuperSubset.
pub fn mr_filter<'a>(
    benchmark: &'a Benchmark,
    redundant: &[(SampleRef, SampleRef)],
    sup: &SuperSubset,
) -> BenchmarkView<'a> {
    let name = benchmark.name();
    let mut excluded: HashSet<&str> = HashSet::new();
    for (a, b) in redundant {
        for (mine, other) in [(a, b), (b, a)] {
            if mine.0 == name && sup.ids.contains(other) {
                excluded.insert(mine.1.as_str());
            }
        }
    }
    BenchmarkView::filtered(benchmark, |s| !excluded.contains(s.id.as_str()))
}
