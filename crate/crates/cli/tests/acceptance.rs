//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::panic;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use sublime_core::cluster::{self, normalized_laplacian, smallest_eigenpairs};
use sublime_core::corpus::{Benchmark, EmbeddingSet, ResultMatrix, Sample};
use sublime_core::experiment::{self, SweepBenchmark, SweepPoint};
use sublime_core::fidelity::{self, AdaptiveConfig, FidelityPoint, ScoreVector};
use sublime_core::redundancy;
use sublime_core::sampler::{self, MethodSpec, PreparedMethod, SampleRef};
use sublime_core::textstats::{self, DifficultyWeights, ReadabilityProfile, WordSet};

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{label}: got {got}, want {want} (tol {tol:e})"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn metrics(bench: &Benchmark) -> experiment::MetricsTable {
    experiment::compute_metrics(
        bench,
        &WordSet::default_english(),
        &WordSet::default_easy_words(),
        &DifficultyWeights::default(),
    )
    .unwrap()
}

const ALL_METHODS: &[&str] = &[
    "random",
    "quality_spelling_error",
    "quality_repeating_words",
    "quality_lexical_diversity",
    "quality_avg_word_length",
    "quality_cpd",
    "difficulty_composite",
    "cluster_nmf_tfidf",
    "cluster_lda_tfidf",
    "cluster_kmeans_tfidf",
    "cluster_spectral_synth",
];

fn identity() -> Check {
    let bench = synth_benchmark("synth", "q", 200, 11);
    let results = leaderboard(&bench, 20, 0.2, 0.8, 12);
    let embeddings = BTreeMap::from([("synth".to_string(), topic_embeddings(&bench, 16, 13))]);
    let table = metrics(&bench);
    let seeds = [1, 2, 3, 4, 5];
    let methods = ALL_METHODS
        .iter()
        .map(|id| {
            let spec = MethodSpec::parse(id).unwrap();
            let prepared = experiment::prepare_method(&bench, &spec, Some(&table), &embeddings, &seeds).map_err(err)?;
            Ok((spec, prepared))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let run = experiment::run_benchmark(&bench, &results, &methods, &[100], &seeds).map_err(err)?;
    let mut worst_r: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for (id, curve) in &run.curves {
        ensure(curve.len() == 1, || format!("{id}: expected one point"))?;
        let p = &curve[0];
        ensure((p.pearson - 1.0).abs() <= 1e-12 && p.wd.abs() <= 1e-12, || {
            format!("{id}: pearson {} wd {}", p.pearson, p.wd)
        })?;
        worst_r = worst_r.max((p.pearson - 1.0).abs());
        worst_w = worst_w.max(p.wd.abs());
    }
    Ok(format!(
        "{} methods, max |pearson-1| = {worst_r:.1e}, max wd = {worst_w:.1e}",
        run.curves.len()
    ))
}

fn synthetic_leaderboard() -> Check {
    let samples = (0..2000).map(|i| Sample::new(format!("s{i:04}"), "x")).collect();
    let bench = Benchmark::new("bernoulli", samples).unwrap();
    let results = leaderboard(&bench, 50, 0.2, 0.8, 2024);
    let methods = vec![(MethodSpec::parse("random").unwrap(), PreparedMethod::Random)];
    let run = experiment::run_benchmark(&bench, &results, &methods, &[10], &[1, 2, 3, 4, 5]).map_err(err)?;
    let p = &run.curves[0].1[0];
    ensure(p.n_seeds == 5, || format!("{} seeds", p.n_seeds))?;
    ensure(p.pearson >= 0.95, || format!("mean pearson {:.4} < 0.95", p.pearson))?;
    ensure(p.wd <= 3.0, || format!("wd {:.3} > 3", p.wd))?;
    Ok(format!("mean pearson {:.4}, wd {:.3}", p.pearson, p.wd))
}

const EASY_ROWS: [&str; 2] = ["Can pigs fly?", "Is a dog always a dog?"];
const HARD_ROWS: [&str; 2] = [
    "The Welsh describe it as \"one of our most famous universities that often tops the ranking of our \
     undergraduate institutions, with classical architecture and modern buildings, a law school, and a campus \
     in an urban setting in a major city\". What is the name of the university?",
    "Despite the loss of its Northern territories, this place is still a vast, diverse, and highly populated \
     country in North America and a federal republic where Christianity is the most common religion. It's \
     called the \"United\" what?",
];

fn readability(text: &str) -> ReadabilityProfile {
    textstats::readability_profile(&textstats::tokenize(text), &WordSet::default_easy_words()).unwrap()
}

fn formulas() -> Check {
    let t = 1e-9;
    close("pearson linear", fidelity::pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).map_err(err)?, 1.0, t)?;
    close("pearson reversed", fidelity::pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).map_err(err)?, -1.0, t)?;
    close("pearson swap", fidelity::pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).map_err(err)?, 0.5, t)?;

    close("wd raw", fidelity::wasserstein_raw(&[0.0, 0.0, 0.0], &[0.0, 0.0, 3.0]).map_err(err)?, 1.0, t)?;
    let x = [0.1, 0.4, 0.2];
    let y: Vec<f64> = x.iter().map(|v| v + 0.25).collect();
    close("wd shift", fidelity::wasserstein_1d(&x, &y).map_err(err)?.value, 25.0, t)?;
    close("wd self", fidelity::wasserstein_1d(&x, &x).map_err(err)?.value, 0.0, t)?;

    let five = ScoreVector {
        models: model_names(5),
        scores: vec![0.9, 0.7, 0.5, 0.3, 0.1],
    };
    let table = fidelity::win_rate(&[("b".to_string(), five)]).map_err(err)?;
    close("win-rate rank 1", table.average[0], 1.0, t)?;
    close("win-rate rank 2", table.average[1], 0.75, t)?;
    close("win-rate rank 5", table.average[4], 0.0, t)?;
    let two = |s: [f64; 2]| ScoreVector {
        models: model_names(2),
        scores: s.to_vec(),
    };
    let opposite = fidelity::win_rate(&[("x".into(), two([1.0, 0.0])), ("y".into(), two([0.0, 1.0]))]).map_err(err)?;
    close("opposite rankings", opposite.average[0], 0.5, t)?;
    close("opposite rankings", opposite.average[1], 0.5, t)?;

    let dict = WordSet::from_words(["a", "b", "can", "pigs", "fly"]);
    let q = textstats::quality_profile(&textstats::tokenize("a a b"), &dict);
    close("lexical diversity", q.lexical_diversity, 2.0 / 3.0, t)?;
    ensure(q.repeating_words == 1, || format!("repeating words {}", q.repeating_words))?;
    let q = textstats::quality_profile(&textstats::tokenize("Can pigs fly?"), &dict);
    ensure(q.spelling_errors == 0, || format!("spelling errors {}", q.spelling_errors))?;
    close("avg word length", q.avg_word_length, 10.0 / 3.0, t)?;
    close("cpd", textstats::quality_profile(&textstats::tokenize("Ab cd."), &dict).cpd, 5.0 / 9.0, t)?;

    let pigs = readability("Can pigs fly?");
    close("dale-chall", pigs.dale_chall, 0.1488, t)?;
    close("flesch", pigs.flesch, 119.19, t)?;
    close("fog", pigs.gunning_fog, 1.2, t)?;
    close("flesch single word", readability("a").flesch, 121.22, t)?;
    let fog = |g: f64| ReadabilityProfile {
        difficult_pct: 0.0,
        dale_chall: 0.0,
        flesch: 0.0,
        gunning_fog: g,
    };
    let d = textstats::difficulty_scores(&[fog(1.2), fog(23.9)], &DifficultyWeights::new(0.0, 0.0, 0.0, 1.0))
        .map_err(err)?;
    close("difficulty min", d[0], 0.0, t)?;
    close("difficulty max", d[1], 1.0, t)?;

    let easy: Vec<ReadabilityProfile> = EASY_ROWS.iter().map(|s| readability(s)).collect();
    let hard: Vec<ReadabilityProfile> = HARD_ROWS.iter().map(|s| readability(s)).collect();
    for h in &hard {
        for e in &easy {
            ensure(h.gunning_fog > e.gunning_fog, || format!("fog {} <= {}", h.gunning_fog, e.gunning_fog))?;
            ensure(h.dale_chall > e.dale_chall, || format!("dale-chall {} <= {}", h.dale_chall, e.dale_chall))?;
        }
    }
    Ok(format!(
        "unit examples within 1e-9; fog easy {:.2}/{:.2} < hard {:.2}/{:.2}",
        easy[0].gunning_fog, easy[1].gunning_fog, hard[0].gunning_fog, hard[1].gunning_fog
    ))
}

fn nonincreasing(trace: &[f64], tol: f64) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn clustering() -> Check {
    let mut r = rng(404);
    for inst in 0..100 {
        let n = r.random_range(20..60);
        let dim = r.random_range(2..6);
        let k = r.random_range(2..6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut r, dim)).collect();
        let a = cluster::kmeans(&rows, k, inst, 100).map_err(err)?;
        ensure(nonincreasing(&a.objective_trace, 1e-9), || format!("kmeans instance {inst}: {:?}", a.objective_trace))?;

        let cols = r.random_range(6..20);
        let v: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|_| {
                (0..cols)
                    .filter_map(|c| (r.random::<f64>() < 0.4).then(|| (c, r.random::<f64>())))
                    .collect()
            })
            .collect();
        let f = cluster::nmf(&v, cols, k.min(cols), inst, 60).map_err(err)?;
        ensure(nonincreasing(&f.error_trace, 1e-9), || format!("nmf instance {inst}: {:?}", f.error_trace))?;
    }

    // Two groups on disjoint coordinates: cosine across groups is exactly 0.
    let dim = 8;
    let mut entries = Vec::new();
    for i in 0..80 {
        let mut v = vec![0.0; dim];
        let base = if i < 40 { 0 } else { 4 };
        v[base] = 1.0;
        for d in 0..4 {
            v[base + d] += 0.4 * r.random::<f64>();
        }
        entries.push((format!("p{i:02}"), v));
    }
    let vectors: Vec<Vec<f64>> = entries.iter().map(|e| e.1.clone()).collect();
    let ids: Vec<String> = entries.iter().map(|e| e.0.clone()).collect();
    let adj = cluster::mutual_knn_graph(&vectors, 6);
    let cross = (0..40).any(|i| (40..80).any(|j| adj[i][j] > 0.0));
    ensure(!cross, || "planted graph has cross-component edges".into())?;
    let lap = normalized_laplacian(&adj);
    let pairs = smallest_eigenpairs(&lap, 80);
    let mut residual: f64 = 0.0;
    for (lambda, v) in pairs.values.iter().zip(&pairs.vectors) {
        for i in 0..lap.nrows() {
            let lv: f64 = (0..lap.ncols()).map(|j| lap[(i, j)] * v[j]).sum();
            residual = residual.max((lv - lambda * v[i]).abs());
        }
    }
    ensure(residual <= 1e-7, || format!("eigen residual {residual:e}"))?;
    let set = EmbeddingSet::new(entries).unwrap();
    for seed in 1..=5 {
        let a = cluster::spectral_clusters(&set, &ids, 2, 6, seed).map_err(err)?;
        let ok = (0..80).all(|i| (a.labels[i] == a.labels[0]) == (i < 40));
        ensure(ok, || format!("seed {seed}: components not recovered: {:?}", a.labels))?;
    }
    Ok(format!("100 kmeans + 100 nmf traces monotone; spectral exact, residual {residual:.1e}"))
}

/// Text of 30 lowercase words averaging exactly `total / 30` letters.
fn text_with_length(r: &mut rand_chacha::ChaCha8Rng, total: usize) -> String {
    let words = 30;
    (0..words)
        .map(|i| {
            let len = total / words + usize::from(i < total % words);
            (0..len).map(|_| (b'a' + r.random_range(0..26u8)) as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
        + "."
}

struct Planted {
    b1: Benchmark,
    b2: Benchmark,
    r1: ResultMatrix,
    r2: ResultMatrix,
    e1: EmbeddingSet,
    e2: EmbeddingSet,
    /// (B1 index, B2 index)
    dups: Vec<(usize, usize)>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn planted(seed: u64) -> Planted {
    let (n, m, dim) = (200, 20, 32);
    let mut r = rng(seed);
    let ability: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    let mut difficulty = || 1.5 * gaussian_vec(&mut r, 1)[0];
    let d1: Vec<f64> = (0..n).map(|_| difficulty()).collect();
    let d2: Vec<f64> = (0..n).map(|_| difficulty()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let dup_of: Vec<usize> = order[..n / 2].to_vec();

    let mut outcome = |a: f64, d: f64| if r.random::<f64>() < logistic(a - d) { 1.0 } else { 0.0 };
    let rows1: Vec<Vec<f64>> = ability.iter().map(|&a| d1.iter().map(|&d| outcome(a, d)).collect()).collect();
    let mut rows2: Vec<Vec<f64>> = ability.iter().map(|&a| d2.iter().map(|&d| outcome(a, d)).collect()).collect();
    for row in 0..m {
        for (j, &src) in dup_of.iter().enumerate() {
            rows2[row][j] = rows1[row][src];
        }
    }

    let texts1: Vec<String> = (0..n).map(|_| { let t = r.random_range(90..270); text_with_length(&mut r, t) }).collect();
    let texts2: Vec<String> = (0..n)
        .map(|j| {
            if j < n / 2 {
                texts1[dup_of[j]].clone()
            } else {
                let t = r.random_range(90..270);
                text_with_length(&mut r, t)
            }
        })
        .collect();
    let v1: Vec<Vec<f64>> = (0..n).map(|_| unit(gaussian_vec(&mut r, dim))).collect();
    let v2: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            if j < n / 2 {
                let noise = gaussian_vec(&mut r, dim);
                unit(v1[dup_of[j]].iter().zip(noise).map(|(x, e)| x + 0.01 * e).collect())
            } else {
                unit(gaussian_vec(&mut r, dim))
            }
        })
        .collect();

    let ids = |p: &str| (0..n).map(|i| format!("{p}{i:03}")).collect::<Vec<_>>();
    let (ids1, ids2) = (ids("a"), ids("b"));
    let bench = |name: &str, ids: &[String], texts: &[String]| {
        Benchmark::new(name, ids.iter().zip(texts).map(|(i, t)| Sample::new(i.clone(), t.clone())).collect()).unwrap()
    };
    let emb = |ids: &[String], vs: Vec<Vec<f64>>| EmbeddingSet::new(ids.iter().cloned().zip(vs)).unwrap();
    Planted {
        b1: bench("b1", &ids1, &texts1),
        b2: bench("b2", &ids2, &texts2),
        r1: ResultMatrix::new("b1", model_names(m), ids1.clone(), rows1).unwrap(),
        r2: ResultMatrix::new("b2", model_names(m), ids2.clone(), rows2).unwrap(),
        e1: emb(&ids1, v1),
        e2: emb(&ids2, v2),
        dups: dup_of.iter().enumerate().map(|(j, &i)| (i, j)).collect(),
    }
}

fn averaged(curves: &[Vec<SweepPoint>]) -> Vec<SweepPoint> {
    let k = curves.len() as f64;
    (0..curves[0].len())
        .map(|i| SweepPoint {
            rate_pct: curves[0][i].rate_pct,
            pearson: curves.iter().map(|c| c[i].pearson).sum::<f64>() / k,
            total_samples: curves.iter().map(|c| c[i].total_samples).sum::<f64>() / k,
            per_seed_pearson: curves.iter().map(|c| c[i].pearson).collect(),
            per_seed_total: curves.iter().flat_map(|c| c[i].per_seed_total.clone()).collect(),
        })
        .collect()
}

fn sweep_input<'a>(b: &'a Benchmark, results: &'a ResultMatrix, spec: &MethodSpec) -> Result<SweepBenchmark<'a>, String> {
    let table = metrics(b);
    let prepared = experiment::prepare_method(b, spec, Some(&table), &BTreeMap::new(), &[1]).map_err(err)?;
    Ok(SweepBenchmark {
        benchmark: b,
        results,
        prepared,
    })
}

fn mr_beats_m() -> Check {
    let method = "quality_avg_word_length";
    let spec = MethodSpec::parse(method).unwrap();
    let rates: Vec<u32> = (1..=100).collect();
    let (mut plain, mut filtered) = (Vec::new(), Vec::new());
    for fixture in 0..5 {
        let p = planted(500 + fixture);
        let found = redundancy::candidate_pairs(("b1", &p.e1), ("b2", &p.e2), 0.99).map_err(err)?;
        let (pairs, counts) = redundancy::classify_pairs(&found, &HashMap::new(), &HashMap::new(), &Default::default())
            .map_err(err)?;
        ensure(counts.after_review == p.dups.len(), || {
            format!("fixture {fixture}: {} redundant pairs, planted {}", counts.after_review, p.dups.len())
        })?;
        for (i, j) in &p.dups {
            let key: (SampleRef, SampleRef) = (("b1".into(), format!("a{i:03}")), ("b2".into(), format!("b{j:03}")));
            ensure(pairs.iter().any(|q| q.key() == key), || format!("planted pair {key:?} not found"))?;
        }
        let redundant: Vec<(SampleRef, SampleRef)> = pairs.iter().map(|q| q.key()).collect();
        let inputs = [sweep_input(&p.b1, &p.r1, &spec)?, sweep_input(&p.b2, &p.r2, &spec)?];
        plain.push(experiment::multi_benchmark_sweep(method, &inputs, &rates, &[1], None).map_err(err)?.points);
        filtered.push(
            experiment::multi_benchmark_sweep(method, &inputs, &rates, &[1], Some(&redundant))
                .map_err(err)?
                .points,
        );
    }
    let (m, mr) = (averaged(&plain), averaged(&filtered));
    let a = experiment::cheapest_reaching(&m, 0.9).ok_or("M never reaches 0.9")?;
    let b = experiment::cheapest_reaching(&mr, 0.9).ok_or("MR never reaches 0.9")?;
    let detail = format!(
        "M {:.1} samples at {}% (r={:.3}), MR {:.1} samples at {}% (r={:.3})",
        a.total_samples, a.rate_pct, a.pearson, b.total_samples, b.rate_pct, b.pearson
    );
    ensure(b.total_samples < a.total_samples, || detail.clone())?;
    Ok(detail)
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn difficulty_widening() -> Check {
    let bench = synth_benchmark("hardness", "h", 1000, 61);
    let table = metrics(&bench);
    let d: Vec<f64> = table.rows.iter().map(|row| row.difficulty).collect();
    let n_models = 30;
    let results = bernoulli_matrix(&bench, n_models, 62, |m, j| {
        let e = 0.1 + 0.8 * m as f64 / (n_models - 1) as f64;
        1.0 - e * d[j]
    });
    let spec = MethodSpec::parse("difficulty_composite").unwrap();
    let prepared = experiment::prepare_method(&bench, &spec, Some(&table), &BTreeMap::new(), &[1]).map_err(err)?;
    let plan = sampler::sample_one(&bench.full_view(), &spec.id, &prepared, 10, 1).map_err(err)?;
    let hard = fidelity::subset_scores(&results, &plan.ids).map_err(err)?;
    let full = ScoreVector::full(&results);
    let ratio = std_dev(&hard.scores) / std_dev(&full.scores);

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let hard_d: Vec<f64> = plan.ids.iter().map(|id| d[bench.position(id).unwrap()]).collect();
    let closed_form = mean(&hard_d) / mean(&d);
    let detail = format!("std ratio {ratio:.3} (closed form {closed_form:.3})");
    ensure(ratio >= 1.25, || detail.clone())?;
    Ok(detail)
}

fn binary_matrix(name: &str, prefix: &str, cols: Vec<Vec<f64>>) -> ResultMatrix {
    let m = cols[0].len();
    let ids: Vec<String> = (0..cols.len()).map(|j| format!("{prefix}{j:03}")).collect();
    let rows = (0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    ResultMatrix::new(name, model_names(m), ids, rows).unwrap()
}

fn match_rates() -> Check {
    let (models, n) = (19, 200);
    let mut r = rng(77);
    let mut coin = || if r.random::<bool>() { 1.0 } else { 0.0 };
    let a_cols: Vec<Vec<f64>> = (0..n).map(|_| (0..models).map(|_| coin()).collect()).collect();
    let b_cols: Vec<Vec<f64>> = (0..n).map(|_| (0..models).map(|_| coin()).collect()).collect();
    let a = binary_matrix("a", "x", a_cols.clone());
    let same = binary_matrix("b", "y", a_cols);
    let indep = binary_matrix("b", "y", b_cols);
    let pairs: Vec<(SampleRef, SampleRef)> = (0..n)
        .map(|j| (("a".into(), format!("x{j:03}")), ("b".into(), format!("y{j:03}"))))
        .collect();
    let planted = redundancy::match_rate(&pairs, &a, &same).map_err(err)?;
    ensure(planted == 1.0, || format!("identical pairs: {planted}"))?;
    let random = redundancy::match_rate(&pairs, &a, &indep).map_err(err)?;
    ensure((random - 0.5).abs() <= 0.05, || format!("independent pairs: {random}"))?;
    Ok(format!("identical 1.0, independent {random:.4}"))
}

fn curve(method: &str, f: impl Fn(u32) -> (f64, f64, f64)) -> Vec<FidelityPoint> {
    (1..=100)
        .map(|rate| {
            let (pearson, wd, variance) = f(rate);
            FidelityPoint {
                method: method.to_string(),
                rate_pct: rate,
                pearson,
                spearman: pearson,
                wd,
                variance,
                n_seeds: 5,
            }
        })
        .collect()
}

fn select(curves: Vec<Vec<FidelityPoint>>) -> Result<String, String> {
    let map: BTreeMap<String, Vec<FidelityPoint>> = curves.into_iter().map(|c| (c[0].method.clone(), c)).collect();
    fidelity::adaptive_select(&map, &AdaptiveConfig::default())
        .map(|(s, _)| s)
        .map_err(err)
}

const NAMES: [&str; 6] = ["random", "quality_cpd", "cluster_lda_tfidf", "cluster_nmf_tfidf", "difficulty_composite", "quality_avg_word_length"];

fn adaptive() -> Check {
    for trial in 0..100u64 {
        let mut r = rng(9000 + trial);
        let n = r.random_range(2..=NAMES.len());
        let dominant = r.random_range(0..n);
        let margin = r.random_range(0.02..0.08);
        let shapes: Vec<(f64, f64)> = (0..n).map(|_| (r.random_range(0.2..0.6), r.random_range(5.0..30.0))).collect();
        let noise: Vec<Vec<f64>> = (0..n).map(|_| (0..100).map(|_| r.random_range(-0.005..0.005)).collect()).collect();
        let base = |i: usize, rate: u32| 1.0 - shapes[i].0 * (-(rate as f64) / shapes[i].1).exp() + noise[i][rate as usize - 1];
        let curves = (0..n)
            .map(|i| {
                let wd = r.random_range(0.5..5.0);
                let var = r.random_range(0.0..0.01);
                curve(NAMES[i], |rate| {
                    let p = if i == dominant {
                        (0..n).filter(|&o| o != dominant).map(|o| base(o, rate)).fold(f64::NEG_INFINITY, f64::max) + margin
                    } else {
                        base(i, rate)
                    };
                    (p, wd, var)
                })
            })
            .collect();
        let got = select(curves)?;
        ensure(got == NAMES[dominant], || format!("trial {trial}: selected {got}, planted {}", NAMES[dominant]))?;
    }

    let flat = |m: &str, p: f64, wd: f64, var: f64| curve(m, move |_| (p, wd, var));
    let cases = [
        ("wd tie-break", vec![flat("b", 0.9, 1.0, 0.0), flat("a", 0.9, 2.0, 0.0)], "b"),
        ("pearson within 1e-6", vec![flat("b", 0.9, 1.0, 0.0), flat("a", 0.9 + 5e-7, 2.0, 0.0)], "b"),
        ("variance tie-break", vec![flat("b", 0.9, 1.0, 0.001), flat("a", 0.9, 1.0, 0.002)], "b"),
        ("id tie-break", vec![flat("b", 0.9, 1.0, 0.0), flat("a", 0.9, 1.0, 0.0)], "a"),
        ("pearson first", vec![flat("a", 0.95, 9.0, 0.5), flat("b", 0.50, 0.0, 0.0)], "a"),
        ("gsm8k-like", vec![flat("random", 0.97, 1.0, 0.0), flat("cluster_lda_tfidf", 0.92, 1.0, 0.0)], "random"),
    ];
    for (label, curves, want) in cases {
        let got = select(curves)?;
        ensure(got == want, || format!("{label}: selected {got}, want {want}"))?;
    }
    let outside: Vec<FidelityPoint> = curve("a", |_| (1.0, 0.0, 0.0)).into_iter().filter(|p| p.rate_pct > 25).collect();
    let got = select(vec![outside, flat("b", 0.5, 1.0, 0.0)])?;
    ensure(got == "b", || format!("uncovered curve selected: {got}"))?;
    Ok("100/100 planted trials; 7 tie-break cases".into())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|f| f != "config.resolved") {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut cfg = String::from("seeds = [1, 2, 3, 4, 5]\n");
    for (name, prefix, seed) in [("alpha", "a", 1), ("beta", "b", 2)] {
        let bench = synth_benchmark(name, prefix, 120, seed);
        let results = leaderboard(&bench, 12, 0.3, 0.7, seed + 10);
        cfg.push_str(&write_fixture(dir.path(), &bench, &results, Some(&topic_embeddings(&bench, 12, seed + 20))));
    }
    for m in ["random", "quality_cpd", "difficulty_composite", "cluster_kmeans_tfidf", "cluster_nmf_tfidf", "cluster_lda_tfidf", "cluster_spectral_synth"] {
        cfg.push_str(&format!("[[methods]]\nid = \"{m}\"\n"));
    }
    let config = config_path(dir.path(), &cfg);
    let mut trees = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir.path().join(format!("out{jobs}"));
        let o = sublime(&["curve", "--config", config.to_str().unwrap(), "--jobs", jobs, "--out", out.to_str().unwrap()]);
        ensure(o.status.success(), || format!("--jobs {jobs}: {}", String::from_utf8_lossy(&o.stderr)))?;
        trees.push(tree(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    ensure(a.contains_key(Path::new("curves.csv")), || "no curves.csv".into())?;
    let plans = a.keys().filter(|p| p.components().any(|c| c.as_os_str() == "plans")).count();
    ensure(plans == 14, || format!("{plans} plan files, expected 14"))?;
    ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
    for (path, bytes) in a {
        ensure(b[path] == *bytes, || format!("{} differs", path.display()))?;
    }
    Ok(format!("{} files byte-identical across --jobs 1/8", a.len()))
}

/// Minimal chat-completions server: rates a pair 5 when both problems are
/// the same text, 1 otherwise, and counts requests.
fn mock_endpoint() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let counter = counter.clone();
            thread::spawn(move || serve(stream, &counter));
        }
    });
    (url, calls)
}

fn between<'a>(s: &'a str, start: &str, end: &str) -> &'a str {
    let from = s.find(start).map(|i| i + start.len()).unwrap_or(0);
    let to = s[from..].find(end).map(|i| from + i).unwrap_or(s.len());
    &s[from..to]
}

fn serve(stream: TcpStream, calls: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    loop {
        let mut len = 0;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            if line == "\r\n" {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        calls.fetch_add(1, Ordering::SeqCst);
        let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
        let prompt = request["messages"]
            .as_array()
            .and_then(|m| m.last())
            .and_then(|m| m["content"].as_str())
            .unwrap_or("")
            .to_string();
        let a = between(&prompt, "Problem A:\n", "\n\nSolution A:");
        let b = between(&prompt, "Problem B:\n", "\n\nSolution B:");
        let score = if a == b { 5 } else { 1 };
        let reply = serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": format!("Looks related.\nSimilarity: {score}") } }]
        })
        .to_string();
        let head = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n",
            reply.len()
        );
        if writer.write_all(head.as_bytes()).and_then(|_| writer.write_all(reply.as_bytes())).is_err() {
            return;
        }
    }
}

fn funnel() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let (n, dim) = (30, 16);
    let mut r = rng(1010);
    let a = synth_benchmark("left", "l", n, 1011);
    let base = synth_benchmark("right", "r", n, 1012);
    let va: Vec<Vec<f64>> = (0..n).map(|_| unit(gaussian_vec(&mut r, dim))).collect();
    let mut vb: Vec<Vec<f64>> = (0..n).map(|_| unit(gaussian_vec(&mut r, dim))).collect();
    let mut samples: Vec<Sample> = base.samples().to_vec();
    // Pairs 0..12 are near-duplicates by embedding. Of those, 0..3 differ in
    // complexity and 3..6 are reworded so the reviewer rejects them.
    for i in 0..12 {
        vb[i] = va[i].iter().map(|x| x * 1.001).collect();
        samples[i].text = if (3..6).contains(&i) {
            format!("{} Reworded.", a.samples()[i].text)
        } else {
            a.samples()[i].text.clone()
        };
    }
    let b = Benchmark::new("right", samples).unwrap();
    let emb = |bench: &Benchmark, vs: Vec<Vec<f64>>| EmbeddingSet::new(bench.ids().map(str::to_string).zip(vs)).unwrap();
    let mut cfg = String::new();
    for (bench, vs, slow) in [(&a, va, false), (&b, vb, true)] {
        let results = leaderboard(bench, 10, 0.3, 0.7, 5);
        cfg.push_str(&write_fixture(dir.path(), bench, &results, Some(&emb(bench, vs))));
        let mut fps = String::new();
        for (i, id) in bench.ids().enumerate() {
            let time = if slow && i < 3 { 0.5 } else { 0.002 };
            fps.push_str(&format!("{}\n", serde_json::json!({ "id": id, "time_s": time, "mem_bytes": 1048576.0 })));
        }
        let fp = format!("{}.fp.jsonl", bench.name());
        write(&dir.path().join(&fp), &fps);
        cfg.push_str(&format!("fingerprints = \"{fp}\"\n"));
    }
    cfg.push_str("[[methods]]\nid = \"random\"\n\n[redundancy]\ntau = 0.95\ncomplexity = true\nreview = true\n");
    let config = config_path(dir.path(), &cfg);
    let (url, calls) = mock_endpoint();
    let out = dir.path().join("out");
    let run = || {
        sublime(&["redundancy", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--review-url", &url])
    };
    let report = || -> Result<serde_json::Value, String> {
        let s = fs::read_to_string(out.join("redundancy_report.json")).map_err(err)?;
        serde_json::from_str(&s).map_err(err)
    };

    let first = run();
    ensure(first.status.success(), || format!("first run: {}", String::from_utf8_lossy(&first.stderr)))?;
    let rep = report()?;
    let c = &rep["counts"];
    let counts = [&c["candidates"], &c["after_complexity"], &c["after_review"]].map(|v| v.as_u64().unwrap_or(u64::MAX));
    ensure(counts == [12, 9, 6], || format!("funnel {counts:?}, expected [12, 9, 6]"))?;
    ensure(counts.windows(2).all(|w| w[1] <= w[0]), || format!("funnel {counts:?} increases"))?;
    let first_calls = calls.load(Ordering::SeqCst);
    ensure(first_calls == 9, || format!("{first_calls} endpoint calls on first run, expected 9"))?;

    let second = run();
    ensure(second.status.success(), || format!("second run: {}", String::from_utf8_lossy(&second.stderr)))?;
    let again = calls.load(Ordering::SeqCst) - first_calls;
    ensure(again == 0, || format!("{again} endpoint calls with a warm cache"))?;
    ensure(report()?["review_endpoint_calls"] == 0, || "report counts endpoint calls on rerun".into())?;
    ensure(report()?["counts"] == rep["counts"], || "rerun changed the funnel".into())?;
    Ok(format!("funnel {} -> {} -> {}; {first_calls} calls, then 0 on rerun", counts[0], counts[1], counts[2]))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "identity", limit: secs(5), run: identity },
        Criterion { id: 2, name: "synthetic leaderboard fidelity", limit: secs(30), run: synthetic_leaderboard },
        Criterion { id: 3, name: "formula exactness", limit: None, run: formulas },
        Criterion { id: 4, name: "clustering properties", limit: secs(60), run: clustering },
        Criterion { id: 5, name: "MR beats M on planted redundancy", limit: secs(60), run: mr_beats_m },
        Criterion { id: 6, name: "difficulty widening", limit: secs(30), run: difficulty_widening },
        Criterion { id: 7, name: "match-rate statistics", limit: None, run: match_rates },
        Criterion { id: 8, name: "adaptive selection", limit: None, run: adaptive },
        Criterion { id: 9, name: "determinism across --jobs", limit: None, run: determinism },
        Criterion { id: 10, name: "funnel monotonicity and review cache", limit: None, run: funnel },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || c.id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(c.run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {} ({:.2}s): {detail}", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
