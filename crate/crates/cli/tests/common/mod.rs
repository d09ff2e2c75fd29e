#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sublime_core::corpus::{Benchmark, EmbeddingSet, ResultMatrix, Sample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const EASY: &[&str] = &[
    "the", "a", "cat", "dog", "sat", "on", "mat", "big", "red", "sun", "run", "can", "fly", "is", "it", "we",
    "go", "to", "play", "with", "ball", "tree", "home", "book", "good", "day", "see", "old", "man", "boy",
];

const HARD: &[&str] = &[
    "interdisciplinary", "epistemological", "photosynthesis", "thermodynamics", "constitutional",
    "approximation", "infrastructure", "metamorphosis", "jurisprudence", "cryptographic",
    "heterogeneous", "anthropological", "electromagnetic", "parliamentary", "pharmaceutical",
    "circumnavigation",
];

const TOPICS: &[&[&str]] = &[
    &["river", "boat", "fish", "water", "shore", "harbor"],
    &["code", "compiler", "function", "variable", "loop", "module"],
    &["planet", "orbit", "comet", "galaxy", "telescope", "gravity"],
    &["bread", "flour", "oven", "butter", "recipe", "kitchen"],
];

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Text whose readability worsens with `hardness` in [0, 1], drawing content
/// words from `topic`.
pub fn synth_text(rng: &mut ChaCha8Rng, hardness: f64, topic: usize) -> String {
    let sentences = rng.random_range(1..=3);
    let mut out = Vec::new();
    for _ in 0..sentences {
        let len = 4 + (hardness * 12.0) as usize + rng.random_range(0..3);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let u: f64 = rng.random();
            let w = if u < hardness {
                HARD[rng.random_range(0..HARD.len())]
            } else if u < hardness + 0.3 {
                let t = TOPICS[topic % TOPICS.len()];
                t[rng.random_range(0..t.len())]
            } else {
                EASY[rng.random_range(0..EASY.len())]
            };
            words.push(w.to_string());
        }
        words[0] = capitalize(&words[0]);
        out.push(format!("{}.", words.join(" ")));
    }
    out.join(" ")
}

/// `n` samples with ids `<prefix>0000..`, spread evenly over hardness and
/// the four topics.
pub fn synth_benchmark(name: &str, prefix: &str, n: usize, seed: u64) -> Benchmark {
    let mut r = rng(seed);
    let samples = (0..n)
        .map(|i| {
            let hardness = r.random::<f64>() * 0.8;
            let topic = r.random_range(0..TOPICS.len());
            Sample::new(format!("{prefix}{i:04}"), synth_text(&mut r, hardness, topic))
        })
        .collect();
    Benchmark::new(name, samples).unwrap()
}

pub fn model_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("model{i:02}")).collect()
}

/// Scores from an arbitrary per-(model, sample) success probability.
pub fn bernoulli_matrix(
    bench: &Benchmark,
    n_models: usize,
    seed: u64,
    p: impl Fn(usize, usize) -> f64,
) -> ResultMatrix {
    let mut r = rng(seed);
    let rows = (0..n_models)
        .map(|m| {
            (0..bench.len())
                .map(|j| if r.random::<f64>() < p(m, j) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    ResultMatrix::new(
        bench.name(),
        model_names(n_models),
        bench.ids().map(str::to_string).collect(),
        rows,
    )
    .unwrap()
}

/// Model m succeeds with probability evenly spaced in `[lo, hi]`.
pub fn leaderboard(bench: &Benchmark, n_models: usize, lo: f64, hi: f64, seed: u64) -> ResultMatrix {
    let step = (hi - lo) / (n_models - 1) as f64;
    bernoulli_matrix(bench, n_models, seed, |m, _| lo + step * m as f64)
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn gaussian_vec(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            // Box-Muller
            let u1: f64 = r.random::<f64>().max(1e-300);
            let u2: f64 = r.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

/// One embedding per sample, scattered around four topic centres.
pub fn topic_embeddings(bench: &Benchmark, dim: usize, seed: u64) -> EmbeddingSet {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..4).map(|_| unit(gaussian_vec(&mut r, dim))).collect();
    let entries: Vec<(String, Vec<f64>)> = bench
        .ids()
        .enumerate()
        .map(|(i, id)| {
            let noise = gaussian_vec(&mut r, dim);
            let v = centres[i % 4].iter().zip(&noise).map(|(c, e)| c + 0.3 * e).collect();
            (id.to_string(), v)
        })
        .collect();
    EmbeddingSet::new(entries).unwrap()
}

pub fn embeddings_jsonl(e: &EmbeddingSet) -> String {
    let mut out = String::new();
    for (id, v) in e.iter() {
        let _ = writeln!(out, "{}", serde_json::json!({ "id": id, "vector": v }));
    }
    out
}

pub fn write(path: &Path, content: &str) {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).unwrap();
    }
    fs::write(path, content).unwrap();
}

/// Writes benchmark, results and embeddings under `dir/<name>.*`; returns
/// the matching `[[benchmarks]]` TOML block.
pub fn write_fixture(dir: &Path, bench: &Benchmark, results: &ResultMatrix, emb: Option<&EmbeddingSet>) -> String {
    let name = bench.name();
    write(&dir.join(format!("{name}.jsonl")), &bench.to_jsonl("text"));
    write(&dir.join(format!("{name}.results.csv")), &results.to_csv());
    let mut block = format!("[[benchmarks]]\npath = \"{name}.jsonl\"\nresults = \"{name}.results.csv\"\n");
    if let Some(e) = emb {
        write(&dir.join(format!("{name}.emb.jsonl")), &embeddings_jsonl(e));
        let _ = writeln!(block, "embeddings = {{ synth = \"{name}.emb.jsonl\" }}");
    }
    block
}

pub fn sublime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sublime"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn config_path(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    write(&p, body);
    p
}
