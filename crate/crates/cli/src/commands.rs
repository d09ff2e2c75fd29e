//! The five subcommands. Each writes into the output directory and leaves a
//! `config.resolved` next to its artifacts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sublime_core::corpus::{self, Benchmark, EmbeddingSet, ResultMatrix};
use sublime_core::experiment::{self, MetricsTable, MrComparison, SweepBenchmark, SweepPoint};
use sublime_core::fidelity::{self, AdaptiveReport, FidelityPoint, MethodWindowStats, ScoreVector, WinRateTable};
use sublime_core::redundancy::{
    self, ComplexityFingerprint, Executor, FunnelConfig, FunnelCounts, HttpEndpoint, RedundantPair, ReviewClient,
    ReviewError, ReviewInput, SubprocessExecutor, Verdict,
};
use sublime_core::sampler::{MethodKind, MethodSpec, PreparedMethod, SampleRef, SubsetPlan};
use sublime_core::textstats::WordSet;

use crate::config::{self, BenchmarkEntry, RunConfig};
use crate::error::{results_error, CliError, ExitCode};

pub type CmdResult<T = ()> = Result<T, CliError>;

fn write_file(path: &Path, content: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content).map_err(|e| CliError::new(ExitCode::Other, e).context(format!("writing {}", path.display())))
}

fn write_resolved(cfg: &RunConfig) -> CmdResult {
    write_file(&cfg.output_dir.join("config.resolved"), &config::resolved_text(cfg))
}

struct Loaded {
    entry: BenchmarkEntry,
    benchmark: Benchmark,
    results: Option<ResultMatrix>,
    embeddings: BTreeMap<String, EmbeddingSet>,
}

impl Loaded {
    fn name(&self) -> &str {
        self.benchmark.name()
    }

    fn results(&self) -> CmdResult<&ResultMatrix> {
        self.results.as_ref().ok_or_else(|| {
            CliError::new(
                ExitCode::Schema,
                anyhow::anyhow!("benchmark {:?} has no results file", self.name()),
            )
        })
    }
}

#[derive(Clone, Copy)]
struct Needs {
    results: bool,
    embeddings: bool,
}

fn load_all(cfg: &RunConfig, needs: Needs) -> CmdResult<Vec<Loaded>> {
    cfg.benchmarks
        .iter()
        .map(|entry| {
            let name = cfg.benchmark_name(entry);
            let mut benchmark = corpus::load_benchmark(&entry.path, &cfg.text_field)
                .map_err(|e| CliError::from(e).context(format!("benchmark {}", entry.path.display())))?;
            if benchmark.name() != name {
                benchmark = Benchmark::new(name, benchmark.samples().to_vec())?;
            }
            let results = match (&entry.results, needs.results) {
                (Some(p), true) => Some(
                    corpus::load_results(p, &benchmark)
                        .map_err(|e| results_error(e).context(format!("results {}", p.display())))?,
                ),
                _ => None,
            };
            let mut embeddings = BTreeMap::new();
            if needs.embeddings {
                for (tag, p) in &entry.embeddings {
                    let set = corpus::load_embeddings(p)
                        .map_err(|e| CliError::from(e).context(format!("embeddings {}", p.display())))?;
                    embeddings.insert(tag.clone(), set);
                }
            }
            Ok(Loaded {
                entry: entry.clone(),
                benchmark,
                results,
                embeddings,
            })
        })
        .collect()
}

fn word_set(path: &Option<PathBuf>, default: fn() -> WordSet) -> CmdResult<WordSet> {
    match path {
        Some(p) => WordSet::load(p).map_err(|e| CliError::new(ExitCode::Schema, e)),
        None => Ok(default()),
    }
}

fn metrics_for(cfg: &RunConfig, benchmark: &Benchmark) -> CmdResult<MetricsTable> {
    let english = word_set(&cfg.dictionaries.english, WordSet::default_english)?;
    let easy = word_set(&cfg.dictionaries.easy, WordSet::default_easy_words)?;
    Ok(experiment::compute_metrics(benchmark, &english, &easy, &cfg.weights())?)
}

fn needs_embeddings(specs: &[MethodSpec]) -> bool {
    specs.iter().any(|s| matches!(s.kind, MethodKind::ClusterSpectral(_)))
}

fn prepare_all(cfg: &RunConfig, loaded: &Loaded, specs: &[MethodSpec]) -> CmdResult<Vec<(MethodSpec, PreparedMethod)>> {
    let metrics = if specs.iter().any(|s| s.kind.is_ranked()) {
        Some(metrics_for(cfg, &loaded.benchmark)?)
    } else {
        None
    };
    specs
        .iter()
        .map(|spec| {
            let prepared =
                experiment::prepare_method(&loaded.benchmark, spec, metrics.as_ref(), &loaded.embeddings, &cfg.seeds)
                    .map_err(|e| CliError::from(e).context(format!("benchmark {}", loaded.name())))?;
            Ok((spec.clone(), prepared))
        })
        .collect()
}

fn plans_jsonl<'a>(plans: impl IntoIterator<Item = &'a SubsetPlan>) -> String {
    let mut out = String::new();
    for p in plans {
        out.push_str(&serde_json::to_string(p).expect("plan serializes"));
        out.push('\n');
    }
    out
}

fn write_plans(cfg: &RunConfig, dir: &str, benchmark: &str, specs: &[MethodSpec], plans: &[SubsetPlan]) -> CmdResult {
    for spec in specs {
        let mine = plans.iter().filter(|p| p.method == spec.id);
        write_file(
            &cfg.output_dir.join(benchmark).join(dir).join(format!("{}.jsonl", spec.id)),
            &plans_jsonl(mine),
        )?;
    }
    Ok(())
}

pub fn cmd_profile(cfg: &RunConfig) -> CmdResult {
    write_resolved(cfg)?;
    let loaded = load_all(cfg, Needs { results: false, embeddings: false })?;
    for l in &loaded {
        let table = metrics_for(cfg, &l.benchmark)?;
        write_file(&cfg.output_dir.join(l.name()).join("metrics.csv"), &table.to_csv())?;
        log::info!("{}: profiled {} samples", l.name(), table.rows.len());
    }
    Ok(())
}

fn sampling_error(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(ExitCode::Sampling, e)
}

pub fn cmd_sample(cfg: &RunConfig) -> CmdResult {
    write_resolved(cfg)?;
    let specs = cfg.method_specs()?;
    let loaded = load_all(cfg, Needs { results: false, embeddings: needs_embeddings(&specs) })?;
    for l in &loaded {
        let methods = prepare_all(cfg, l, &specs)?;
        let view = l.benchmark.full_view();
        let plans = sublime_core::sampler::build_plan_grid(&view, &methods, &cfg.rates, &cfg.seeds)
            .map_err(|e| sampling_error(e).context(format!("benchmark {}", l.name())))?;
        for (spec, prepared) in &methods {
            let mine: Vec<SubsetPlan> = plans.iter().filter(|p| p.method == spec.id).cloned().collect();
            let nested = !matches!(prepared, PreparedMethod::Stratified { .. });
            sublime_core::sampler::validate_plans(&view, &mine, nested)
                .map_err(|e| sampling_error(anyhow::anyhow!(e)))?;
        }
        write_plans(cfg, "plans", l.name(), &specs, &plans)?;
        log::info!("{}: wrote {} plans", l.name(), plans.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct AdaptiveRecord<'a> {
    benchmark: &'a str,
    selected: Option<&'a str>,
    window: [u32; 2],
    threshold: f64,
    per_method: BTreeMap<String, MethodWindowStats>,
}

fn adaptive_record<'a>(
    benchmark: &'a str,
    report: &'a Option<AdaptiveReport>,
    cfg: &RunConfig,
    curves: &BTreeMap<String, Vec<FidelityPoint>>,
) -> AdaptiveRecord<'a> {
    match report {
        Some(r) => AdaptiveRecord {
            benchmark,
            selected: Some(&r.selected),
            window: r.window,
            threshold: r.threshold,
            per_method: r.per_method.clone(),
        },
        None => AdaptiveRecord {
            benchmark,
            selected: None,
            window: cfg.adaptive.window,
            threshold: cfg.adaptive.threshold,
            per_method: curves
                .keys()
                .map(|k| {
                    (
                        k.clone(),
                        MethodWindowStats {
                            covers_window: false,
                            mean_pearson: None,
                            mean_wd: None,
                            mean_variance: None,
                            first_rate_at_threshold: None,
                        },
                    )
                })
                .collect(),
        },
    }
}

pub fn cmd_curve(cfg: &RunConfig, winrate: bool) -> CmdResult {
    write_resolved(cfg)?;
    let specs = cfg.method_specs()?;
    let loaded = load_all(cfg, Needs { results: true, embeddings: needs_embeddings(&specs) })?;
    let mut curves_csv = format!("{}\n", fidelity::CURVES_HEADER);
    let mut adaptive = String::new();
    let mut prepared_all = Vec::with_capacity(loaded.len());
    for l in &loaded {
        let results = l.results()?;
        let methods = prepare_all(cfg, l, &specs)?;
        let run = experiment::run_benchmark(&l.benchmark, results, &methods, &cfg.rates, &cfg.seeds)
            .map_err(|e| CliError::from(e).context(format!("benchmark {}", l.name())))?;
        write_plans(cfg, "plans", l.name(), &specs, &run.plans)?;
        for (_, points) in &run.curves {
            curves_csv.push_str(&fidelity::curve_rows(l.name(), points));
        }
        let by_id: BTreeMap<String, Vec<FidelityPoint>> = run.curves.into_iter().collect();
        let report = match fidelity::adaptive_select(&by_id, &cfg.adaptive_config()) {
            Ok((_, r)) => Some(r),
            Err(e) => {
                log::warn!("{}: no adaptive selection: {e}", l.name());
                None
            }
        };
        adaptive.push_str(&serde_json::to_string(&adaptive_record(l.name(), &report, cfg, &by_id)).expect("record serializes"));
        adaptive.push('\n');
        prepared_all.push(methods);
    }
    write_file(&cfg.output_dir.join("curves.csv"), &curves_csv)?;
    write_file(&cfg.output_dir.join("adaptive.jsonl"), &adaptive)?;
    if winrate {
        winrate_outputs(cfg, &loaded, &specs, prepared_all)?;
    }
    Ok(())
}

pub fn cmd_winrate(cfg: &RunConfig) -> CmdResult {
    write_resolved(cfg)?;
    let specs = cfg.method_specs()?;
    let loaded = load_all(cfg, Needs { results: true, embeddings: needs_embeddings(&specs) })?;
    let prepared = loaded
        .iter()
        .map(|l| prepare_all(cfg, l, &specs))
        .collect::<CmdResult<Vec<_>>>()?;
    winrate_outputs(cfg, &loaded, &specs, prepared)
}

fn fidelity_error(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(ExitCode::Fidelity, e)
}

fn winrate_table(loaded: &[Loaded]) -> CmdResult<WinRateTable> {
    let vectors = loaded
        .iter()
        .map(|l| Ok((l.name().to_string(), ScoreVector::full(l.results()?))))
        .collect::<CmdResult<Vec<_>>>()?;
    fidelity::win_rate(&vectors).map_err(fidelity_error)
}

fn winrate_csv(t: &WinRateTable) -> String {
    let mut out = String::from("rank,model");
    for b in &t.benchmarks {
        let _ = write!(out, ",{b}");
    }
    out.push_str(",average\n");
    for (rank, (model, avg)) in t.ranking().iter().enumerate() {
        let i = t.models.iter().position(|m| m == model).expect("model in table");
        let _ = write!(out, "{},{}", rank + 1, model);
        for row in &t.per_benchmark {
            let _ = write!(out, ",{}", row[i]);
        }
        let _ = writeln!(out, ",{avg}");
    }
    out
}

fn sweep_rows(mode: &str, method: &str, points: &[SweepPoint]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(out, "{mode},{method},{},{},{}", p.rate_pct, p.pearson, p.total_samples);
    }
    out
}

const SWEEP_HEADER: &str = "mode,method,rate_pct,pearson,total_samples";

fn sweep_inputs<'a>(
    loaded: &'a [Loaded],
    prepared: &[Vec<(MethodSpec, PreparedMethod)>],
    m: usize,
) -> CmdResult<Vec<SweepBenchmark<'a>>> {
    loaded
        .iter()
        .zip(prepared)
        .map(|(l, methods)| {
            Ok(SweepBenchmark {
                benchmark: &l.benchmark,
                results: l.results()?,
                prepared: methods[m].1.clone(),
            })
        })
        .collect()
}

fn winrate_outputs(
    cfg: &RunConfig,
    loaded: &[Loaded],
    specs: &[MethodSpec],
    prepared: Vec<Vec<(MethodSpec, PreparedMethod)>>,
) -> CmdResult {
    let table = winrate_table(loaded)?;
    write_file(&cfg.output_dir.join("winrate.csv"), &winrate_csv(&table))?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for (m, spec) in specs.iter().enumerate() {
        let inputs = sweep_inputs(loaded, &prepared, m)?;
        let out = experiment::multi_benchmark_sweep(&spec.id, &inputs, &cfg.rates, &cfg.seeds, None)?;
        csv.push_str(&sweep_rows("m", &spec.id, &out.points));
    }
    write_file(&cfg.output_dir.join("winrate_curves.csv"), &csv)
}

#[derive(Deserialize)]
struct FingerprintRecord {
    id: String,
    time_s: f64,
    mem_bytes: f64,
}

fn redundancy_error(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(ExitCode::Redundancy, e)
}

fn load_fingerprints(l: &Loaded, into: &mut HashMap<SampleRef, ComplexityFingerprint>) -> CmdResult {
    let Some(path) = &l.entry.fingerprints else {
        return Ok(());
    };
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitCode::Schema, e).context(format!("fingerprints {}", path.display())))?;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: FingerprintRecord = serde_json::from_str(line).map_err(|e| {
            CliError::new(ExitCode::Schema, e).context(format!("{} line {}", path.display(), i + 1))
        })?;
        into.insert(
            (l.name().to_string(), r.id),
            ComplexityFingerprint {
                time_s: r.time_s,
                mem_bytes: r.mem_bytes,
            },
        );
    }
    Ok(())
}

fn embeddings_of<'a>(l: &'a Loaded, tag: &str) -> CmdResult<&'a EmbeddingSet> {
    l.embeddings.get(tag).ok_or_else(|| {
        CliError::new(ExitCode::Schema, anyhow::anyhow!("benchmark {:?} has no {tag:?} embeddings", l.name()))
    })
}

fn embedding_tag(cfg: &RunConfig, loaded: &[Loaded]) -> CmdResult<String> {
    if let Some(tag) = &cfg.redundancy.embedding {
        return Ok(tag.clone());
    }
    let mut tags: Vec<&String> = loaded.iter().flat_map(|l| l.embeddings.keys()).collect();
    tags.sort();
    tags.dedup();
    match tags.as_slice() {
        [only] => Ok((*only).clone()),
        _ => Err(CliError::new(
            ExitCode::Schema,
            anyhow::anyhow!("set redundancy.embedding to pick one of the embedding tags {tags:?}"),
        )),
    }
}

#[derive(Serialize)]
struct PairReport {
    benchmark_a: String,
    benchmark_b: String,
    counts: FunnelCounts,
    match_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    match_rate_note: Option<String>,
}

#[derive(Serialize)]
struct RedundancyReport {
    tau: f64,
    complexity_stage: bool,
    review_stage: bool,
    counts: FunnelCounts,
    per_pair: Vec<PairReport>,
    closure_groups: usize,
    largest_group: usize,
    review_endpoint_calls: usize,
}

fn sample_texts(l: &Loaded, id: &str, solution_field: &str) -> (String, String) {
    let s = l.benchmark.sample(id).expect("candidate ids come from the benchmark");
    (s.text.clone(), s.aux.get(solution_field).cloned().unwrap_or_default())
}

fn measure_missing(
    cfg: &RunConfig,
    loaded: &[Loaded],
    candidates: &[RedundantPair],
    fingerprints: &mut HashMap<SampleRef, ComplexityFingerprint>,
) -> CmdResult {
    let Some(ex) = &cfg.redundancy.executor else {
        return Ok(());
    };
    let runner = SubprocessExecutor {
        program: ex.program.clone(),
        args: ex.args.clone(),
    };
    let timeout = Duration::from_secs_f64(ex.timeout_s);
    let mut wanted: Vec<&SampleRef> = candidates.iter().flat_map(|p| [&p.id_a, &p.id_b]).collect();
    wanted.sort();
    wanted.dedup();
    for r in wanted {
        if fingerprints.contains_key(r) {
            continue;
        }
        let l = loaded.iter().find(|l| l.name() == r.0).expect("known benchmark");
        let sample = l.benchmark.sample(&r.1).expect("known sample");
        let Some(solution) = sample.aux.get(&cfg.redundancy.solution_field) else {
            continue;
        };
        let base = l.entry.path.parent().unwrap_or(Path::new("."));
        let tests = sample
            .aux
            .get(&cfg.redundancy.tests_field)
            .map(|t| base.join(t))
            .unwrap_or_else(|| base.to_path_buf());
        match redundancy::measure_fingerprint(&runner as &dyn Executor, solution, &tests, timeout) {
            Ok(fp) => {
                fingerprints.insert(r.clone(), fp);
            }
            Err(e) => log::warn!("{}/{}: no fingerprint: {e}", r.0, r.1),
        }
    }
    Ok(())
}

pub fn cmd_redundancy(cfg: &RunConfig, mr: bool, review_url: Option<&str>) -> CmdResult {
    let rc = &cfg.redundancy;
    let url = review_url.map(str::to_string).or_else(|| rc.review_url.clone());
    if rc.review && url.is_none() {
        return Err(redundancy_error(anyhow::anyhow!(
            "the review stage is enabled but no review endpoint is configured; pass --review-url URL \
             (token in SUBLIME_REVIEW_TOKEN) or set redundancy.review = false"
        )));
    }
    write_resolved(cfg)?;
    let specs = cfg.method_specs()?;
    let loaded = load_all(cfg, Needs { results: true, embeddings: true })?;
    if loaded.len() < 2 {
        return Err(CliError::new(ExitCode::Schema, anyhow::anyhow!("redundancy needs at least two benchmarks")));
    }
    let tag = embedding_tag(cfg, &loaded)?;

    let mut candidates = Vec::new();
    let mut spans = Vec::new();
    for i in 0..loaded.len() {
        for j in i + 1..loaded.len() {
            let (a, b) = (&loaded[i], &loaded[j]);
            let pairs = redundancy::candidate_pairs((a.name(), embeddings_of(a, &tag)?), (b.name(), embeddings_of(b, &tag)?), rc.tau)
                .map_err(redundancy_error)?;
            spans.push((i, j, candidates.len(), pairs.len()));
            candidates.extend(pairs);
        }
    }

    let mut fingerprints = HashMap::new();
    if rc.complexity {
        for l in &loaded {
            load_fingerprints(l, &mut fingerprints)?;
        }
        measure_missing(cfg, &loaded, &candidates, &mut fingerprints)?;
    }

    let pre_review = FunnelConfig {
        complexity: rc.complexity_stage(),
        review_threshold: None,
    };
    let mut reviews = HashMap::new();
    let mut calls = 0;
    if rc.review {
        let (survivors, _) = redundancy::classify_pairs(&candidates, &fingerprints, &reviews, &pre_review)
            .map_err(redundancy_error)?;
        let survivors: Vec<&RedundantPair> = survivors.iter().filter(|p| p.verdict == Verdict::Redundant).collect();
        let endpoint = HttpEndpoint::from_env(url.expect("checked above"), Duration::from_secs(120))
            .map_err(redundancy_error)?;
        let mut client = ReviewClient::new(endpoint)
            .with_model(rc.review_model.clone())
            .with_cache(rc.cache_dir.clone().unwrap_or_else(|| cfg.output_dir.join("review_cache")));
        if let Some(p) = &rc.prompt_template {
            let t = fs::read_to_string(p)
                .map_err(|e| CliError::new(ExitCode::Schema, e).context(format!("prompt template {}", p.display())))?;
            client = client.with_template(t);
        }
        let inputs: Vec<ReviewInput> = survivors
            .iter()
            .map(|p| {
                let la = loaded.iter().find(|l| l.name() == p.id_a.0).expect("known benchmark");
                let lb = loaded.iter().find(|l| l.name() == p.id_b.0).expect("known benchmark");
                let (problem_a, solution_a) = sample_texts(la, &p.id_a.1, &rc.solution_field);
                let (problem_b, solution_b) = sample_texts(lb, &p.id_b.1, &rc.solution_field);
                ReviewInput {
                    problem_a,
                    solution_a,
                    problem_b,
                    solution_b,
                }
            })
            .collect();
        for (p, r) in survivors.iter().zip(client.review_all(&inputs, rc.in_flight)) {
            match r {
                Ok(score) => {
                    reviews.insert(p.key(), score);
                }
                Err(e @ ReviewError::ReviewParseError { .. }) => {
                    log::warn!("{}/{} vs {}/{}: {e}", p.id_a.0, p.id_a.1, p.id_b.0, p.id_b.1)
                }
                Err(e) => return Err(redundancy_error(e)),
            }
        }
        calls = client.endpoint_calls();
    }

    let funnel = FunnelConfig {
        complexity: rc.complexity_stage(),
        review_threshold: rc.review.then_some(rc.review_threshold),
    };
    let (pairs, counts) =
        redundancy::classify_pairs(&candidates, &fingerprints, &reviews, &funnel).map_err(redundancy_error)?;

    let mut per_pair = Vec::new();
    for &(i, j, start, len) in &spans {
        let slice = &pairs[start..start + len];
        let sub_counts = redundancy::classify_pairs(&candidates[start..start + len], &fingerprints, &reviews, &funnel)
            .map_err(redundancy_error)?
            .1;
        let redundant: Vec<(SampleRef, SampleRef)> =
            slice.iter().filter(|p| p.verdict == Verdict::Redundant).map(RedundantPair::key).collect();
        let (match_rate, note) = match redundancy::match_rate(&redundant, loaded[i].results()?, loaded[j].results()?) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        per_pair.push(PairReport {
            benchmark_a: loaded[i].name().to_string(),
            benchmark_b: loaded[j].name().to_string(),
            counts: sub_counts,
            match_rate,
            match_rate_note: note,
        });
    }

    let redundant: Vec<(SampleRef, SampleRef)> =
        pairs.iter().filter(|p| p.verdict == Verdict::Redundant).map(RedundantPair::key).collect();
    let groups = redundancy::closure_groups(&redundant);
    let report = RedundancyReport {
        tau: rc.tau,
        complexity_stage: rc.complexity,
        review_stage: rc.review,
        counts,
        per_pair,
        closure_groups: groups.len(),
        largest_group: groups.iter().map(Vec::len).max().unwrap_or(0),
        review_endpoint_calls: calls,
    };
    let mut jsonl = String::new();
    for p in &pairs {
        jsonl.push_str(&serde_json::to_string(p).expect("pair serializes"));
        jsonl.push('\n');
    }
    write_file(&cfg.output_dir.join("pairs.jsonl"), &jsonl)?;
    write_file(
        &cfg.output_dir.join("redundancy_report.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    log::info!(
        "funnel: {} -> {} -> {}",
        counts.candidates,
        counts.after_complexity,
        counts.after_review
    );

    if mr {
        mr_outputs(cfg, &loaded, &specs, &redundant)?;
    }
    Ok(())
}

fn mr_outputs(cfg: &RunConfig, loaded: &[Loaded], specs: &[MethodSpec], redundant: &[(SampleRef, SampleRef)]) -> CmdResult {
    let prepared = loaded
        .iter()
        .map(|l| prepare_all(cfg, l, specs))
        .collect::<CmdResult<Vec<_>>>()?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut comparison = String::new();
    for (m, spec) in specs.iter().enumerate() {
        let inputs = sweep_inputs(loaded, &prepared, m)?;
        let plain = experiment::multi_benchmark_sweep(&spec.id, &inputs, &cfg.rates, &cfg.seeds, None)?;
        let filtered = experiment::multi_benchmark_sweep(&spec.id, &inputs, &cfg.rates, &cfg.seeds, Some(redundant))?;
        csv.push_str(&sweep_rows("m", &spec.id, &plain.points));
        csv.push_str(&sweep_rows("mr", &spec.id, &filtered.points));
        let record = MrComparison::new(&spec.id, cfg.redundancy.mr_threshold, &plain.points, &filtered.points);
        comparison.push_str(&serde_json::to_string(&record).expect("record serializes"));
        comparison.push('\n');
        write_file(
            &cfg.output_dir.join("mr_plans").join(format!("{}.jsonl", spec.id)),
            &plans_jsonl(&filtered.plans),
        )?;
    }
    write_file(&cfg.output_dir.join("mr_curves.csv"), &csv)?;
    write_file(&cfg.output_dir.join("mr_comparison.jsonl"), &comparison)
}
