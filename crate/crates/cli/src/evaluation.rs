//! Inference sweeps, execution-based evaluation and the mock server.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sketchcode_core::evalkit::{
    bucket_by_api_count, buckets_to_csv, evaluate, load_candidate_files, load_problems, pass_at_k, sketch_exact_match,
    EvalConfig, EvalReport, HarnessRunner, Problem, Runner, StubRunner,
};
use sketchcode_core::harness::HarnessCommand;
use sketchcode_core::mock_server::{MockServer, Transcript};
use sketchcode_core::orchestrator::{sweep, ModelEndpoint, Strategy, SweepConfig, TwoStageConfig};
use sketchcode_core::sketch::SketchMode;

use crate::config::{RunConfig, RunnerKind, StrategyKind};
use crate::pipeline::write_json;
use crate::{Ctx, InferArgs, MockServeArgs, UsageError};

fn benchmark(config: &RunConfig) -> Result<PathBuf> {
    config.benchmark.clone().ok_or_else(|| UsageError("no benchmark: pass --benchmark or set benchmark".into()).into())
}

/// Candidate files under each path, directories searched recursively, in
/// sorted order.
fn candidate_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e == "jsonl") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found = Vec::new();
            walk(path, &mut found)?;
            found.sort();
            files.extend(found);
        } else if path.exists() {
            files.push(path.clone());
        } else {
            bail!("{} does not exist", path.display());
        }
    }
    if files.is_empty() {
        bail!("no candidate files found");
    }
    Ok(files)
}

fn endpoint(slot: &mut Option<ModelEndpoint>, name: &str, base_url: Option<&str>) -> Result<ModelEndpoint> {
    if let Some(url) = base_url {
        match slot {
            Some(ep) => ep.base_url = url.to_string(),
            None => *slot = Some(ModelEndpoint::new(url, name)),
        }
    }
    slot.clone()
        .ok_or_else(|| UsageError(format!("no {name} endpoint: pass --base-url or set endpoints.{name}")).into())
}

pub fn infer(ctx: &mut Ctx, args: InferArgs) -> Result<()> {
    let inference = &mut ctx.config.inference;
    if let Some(strategy) = args.strategy {
        inference.strategy = strategy;
    }
    if let Some(t) = args.temperatures {
        inference.temperatures = t;
    }
    if let Some(n) = args.n {
        inference.n = n;
    }
    if let Some(n) = args.n_sketch {
        inference.n_sketch = n;
    }
    if let Some(n) = args.n_final {
        inference.n_final = n;
    }
    if let Some(mode) = args.mode {
        ctx.config.sketch.mode = mode;
    }
    if args.benchmark.is_some() {
        ctx.config.benchmark = args.benchmark;
    }
    let kind = ctx.config.inference.strategy;
    let url = args.base_url.as_deref();
    let endpoints = &mut ctx.config.endpoints;
    let strategy = match kind {
        StrategyKind::Baseline => Strategy::Baseline {
            endpoint: endpoint(&mut endpoints.baseline, "baseline", url)?,
            n: ctx.config.inference.n,
        },
        StrategyKind::TwoStage => Strategy::TwoStage {
            sketcher: endpoint(&mut endpoints.sketcher, "sketcher", url)?,
            generator: endpoint(&mut endpoints.generator, "generator", url)?,
            config: TwoStageConfig {
                n_sketch: ctx.config.inference.n_sketch,
                n_final: ctx.config.inference.n_final,
                mode: ctx.config.sketch.mode,
                table: ctx.config.sketch.table.clone(),
            },
        },
    };
    let bench = benchmark(&ctx.config)?;
    let out = args.out.unwrap_or_else(|| ctx.config.candidates_dir(kind));
    if !ctx.proceed(&format!("infer-{}", kind.dir_name()), &[&bench], &[&out])? {
        return Ok(());
    }

    let problems = load_problems(&bench)?;
    let config = SweepConfig {
        strategy,
        temperatures: ctx.config.inference.temperatures.clone(),
        settings: ctx.config.generation_settings(),
        out_dir: out.clone(),
        in_flight: ctx.config.inference.in_flight,
    };
    let summary = sweep(&problems, &config);
    println!(
        "{}: {} written, {} already present, {} failed under {}",
        kind.dir_name(),
        summary.written.len(),
        summary.skipped.len(),
        summary.failed.len(),
        out.display()
    );
    if !summary.failed.is_empty() {
        for f in &summary.failed {
            eprintln!("  {} @ {:.2}: {}", f.task_id, f.temperature, f.error);
        }
        bail!("{} generation requests failed; rerun to resume", summary.failed.len());
    }
    Ok(())
}

/// The harness command, or `None` for the stub runner.
fn harness_command(config: &RunConfig) -> Result<Option<HarnessCommand>> {
    match config.eval.runner {
        RunnerKind::Stub => Ok(None),
        RunnerKind::Harness => {
            let line = config.eval.harness.as_deref().ok_or_else(|| {
                UsageError("no execution harness: pass --harness, --stub, or set eval.harness".into())
            })?;
            let command = HarnessCommand::parse(line).ok_or_else(|| UsageError("eval.harness is empty".into()))?;
            Ok(Some(command))
        }
    }
}

fn best_row_for(report: &EvalReport, k: usize) -> Option<&sketchcode_core::evalkit::TemperatureRow> {
    let t = report.temperature_best.get(&k)?;
    report.rows.iter().find(|r| r.temperature == *t)
}

pub fn run(
    ctx: &mut Ctx,
    benchmark_path: Option<PathBuf>,
    candidates: Vec<PathBuf>,
    harness: Option<String>,
    stub: bool,
    ks: Option<Vec<usize>>,
    out: Option<PathBuf>,
) -> Result<()> {
    if benchmark_path.is_some() {
        ctx.config.benchmark = benchmark_path;
    }
    if let Some(line) = harness {
        ctx.config.eval.harness = Some(line);
        ctx.config.eval.runner = RunnerKind::Harness;
    }
    if stub {
        ctx.config.eval.runner = RunnerKind::Stub;
    }
    if let Some(ks) = ks {
        ctx.config.eval.ks = ks;
    }
    let bench = benchmark(&ctx.config)?;
    let candidates =
        if candidates.is_empty() { vec![ctx.config.candidates_dir(ctx.config.inference.strategy)] } else { candidates };
    let out = out.unwrap_or_else(|| ctx.config.eval_dir());
    let report_path = out.join("report.json");
    let csv_path = out.join("buckets.csv");
    let mut reads = vec![bench.clone()];
    reads.extend(candidates.iter().cloned());
    let harness = harness_command(&ctx.config)?;
    if !ctx.proceed("eval-run", &reads, &[&report_path, &csv_path])? {
        return Ok(());
    }

    let problems = load_problems(&bench)?;
    let sets = load_candidate_files(&candidate_files(&candidates)?)?;
    let runner: Box<dyn Runner> = match harness {
        Some(command) => Box::new(HarnessRunner { command, memory_cap_mb: ctx.config.eval.memory_cap_mb }),
        None => Box::new(StubRunner::from_golden(&problems)),
    };
    let eval = &ctx.config.eval;
    let config = EvalConfig { ks: eval.ks.clone(), timeout_s: eval.timeout_s, jobs: ctx.config.jobs };
    let mut report = evaluate(&problems, &sets, runner.as_ref(), &config)?;
    let evaluated: Vec<Problem> =
        problems.into_iter().filter(|p| report.per_problem.contains_key(&p.task_id)).collect();
    let buckets = best_row_for(&report, eval.ks[0])
        .map(|row| bucket_by_api_count(&evaluated, row, eval.bucket_bounds.as_deref(), eval.bucket_mode))
        .unwrap_or_default();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    fs::write(&csv_path, buckets_to_csv(&buckets)?).with_context(|| format!("cannot write {}", csv_path.display()))?;
    report.groupings = Some(buckets);
    write_json(&report_path, &report)?;
    print_report(&report);
    Ok(())
}

fn print_report(report: &EvalReport) {
    let header: Vec<String> = report.ks.iter().map(|k| format!("{:>10}", format!("pass@{k}"))).collect();
    println!("{:<12}{}", "temperature", header.concat());
    for row in &report.rows {
        let cells: Vec<String> = report.ks.iter().map(|k| format!("{:>10.4}", row.pass_at_k[k])).collect();
        println!("{:<12.2}{}", row.temperature, cells.concat());
    }
    let best: Vec<String> = report.ks.iter().map(|k| format!("{:>10.4}", report.pass_at_k[k])).collect();
    println!("{:<12}{}", "best", best.concat());
    println!("problems: {}, infra failures: {}", report.per_problem.len(), report.infra_failures);
    if !report.error_counts.is_empty() {
        let counts: Vec<String> = report.error_counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        println!("errors: {}", counts.join(", "));
    }
    if let Some(buckets) = &report.groupings {
        for b in buckets {
            let cells: Vec<String> = report.ks.iter().map(|k| format!("{:>10.4}", b.pass_at_k[k])).collect();
            println!("calls {:<6}{}  problems: {}", b.label, cells.concat(), b.problems);
        }
    }
}

pub fn passk(n: usize, c: usize, k: usize) -> Result<()> {
    if c > n || k == 0 || k > n {
        return Err(UsageError(format!("need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")).into());
    }
    println!("{:.6}", pass_at_k(n, c, k)?);
    Ok(())
}

#[derive(Serialize)]
struct ExactMatchReport {
    mode: SketchMode,
    accuracy: f64,
    per_problem: BTreeMap<String, f64>,
}

pub fn sketch_em(
    ctx: &mut Ctx,
    benchmark_path: Option<PathBuf>,
    candidates: Vec<PathBuf>,
    mode: Option<SketchMode>,
    out: Option<PathBuf>,
) -> Result<()> {
    if benchmark_path.is_some() {
        ctx.config.benchmark = benchmark_path;
    }
    if let Some(mode) = mode {
        ctx.config.sketch.mode = mode;
    }
    let bench = benchmark(&ctx.config)?;
    let candidates =
        if candidates.is_empty() { vec![ctx.config.candidates_dir(ctx.config.inference.strategy)] } else { candidates };
    let out = out.unwrap_or_else(|| ctx.config.eval_dir().join("sketch_em.json"));
    let mut reads = vec![bench.clone()];
    reads.extend(candidates.iter().cloned());
    if !ctx.proceed("eval-sketch-em", &reads, &[&out])? {
        return Ok(());
    }

    let problems: BTreeMap<String, Problem> =
        load_problems(&bench)?.into_iter().map(|p| (p.task_id.clone(), p)).collect();
    let sets = load_candidate_files(&candidate_files(&candidates)?)?;
    let sketch = &ctx.config.sketch;
    let mut per_problem = BTreeMap::new();
    for set in &sets {
        let problem = problems.get(&set.task_id).with_context(|| format!("{} is not in the benchmark", set.task_id))?;
        let texts: Vec<&str> = set.samples.iter().map(|s| s.text.as_str()).collect();
        let result = sketch_exact_match(&texts, &problem.canonical_solution, sketch.mode, &sketch.table)
            .with_context(|| format!("gold solution of {}", set.task_id))?;
        per_problem.insert(set.task_id.clone(), result.accuracy);
    }
    let accuracy =
        if per_problem.is_empty() { 0.0 } else { per_problem.values().sum::<f64>() / per_problem.len() as f64 };
    let problems = per_problem.len();
    write_json(&out, &ExactMatchReport { mode: sketch.mode, accuracy, per_problem })?;
    println!("sketch exact match ({}): {accuracy:.4} over {problems} problems", sketch.mode);
    Ok(())
}

pub fn report(ctx: &Ctx, path: Option<PathBuf>) -> Result<()> {
    let path = path.unwrap_or_else(|| ctx.config.eval_dir().join("report.json"));
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let report: EvalReport =
        serde_json::from_str(&text).with_context(|| format!("invalid report {}", path.display()))?;
    print_report(&report);
    Ok(())
}

pub fn mock_serve(args: MockServeArgs) -> Result<()> {
    let transcript = Transcript::load(&args.transcript)?;
    let server = MockServer::start(transcript, &args.addr, args.record)?;
    let mut stdout = std::io::stdout();
    writeln!(stdout, "{}", server.base_url())?;
    stdout.flush()?;
    server.wait();
    Ok(())
}
