//! Corpus preparation, sketching and training-data commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use sketchcode_core::corpus::{
    build_epoch_plan_weighted, clean_and_filter, dedup, extract_library_subcorpus, load_records, read_manifest,
    read_records, sample_weight_with, unit_test_rate, write_records, EpochPlan, FilterReportLine, FilterStats,
    LexicalChecker, SyntaxChecker,
};
use sketchcode_core::harness::HarnessCommand;
use sketchcode_core::sketch::{sketch_source, SketchMode};
use sketchcode_core::traindata::{emit_corpus, DocBuilder, GeneratorDocs, SketcherDocs};

use crate::{Ctx, DocKind, TraindataArgs, UsageError};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(&item)?);
        text.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_plan(path: &Path) -> Result<EpochPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid plan {}", path.display()))
}

pub fn filter(ctx: &mut Ctx, manifest: Option<PathBuf>, root: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    if manifest.is_some() {
        ctx.config.corpus.manifest = manifest;
    }
    if root.is_some() {
        ctx.config.corpus.root = root;
    }
    let config = &ctx.config;
    let manifest = config
        .corpus
        .manifest
        .clone()
        .ok_or_else(|| UsageError("no manifest: pass --manifest or set corpus.manifest".into()))?;
    let root = config.corpus.root.clone().unwrap_or_else(|| manifest.parent().unwrap_or(Path::new("")).to_path_buf());
    let out = out.unwrap_or_else(|| config.corpus_dir().join("filtered.jsonl"));
    let report = out.with_file_name("filter_report.jsonl");
    let stats_path = out.with_file_name("filter_stats.json");
    if !ctx.proceed("corpus-filter", &[&manifest, &root], &[&out, &report, &stats_path])? {
        return Ok(());
    }

    let entries = read_manifest(&manifest)?;
    let records = load_records(&entries, &root)?;
    let harness;
    let checker: &dyn SyntaxChecker = match &config.corpus.syntax_harness {
        Some(line) => {
            harness = HarnessCommand::parse(line).ok_or_else(|| UsageError("corpus.syntax_harness is empty".into()))?;
            &harness
        }
        None => &LexicalChecker,
    };
    let results = clean_and_filter(records, &config.corpus.filter, checker);
    let stats = FilterStats::from_verdicts(results.iter().map(|(_, v)| v));
    write_jsonl(
        &report,
        results.iter().map(|(r, v)| FilterReportLine {
            path: r.path.clone(),
            kept: v.kept,
            reasons: v.reasons.clone(),
        }),
    )?;
    let indeterminate = results.iter().filter(|(_, v)| v.indeterminate).count();
    let kept: Vec<_> = results.into_iter().filter(|(_, v)| v.kept).map(|(r, _)| r).collect();
    write_records(&out, &kept)?;
    write_json(&stats_path, &stats)?;
    println!("filtered {} files: kept {}, rejected {}", stats.total, stats.kept, stats.total - stats.kept);
    for (rule, count) in &stats.reason_histogram {
        println!("  {rule:?}: {count}");
    }
    if indeterminate > 0 {
        log::warn!("{indeterminate} files excluded because the syntax checker was unavailable");
    }
    Ok(())
}

pub fn dedup_records(ctx: &mut Ctx, input: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let dir = ctx.config.corpus_dir();
    let input = input.unwrap_or_else(|| dir.join("filtered.jsonl"));
    let out = out.unwrap_or_else(|| dir.join("unique.jsonl"));
    if !ctx.proceed("corpus-dedup", &[&input], &[&out])? {
        return Ok(());
    }
    let records = read_records(&input)?;
    let total = records.len();
    let unique = dedup(records);
    write_records(&out, &unique)?;
    println!("deduplicated {total} files: {} unique", unique.len());
    Ok(())
}

pub fn extract(ctx: &mut Ctx, input: Option<PathBuf>, out: Option<PathBuf>, library: Option<String>) -> Result<()> {
    if let Some(library) = library {
        ctx.config.library = library;
    }
    let dir = ctx.config.corpus_dir();
    let input = input.unwrap_or_else(|| dir.join("unique.jsonl"));
    let out = out.unwrap_or_else(|| dir.join(format!("{}.jsonl", ctx.config.library)));
    if !ctx.proceed("corpus-extract", &[&input], &[&out])? {
        return Ok(());
    }
    let records = read_records(&input)?;
    let total = records.len();
    let subset = extract_library_subcorpus(records, &ctx.config.library);
    write_records(&out, &subset)?;
    println!("{} of {total} files import {}", subset.len(), ctx.config.library);
    Ok(())
}

pub fn plan(ctx: &mut Ctx, input: Option<PathBuf>, out: Option<PathBuf>, extra_draws: Option<usize>) -> Result<()> {
    if let Some(extra) = extra_draws {
        ctx.config.corpus.extra_draws = extra;
    }
    let dir = ctx.config.corpus_dir();
    let input = input.unwrap_or_else(|| dir.join(format!("{}.jsonl", ctx.config.library)));
    let out = out.unwrap_or_else(|| dir.join("plan.json"));
    if !ctx.proceed("corpus-plan", &[&input], &[&out])? {
        return Ok(());
    }
    let records = read_records(&input)?;
    let weights: Vec<f64> = records
        .par_iter()
        .map(|r| sample_weight_with(r.repo.stars, unit_test_rate(&r.content), &ctx.config.corpus.weights))
        .collect();
    let plan = build_epoch_plan_weighted(&records, &weights, ctx.config.corpus.extra_draws, ctx.config.seed)?;
    write_json(&out, &plan)?;
    println!("planned {} documents from {} files", plan.ids.len(), records.len());
    Ok(())
}

pub fn sketch_file(ctx: &Ctx, path: &Path, mode: Option<SketchMode>) -> Result<()> {
    let source = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mode = mode.unwrap_or(ctx.config.sketch.mode);
    let sketch =
        sketch_source(&source, mode, &ctx.config.sketch.table).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    print!("{}", sketch.text);
    Ok(())
}

#[derive(Serialize)]
struct SketchLine<'a> {
    path: &'a str,
    sketch: String,
    anonymous: usize,
    /// Symbol words the original code already used as identifiers.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    collisions: Vec<String>,
}

pub fn sketch_corpus(
    ctx: &mut Ctx,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: Option<SketchMode>,
) -> Result<()> {
    if let Some(mode) = mode {
        ctx.config.sketch.mode = mode;
    }
    let input = input.unwrap_or_else(|| ctx.config.corpus_dir().join(format!("{}.jsonl", ctx.config.library)));
    let out = out.unwrap_or_else(|| ctx.config.run_dir.join("sketch").join("sketches.jsonl"));
    if !ctx.proceed("sketch-corpus", &[&input], &[&out])? {
        return Ok(());
    }
    let records = read_records(&input)?;
    let sketch = &ctx.config.sketch;
    let results: Vec<_> = records.par_iter().map(|r| sketch_source(&r.content, sketch.mode, &sketch.table)).collect();
    let mut lines = Vec::new();
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(s) => lines.push(SketchLine {
                path: &record.path,
                sketch: s.text,
                anonymous: s.anonymous_count,
                collisions: s.collisions.into_iter().collect(),
            }),
            Err(e) => log::warn!("skipping {}: {e}", record.path),
        }
    }
    let written = lines.len();
    let colliding = lines.iter().filter(|l| !l.collisions.is_empty()).count();
    write_jsonl(&out, lines)?;
    println!("sketched {written} of {} files ({})", records.len(), sketch.mode);
    if colliding > 0 {
        println!("{colliding} files already use a symbol word as an identifier");
    }
    Ok(())
}

pub fn traindata(ctx: &mut Ctx, args: TraindataArgs) -> Result<()> {
    if let Some(mode) = args.mode {
        ctx.config.sketch.mode = mode;
    }
    let dir = ctx.config.corpus_dir();
    let input = args.input.unwrap_or_else(|| dir.join(format!("{}.jsonl", ctx.config.library)));
    let plan_path = args.plan.unwrap_or_else(|| dir.join("plan.json"));
    let kind = match args.kind {
        DocKind::Sketcher => "sketcher",
        DocKind::Generator => "generator",
    };
    let out = args.out.unwrap_or_else(|| ctx.config.run_dir.join("traindata").join(kind));
    if !ctx.proceed(&format!("traindata-{kind}"), &[&input, &plan_path], &[&out])? {
        return Ok(());
    }
    let records = read_records(&input)?;
    let plan = read_plan(&plan_path)?;
    if plan.ids.iter().zip(&plan.files).any(|(&i, f)| records.get(i).is_none_or(|r| &r.path != f)) {
        bail!("{} was not built from {}", plan_path.display(), input.display());
    }
    let sketch = &ctx.config.sketch;
    let builder: Box<dyn DocBuilder> = match args.kind {
        DocKind::Sketcher => Box::new(SketcherDocs { mode: sketch.mode, table: sketch.table.clone() }),
        DocKind::Generator => Box::new(GeneratorDocs { mode: sketch.mode, table: sketch.table.clone() }),
    };
    let manifest = emit_corpus(&records, &plan, builder.as_ref(), &out, &ctx.config.traindata.emit)?;
    println!(
        "wrote {} {kind} documents ({} tokens) in {} shards to {}",
        manifest.documents,
        manifest.tokens,
        manifest.shards.len(),
        out.display()
    );
    if !manifest.skipped.is_empty() {
        println!("skipped {} plan entries", manifest.skipped.len());
    }
    Ok(())
}
