//! Corpus ingestion, cleaning, quality filtering, deduplication,
//! library-subcorpus extraction and resampling plans.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, TokenKind, DEFAULT_FILTER_KEYWORDS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Manifest {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid resampling weights: {0}")]
    Weights(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RepoMeta {
    pub name: String,
    pub stars: u64,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRecord {
    pub path: String,
    pub content: String,
    pub size_bytes: usize,
    pub repo: RepoMeta,
}

impl FileRecord {
    pub fn new(path: impl Into<String>, content: impl Into<String>, repo: RepoMeta) -> Self {
        let content = content.into();
        FileRecord { path: path.into(), size_bytes: content.len(), content, repo }
    }

    /// Replace the content, keeping `size_bytes` in step.
    pub fn with_content(mut self, content: String) -> Self {
        self.size_bytes = content.len();
        self.content = content;
        self
    }

    pub fn file_name(&self) -> &str {
        self.path.rsplit(['/', '\\']).next().unwrap_or(&self.path)
    }
}

/// One line of a corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub repo_name: String,
    #[serde(default)]
    pub stars: u64,
    #[serde(default)]
    pub url: String,
}

impl ManifestEntry {
    pub fn from_record(record: &FileRecord) -> Self {
        ManifestEntry {
            path: record.path.clone(),
            repo_name: record.repo.name.clone(),
            stars: record.repo.stars,
            url: record.repo.url.clone(),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    let mut entries = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|source| CorpusError::Manifest {
            path: path.to_owned(),
            line: index + 1,
            source,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Read every manifest entry's file relative to `root`. Files that are not
/// valid UTF-8 are decoded lossily so that they fail the syntax rule later.
pub fn load_records(entries: &[ManifestEntry], root: &Path) -> Result<Vec<FileRecord>, CorpusError> {
    entries
        .par_iter()
        .map(|entry| {
            let full = root.join(&entry.path);
            let bytes = fs::read(&full).map_err(|source| CorpusError::Io { path: full.clone(), source })?;
            let content = match String::from_utf8(bytes) {
                Ok(s) => s,
                Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
            };
            let repo = RepoMeta { name: entry.repo_name.clone(), stars: entry.stars, url: entry.url.clone() };
            Ok(FileRecord::new(entry.path.clone(), content, repo))
        })
        .collect()
}

/// One line of a records file: a manifest entry with the content inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RecordLine {
    path: String,
    content: String,
    #[serde(default)]
    repo_name: String,
    #[serde(default)]
    stars: u64,
    #[serde(default)]
    url: String,
}

pub fn read_records(path: &Path) -> Result<Vec<FileRecord>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    let mut records = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RecordLine = serde_json::from_str(&line).map_err(|source| CorpusError::Manifest {
            path: path.to_owned(),
            line: index + 1,
            source,
        })?;
        records.push(FileRecord::new(r.path, r.content, RepoMeta { name: r.repo_name, stars: r.stars, url: r.url }));
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[FileRecord]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_owned(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    for r in records {
        let line = RecordLine {
            path: r.path.clone(),
            content: r.content.clone(),
            repo_name: r.repo.name.clone(),
            stars: r.repo.stars,
            url: r.repo.url.clone(),
        };
        serde_json::to_writer(&mut out, &line).expect("record serializes");
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub max_size_bytes: usize,
    pub min_lines: usize,
    pub max_avg_line_len: f64,
    pub max_line_len: usize,
    pub min_alnum_rate: f64,
    pub comment_alnum_threshold: f64,
    pub filename_blacklist: Vec<String>,
    pub filename_suffix_blacklist: Vec<String>,
    pub keywords: Vec<String>,
    /// A file must contain strictly more distinct keywords than this.
    pub min_keyword_count: usize,
    pub license_lexicon: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_size_bytes: 1_048_576,
            min_lines: 5,
            max_avg_line_len: 100.0,
            max_line_len: 1000,
            min_alnum_rate: 0.98,
            comment_alnum_threshold: 0.5,
            filename_blacklist: vec!["__init__.py".into(), "setup.py".into()],
            filename_suffix_blacklist: vec!["_pb2.py".into()],
            keywords: DEFAULT_FILTER_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            min_keyword_count: 2,
            license_lexicon: ["license", "copyright", "apache", "mit license", "gnu"]
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, rate) in
            [("min_alnum_rate", self.min_alnum_rate), ("comment_alnum_threshold", self.comment_alnum_threshold)]
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if self.max_size_bytes == 0 || self.min_lines == 0 || self.max_line_len == 0 || self.max_avg_line_len <= 0.0 {
            return Err("size and line thresholds must be positive".into());
        }
        Ok(())
    }
}

/// Filter rules in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterRule {
    Size,
    Blacklist,
    MinLines,
    AvgLineLen,
    MaxLineLen,
    AlnumRate,
    Keywords,
    Syntax,
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    pub reasons: Vec<FilterRule>,
    /// The syntax rule could not be evaluated; the file is excluded.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub indeterminate: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax checker unavailable: {0}")]
pub struct SandboxUnavailable(pub String);

/// Full syntax validation of a source file.
pub trait SyntaxChecker: Sync {
    fn parses(&self, source: &str) -> Result<bool, SandboxUnavailable>;
}

/// The lexer's bracket and indentation check on its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalChecker;

impl SyntaxChecker for LexicalChecker {
    fn parses(&self, source: &str) -> Result<bool, SandboxUnavailable> {
        Ok(lexically_valid(source))
    }
}

pub fn lexically_valid(source: &str) -> bool {
    lexer::tokenize(source).is_ok_and(|s| lexer::check_structure(&s).is_ok())
}

/// Alphanumeric characters over non-whitespace characters; 1.0 when there
/// is nothing but whitespace.
pub fn alnum_rate(text: &str) -> f64 {
    let (mut alnum, mut total) = (0usize, 0usize);
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if c.is_alphanumeric() {
            alnum += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        alnum as f64 / total as f64
    }
}

/// Remove a license header and low-content comments.
pub fn clean_file(content: &str) -> String {
    clean_file_with(content, &FilterConfig::default())
}

pub fn clean_file_with(content: &str, config: &FilterConfig) -> String {
    let Ok(stream) = lexer::tokenize(content) else {
        return content.to_string();
    };
    let header_len = stream.tokens.iter().take_while(|t| t.kind == TokenKind::Comment).count();
    let header_is_license = stream.tokens[..header_len].iter().any(|t| {
        let lower = t.text.to_lowercase();
        config.license_lexicon.iter().any(|word| lower.contains(word.as_str()))
    });
    lexer::render_without_comments(&stream, |i, token| {
        (header_is_license && i < header_len) || alnum_rate(&token.text) < config.comment_alnum_threshold
    })
}

/// Evaluate every rule (no short-circuit) on an already cleaned record.
pub fn quality_filter(record: &FileRecord, config: &FilterConfig, checker: &dyn SyntaxChecker) -> FilterVerdict {
    let mut reasons = Vec::new();
    let content = record.content.as_str();

    if record.size_bytes > config.max_size_bytes {
        reasons.push(FilterRule::Size);
    }
    let name = record.file_name();
    if config.filename_blacklist.iter().any(|b| b == name)
        || config.filename_suffix_blacklist.iter().any(|s| name.ends_with(s.as_str()))
    {
        reasons.push(FilterRule::Blacklist);
    }

    let (mut lines, mut total_len, mut max_len) = (0usize, 0usize, 0usize);
    for line in content.lines() {
        let len = line.chars().count();
        lines += 1;
        total_len += len;
        max_len = max_len.max(len);
    }
    if lines < config.min_lines {
        reasons.push(FilterRule::MinLines);
    }
    let avg = if lines == 0 { 0.0 } else { total_len as f64 / lines as f64 };
    if avg > config.max_avg_line_len {
        reasons.push(FilterRule::AvgLineLen);
    }
    if max_len > config.max_line_len {
        reasons.push(FilterRule::MaxLineLen);
    }
    if alnum_rate(content) < config.min_alnum_rate {
        reasons.push(FilterRule::AlnumRate);
    }
    let lexed = lexer::tokenize(content).ok();
    let keywords: Vec<&str> = config.keywords.iter().map(String::as_str).collect();
    if lexer::count_keywords_lexed(content, lexed.as_ref(), &keywords) <= config.min_keyword_count {
        reasons.push(FilterRule::Keywords);
    }

    let mut indeterminate = false;
    if !lexed.is_some_and(|s| lexer::check_structure(&s).is_ok()) {
        reasons.push(FilterRule::Syntax);
    } else {
        match checker.parses(content) {
            Ok(true) => {}
            Ok(false) => reasons.push(FilterRule::Syntax),
            Err(err) => {
                log::warn!("{}: {err}", record.path);
                indeterminate = true;
            }
        }
    }

    FilterVerdict { kept: reasons.is_empty() && !indeterminate, reasons, indeterminate }
}

/// Line endings to LF and trailing whitespace stripped on every line.
pub fn normalize_for_dedup(content: &str) -> String {
    let unified = content.replace("\r\n", "\n").replace('\r', "\n");
    unified.lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

/// Keep the first record for each normalized-content digest, in order.
pub fn dedup(records: impl IntoIterator<Item = FileRecord>) -> Vec<FileRecord> {
    let records: Vec<FileRecord> = records.into_iter().collect();
    let digests: Vec<String> =
        records.par_iter().map(|r| lexer::content_digest(&normalize_for_dedup(&r.content))).collect();
    let mut seen = HashSet::with_capacity(records.len());
    records.into_iter().zip(digests).filter_map(|(record, digest)| seen.insert(digest).then_some(record)).collect()
}

/// True if the source imports `library` (or one of its submodules) in any
/// form: `import lib`, `import lib as x`, `import a, lib.sub`, `from lib import x`.
pub fn imports_library(content: &str, library: &str) -> bool {
    let Ok(stream) = lexer::tokenize(content) else {
        return false;
    };
    let tokens = &stream.tokens;
    let mut at_statement_start = true;
    for (i, token) in tokens.iter().enumerate() {
        match token.kind {
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent => {
                at_statement_start = true;
                continue;
            }
            TokenKind::Comment => continue,
            _ => {}
        }
        let starts = at_statement_start || (i > 0 && (tokens[i - 1].is_op(";") || tokens[i - 1].is_op(":")));
        at_statement_start = false;
        if !starts || token.kind != TokenKind::Name {
            continue;
        }
        match token.text.as_str() {
            "from" => {
                if tokens.get(i + 1).is_some_and(|t| t.is_name(library)) {
                    return true;
                }
            }
            "import" => {
                // Module paths follow `import` or a top-level comma.
                let mut expect_module = true;
                for t in &tokens[i + 1..] {
                    if t.kind == TokenKind::Newline || t.is_op(";") {
                        break;
                    }
                    if expect_module && t.is_name(library) {
                        return true;
                    }
                    expect_module = t.is_op(",") || (t.is_op("(") && expect_module);
                }
            }
            _ => {}
        }
    }
    false
}

pub fn extract_library_subcorpus(records: impl IntoIterator<Item = FileRecord>, library: &str) -> Vec<FileRecord> {
    let records: Vec<FileRecord> = records.into_iter().collect();
    let keep: Vec<bool> = records.par_iter().map(|r| imports_library(&r.content, library)).collect();
    records.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect()
}

/// Names of the functions defined in a source file, in order.
fn function_names(content: &str) -> Vec<String> {
    match lexer::tokenize(content) {
        Ok(stream) => stream
            .tokens
            .windows(2)
            .filter(|w| w[0].is_name("def") && w[1].kind == TokenKind::Name)
            .map(|w| w[1].text.clone())
            .collect(),
        Err(_) => content
            .lines()
            .filter_map(|line| {
                let rest = line.trim_start().strip_prefix("async ").unwrap_or(line.trim_start());
                let rest = rest.strip_prefix("def ")?;
                let name: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
                (!name.is_empty()).then_some(name)
            })
            .collect(),
    }
}

/// Fraction of defined functions whose name starts with `test`.
pub fn unit_test_rate(content: &str) -> f64 {
    let names = function_names(content);
    if names.is_empty() {
        return 0.0;
    }
    names.iter().filter(|n| n.starts_with("test")).count() as f64 / names.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightConfig {
    /// Multiplier on `ln(1 + stars)`.
    pub star_scale: f64,
    /// Weight removed from a file made only of test functions; below 1.
    pub test_discount: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { star_scale: 1.0, test_discount: 0.5 }
    }
}

/// `(1 + ln(1 + stars)) * (1 - 0.5 * unit_test_rate)` under the default
/// configuration.
pub fn sample_weight(record: &FileRecord) -> f64 {
    sample_weight_with(record.repo.stars, unit_test_rate(&record.content), &WeightConfig::default())
}

pub fn sample_weight_with(stars: u64, test_rate: f64, config: &WeightConfig) -> f64 {
    (1.0 + config.star_scale * (stars as f64).ln_1p()) * (1.0 - config.test_discount * test_rate)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub seed: u64,
    pub extra_draws: usize,
    /// Paths of the planned files, one per occurrence.
    pub files: Vec<String>,
    /// Indices into the record list the plan was built from.
    pub ids: Vec<usize>,
}

/// Every file once plus `extra_draws` weighted draws with replacement, in a
/// seeded shuffled order.
pub fn build_epoch_plan(records: &[FileRecord], extra_draws: usize, seed: u64) -> Result<EpochPlan, CorpusError> {
    let weights: Vec<f64> = records.par_iter().map(sample_weight).collect();
    build_epoch_plan_weighted(records, &weights, extra_draws, seed)
}

pub fn build_epoch_plan_weighted(
    records: &[FileRecord],
    weights: &[f64],
    extra_draws: usize,
    seed: u64,
) -> Result<EpochPlan, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if weights.len() != records.len() {
        return Err(CorpusError::Weights(format!("{} weights for {} records", weights.len(), records.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..records.len()).collect();
    if extra_draws > 0 {
        let dist = WeightedIndex::new(weights).map_err(|e| CorpusError::Weights(e.to_string()))?;
        ids.extend((0..extra_draws).map(|_| dist.sample(&mut rng)));
    }
    ids.shuffle(&mut rng);
    Ok(EpochPlan { seed, extra_draws, files: ids.iter().map(|&i| records[i].path.clone()).collect(), ids })
}

/// Aggregate counts for a filter run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub total: usize,
    pub kept: usize,
    pub reason_histogram: BTreeMap<FilterRule, usize>,
}

impl FilterStats {
    pub fn from_verdicts<'a>(verdicts: impl IntoIterator<Item = &'a FilterVerdict>) -> Self {
        let mut stats = FilterStats::default();
        for v in verdicts {
            stats.total += 1;
            if v.kept {
                stats.kept += 1;
            }
            for r in &v.reasons {
                *stats.reason_histogram.entry(*r).or_default() += 1;
            }
        }
        stats
    }
}

/// One line of the filter report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReportLine {
    pub path: String,
    pub kept: bool,
    pub reasons: Vec<FilterRule>,
}

/// Clean then filter every record in parallel, preserving order.
pub fn clean_and_filter(
    records: Vec<FileRecord>,
    config: &FilterConfig,
    checker: &dyn SyntaxChecker,
) -> Vec<(FileRecord, FilterVerdict)> {
    records
        .into_par_iter()
        .map(|record| {
            let cleaned = clean_file_with(&record.content, config);
            let record = record.with_content(cleaned);
            let verdict = quality_filter(&record, config, checker);
            (record, verdict)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(path: &str, content: &str) -> FileRecord {
        FileRecord::new(path, content, RepoMeta::default())
    }

    #[test]
    fn alnum_rate_examples() {
        assert_eq!(alnum_rate("abc123"), 1.0);
        assert_eq!(alnum_rate("ab!!"), 0.5);
        assert_eq!(alnum_rate(""), 1.0);
        assert_eq!(alnum_rate(" \n\t"), 1.0);
        assert_eq!(alnum_rate("a b\n_c"), 0.75);
    }

    #[test]
    fn license_header_removed() {
        let src = "# Copyright 2020 Someone\n# Licensed under the Apache License\n\nimport os\n";
        assert_eq!(clean_file(src), "\nimport os\n");
    }

    #[test]
    fn non_license_header_kept() {
        let src = "# Utilities for loading tables\nimport os\n";
        assert_eq!(clean_file(src), src);
    }

    #[test]
    fn low_alnum_comment_removed() {
        let src = "x = 1\n# ----------------\ny = 2  # ==== \n";
        assert_eq!(clean_file(src), "x = 1\ny = 2\n");
    }

    #[test]
    fn comment_free_file_unchanged() {
        let src = "def f(a):\n    return a\n";
        assert_eq!(clean_file(src), src);
        // Unlexable input passes through untouched.
        assert_eq!(clean_file("x = '\n# ---\n"), "x = '\n# ---\n");
    }

    #[test]
    fn four_line_file_fails_only_min_lines() {
        let src = "def longfunctionnamewithmanycharactershereandthereeverywhereinthisfileyes():\n    if conditionvariablewithaverylongnameindeedandmoreandmorewords:\n        return resultvaluewithanotherverylongnamehereandtherealso\n    return otherresultvaluewithverylongnamesaswellandmoreofthem\n";
        let v = quality_filter(&record("a.py", src), &FilterConfig::default(), &LexicalChecker);
        assert_eq!(v.reasons, vec![FilterRule::MinLines]);
        assert!(!v.kept);
    }

    #[test]
    fn long_line_rejected() {
        let src = format!("x = {}\n", "a".repeat(1200));
        let v = quality_filter(&record("a.py", &src), &FilterConfig::default(), &LexicalChecker);
        assert!(v.reasons.contains(&FilterRule::MaxLineLen));
    }

    #[test]
    fn blacklisted_names() {
        let cfg = FilterConfig::default();
        for name in ["pkg/__init__.py", "setup.py", "proto/msg_pb2.py"] {
            let v = quality_filter(&record(name, ""), &cfg, &LexicalChecker);
            assert!(v.reasons.contains(&FilterRule::Blacklist), "{name}");
        }
        let v = quality_filter(&record("pkg/setup_utils.py", ""), &cfg, &LexicalChecker);
        assert!(!v.reasons.contains(&FilterRule::Blacklist));
    }

    struct Offline;
    impl SyntaxChecker for Offline {
        fn parses(&self, _: &str) -> Result<bool, SandboxUnavailable> {
            Err(SandboxUnavailable("no interpreter".into()))
        }
    }

    #[test]
    fn unavailable_checker_excludes_file() {
        let v = quality_filter(&record("a.py", "x\n"), &FilterConfig::default(), &Offline);
        assert!(v.indeterminate);
        assert!(!v.kept);
        assert!(!v.reasons.contains(&FilterRule::Syntax));
    }

    #[test]
    fn syntax_rule_uses_lexical_prefilter() {
        let v = quality_filter(&record("a.py", "f(a]\n"), &FilterConfig::default(), &LexicalChecker);
        assert!(v.reasons.contains(&FilterRule::Syntax));
    }

    #[test]
    fn dedup_rules() {
        let a = record("a.py", "x = 1\ny = 2\n");
        let b = record("b.py", "x = 1\ny = 2\n");
        let c = record("c.py", "x = 1\r\ny = 2   \r\n");
        let d = record("d.py", "x = 2\n");
        let out = dedup(vec![a, b, c, d]);
        let paths: Vec<_> = out.iter().map(|r| r.path.as_str()).collect();
        assert_eq!(paths, ["a.py", "d.py"]);
        assert_eq!(dedup(out.clone()), out);
    }

    #[test]
    fn library_imports() {
        assert!(imports_library("import pandas as pd\n", "pandas"));
        assert!(imports_library("import os, pandas.io\n", "pandas"));
        assert!(imports_library("from pandas import DataFrame\n", "pandas"));
        assert!(imports_library("try:\n    import pandas\nexcept ImportError:\n    pass\n", "pandas"));
        assert!(!imports_library("import numpy\n", "pandas"));
        assert!(!imports_library("import pandas_extra\n", "pandas"));
        assert!(!imports_library("from os import pandas\n", "pandas"));
        assert!(!imports_library("x = 'import pandas'\n", "pandas"));
        assert!(!imports_library("import numpy as pandas\n", "pandas"));
    }

    #[test]
    fn unit_test_rates() {
        assert_eq!(unit_test_rate("def test_a():\n    pass\ndef b():\n    pass\n"), 0.5);
        assert_eq!(unit_test_rate("x = 1\n"), 0.0);
    }

    #[test]
    fn weights() {
        let cfg = WeightConfig::default();
        assert_eq!(sample_weight_with(0, 0.0, &cfg), 1.0);
        assert_eq!(sample_weight_with(0, 1.0, &cfg), 0.5);
        let expected = (1.0 + 100f64.ln()) * 0.75;
        assert!((sample_weight_with(99, 0.5, &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn plan_without_extras_is_permutation() {
        let records: Vec<_> = (0..20).map(|i| record(&format!("f{i}.py"), "")).collect();
        let plan = build_epoch_plan(&records, 0, 7).unwrap();
        let mut ids = plan.ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, (0..20).collect::<Vec<_>>());
        assert_eq!(plan, build_epoch_plan(&records, 0, 7).unwrap());
        assert!(matches!(build_epoch_plan(&[], 5, 1), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let cfg = FilterConfig { min_alnum_rate: 1.5, ..FilterConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
