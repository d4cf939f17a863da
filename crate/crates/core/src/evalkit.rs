//! Benchmark problems, program assembly, sandboxed execution, pass@k,
//! sketch exact match and API-count bucketing.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{HarnessCommand, HarnessError, Job, VerdictKind};
use crate::lexer::{self, is_identifier, is_keyword, LexError, Token, TokenKind};
use crate::sketch::{normalize, sketch_tokens, SketchMode, SymbolTable};

pub const DEFAULT_STOPS: [&str; 6] = ["\nclass", "\ndef", "\n#", "\n@", "\nprint", "\nif"];

pub fn default_stops() -> Vec<String> {
    DEFAULT_STOPS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pass@k domain error: {0}")]
    Domain(String),
    #[error("{task_id}: {n} samples cannot estimate pass@{k}")]
    InsufficientSamples { task_id: String, n: usize, k: usize },
    #[error("candidates refer to unknown problem {0:?}")]
    MissingProblem(String),
    #[error("sandbox unavailable: {0}")]
    SandboxUnavailable(String),
    #[error("{path}:{line}: {reason}")]
    InvalidRecord { path: PathBuf, line: usize, reason: String },
    #[error("invalid problem {task_id:?}: {reason}")]
    InvalidProblem { task_id: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("gold code does not lex: {0}")]
    GoldLex(#[from] LexError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    FunctionCall { entry_point: String },
    VariableEquals { var_name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRecord", into = "ProblemRecord")]
pub struct Problem {
    pub task_id: String,
    pub context: String,
    pub canonical_solution: String,
    pub tests: Vec<String>,
    pub check: Check,
    pub library: String,
}

impl Problem {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: &str| EvalError::InvalidProblem { task_id: self.task_id.clone(), reason: reason.into() };
        if self.task_id.is_empty() {
            return Err(fail("empty task_id"));
        }
        if self.tests.is_empty() || self.tests.iter().any(|t| t.trim().is_empty()) {
            return Err(fail("tests must be non-empty"));
        }
        match &self.check {
            Check::FunctionCall { entry_point } => {
                if !is_identifier(entry_point) || is_keyword(entry_point) {
                    return Err(fail("entry_point is not an identifier"));
                }
            }
            Check::VariableEquals { var_name } => {
                if !is_identifier(var_name) || is_keyword(var_name) {
                    return Err(fail("var_name is not an identifier"));
                }
                if self.tests.len() != 1 {
                    return Err(fail("variable-style problems carry exactly one test"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum CheckKind {
    Function,
    Variable,
}

/// Wire shape of a benchmark line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemRecord {
    task_id: String,
    context: String,
    canonical_solution: String,
    tests: Vec<String>,
    check_kind: CheckKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entry_point: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var_name: Option<String>,
    #[serde(default)]
    library: String,
}

impl TryFrom<ProblemRecord> for Problem {
    type Error = String;

    fn try_from(r: ProblemRecord) -> Result<Self, String> {
        let check = match r.check_kind {
            CheckKind::Function => {
                Check::FunctionCall { entry_point: r.entry_point.ok_or("function-style problem without entry_point")? }
            }
            CheckKind::Variable => {
                Check::VariableEquals { var_name: r.var_name.ok_or("variable-style problem without var_name")? }
            }
        };
        let problem = Problem {
            task_id: r.task_id,
            context: r.context,
            canonical_solution: r.canonical_solution,
            tests: r.tests,
            check,
            library: r.library,
        };
        problem.validate().map_err(|e| e.to_string())?;
        Ok(problem)
    }
}

impl From<Problem> for ProblemRecord {
    fn from(p: Problem) -> Self {
        let (check_kind, entry_point, var_name) = match p.check {
            Check::FunctionCall { entry_point } => (CheckKind::Function, Some(entry_point), None),
            Check::VariableEquals { var_name } => (CheckKind::Variable, None, Some(var_name)),
        };
        ProblemRecord {
            task_id: p.task_id,
            context: p.context,
            canonical_solution: p.canonical_solution,
            tests: p.tests,
            check_kind,
            entry_point,
            var_name,
            library: p.library,
        }
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let file = fs::File::open(path).map_err(|source| EvalError::Io { path: path.to_owned(), source })?;
    let mut out = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| EvalError::InvalidRecord {
            path: path.to_owned(),
            line: index + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn load_problems(path: &Path) -> Result<Vec<Problem>, EvalError> {
    let problems: Vec<Problem> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for p in &problems {
        if !seen.insert(p.task_id.as_str()) {
            return Err(EvalError::InvalidProblem { task_id: p.task_id.clone(), reason: "duplicate task_id".into() });
        }
    }
    Ok(problems)
}

pub fn problems_to_jsonl(problems: &[Problem]) -> String {
    problems.iter().map(|p| serde_json::to_string(p).expect("problem serializes") + "\n").collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Baseline,
    SketchShortcut,
    TwoStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    pub temperature: f64,
    pub seed: u64,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub task_id: String,
    pub samples: Vec<Sample>,
}

impl CandidateSet {
    /// A lone shortcut prediction is deterministic, so it stands for any k.
    pub fn is_deterministic(&self) -> bool {
        self.samples.len() == 1 && self.samples[0].stage == Stage::SketchShortcut
    }

    pub fn to_jsonl(&self) -> String {
        self.samples
            .iter()
            .map(|s| {
                let line = CandidateLine { task_id: self.task_id.clone(), sample: s.clone() };
                serde_json::to_string(&line).expect("candidate serializes") + "\n"
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidateLine {
    task_id: String,
    #[serde(flatten)]
    sample: Sample,
}

/// Read candidate lines, grouping them per task in first-seen order.
pub fn load_candidates(path: &Path) -> Result<Vec<CandidateSet>, EvalError> {
    let lines: Vec<CandidateLine> = read_jsonl(path)?;
    Ok(group_candidates(lines.into_iter().map(|l| (l.task_id, l.sample))))
}

pub fn load_candidate_files(paths: &[PathBuf]) -> Result<Vec<CandidateSet>, EvalError> {
    let mut all = Vec::new();
    for path in paths {
        let lines: Vec<CandidateLine> = read_jsonl(path)?;
        all.extend(lines.into_iter().map(|l| (l.task_id, l.sample)));
    }
    Ok(group_candidates(all))
}

fn group_candidates(items: impl IntoIterator<Item = (String, Sample)>) -> Vec<CandidateSet> {
    let mut order: Vec<CandidateSet> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (task_id, sample) in items {
        let i = *index.entry(task_id.clone()).or_insert_with(|| {
            order.push(CandidateSet { task_id, samples: Vec::new() });
            order.len() - 1
        });
        order[i].samples.push(sample);
    }
    order
}

/// Cut `text` at the earliest occurrence of any stop sequence.
pub fn truncate_completion<S: AsRef<str>>(text: &str, stops: &[S]) -> String {
    let cut = stops
        .iter()
        .map(AsRef::as_ref)
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}

/// Context, completion and every test, as one program that stops at the
/// first failing assertion.
pub fn assemble_program(problem: &Problem, completion: &str) -> String {
    let mut program = String::with_capacity(problem.context.len() + completion.len() + 256);
    let push_line = |program: &mut String, text: &str| {
        program.push_str(text);
        if !text.is_empty() && !text.ends_with('\n') {
            program.push('\n');
        }
    };
    program.push_str(&problem.context);
    push_line(&mut program, completion);
    if !program.is_empty() && !program.ends_with('\n') {
        program.push('\n');
    }
    program.push('\n');
    for test in &problem.tests {
        push_line(&mut program, test);
    }
    program
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    None,
    Assertion,
    Exception,
    Timeout,
    Syntax,
    Infra,
}

impl From<VerdictKind> for ErrorKind {
    fn from(kind: VerdictKind) -> Self {
        match kind {
            VerdictKind::None => ErrorKind::None,
            VerdictKind::Assertion => ErrorKind::Assertion,
            VerdictKind::Exception => ErrorKind::Exception,
            VerdictKind::Timeout => ErrorKind::Timeout,
            VerdictKind::Syntax => ErrorKind::Syntax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecVerdict {
    pub passed: bool,
    pub error_kind: ErrorKind,
    pub duration_ms: u64,
}

impl ExecVerdict {
    pub fn pass() -> Self {
        ExecVerdict { passed: true, error_kind: ErrorKind::None, duration_ms: 0 }
    }

    pub fn fail(kind: ErrorKind) -> Self {
        ExecVerdict { passed: false, error_kind: kind, duration_ms: 0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct RunnerUnavailable(pub String);

/// Executes assembled programs.
pub trait Runner: Sync {
    fn run(&self, program: &str, timeout_s: f64) -> Result<ExecVerdict, RunnerUnavailable>;
}

/// Deterministic stand-in for the sandbox: programs in the pass set pass,
/// everything else fails with an assertion.
#[derive(Debug, Clone, Default)]
pub struct StubRunner {
    passing: Option<HashSet<String>>,
    default_pass: bool,
}

impl StubRunner {
    /// Pass exactly the programs assembled from each problem's canonical
    /// solution.
    pub fn from_golden(problems: &[Problem]) -> Self {
        let passing = problems.iter().map(|p| assemble_program(p, &p.canonical_solution)).collect();
        StubRunner { passing: Some(passing), default_pass: false }
    }

    pub fn always(pass: bool) -> Self {
        StubRunner { passing: None, default_pass: pass }
    }
}

impl Runner for StubRunner {
    fn run(&self, program: &str, _timeout_s: f64) -> Result<ExecVerdict, RunnerUnavailable> {
        let pass = match &self.passing {
            Some(set) => set.contains(program),
            None => self.default_pass,
        };
        Ok(if pass { ExecVerdict::pass() } else { ExecVerdict::fail(ErrorKind::Assertion) })
    }
}

/// Wraps a closure as a runner.
pub struct FnRunner<F>(pub F);

impl<F> Runner for FnRunner<F>
where
    F: Fn(&str, f64) -> Result<ExecVerdict, RunnerUnavailable> + Sync,
{
    fn run(&self, program: &str, timeout_s: f64) -> Result<ExecVerdict, RunnerUnavailable> {
        (self.0)(program, timeout_s)
    }
}

/// Runs each program in a fresh harness process.
#[derive(Debug, Clone)]
pub struct HarnessRunner {
    pub command: HarnessCommand,
    pub memory_cap_mb: u64,
}

impl HarnessRunner {
    pub fn new(command: HarnessCommand) -> Self {
        HarnessRunner { command, memory_cap_mb: 512 }
    }
}

impl Runner for HarnessRunner {
    fn run(&self, program: &str, timeout_s: f64) -> Result<ExecVerdict, RunnerUnavailable> {
        let mut job = Job::execute(program, timeout_s);
        job.memory_cap_mb = self.memory_cap_mb;
        match self.command.run_job(&job) {
            Ok(v) => Ok(ExecVerdict { passed: v.passed, error_kind: v.error_kind.into(), duration_ms: v.duration_ms }),
            Err(HarnessError::Infra(detail)) => {
                log::warn!("harness infrastructure fault: {detail}");
                Ok(ExecVerdict::fail(ErrorKind::Infra))
            }
            Err(HarnessError::Unavailable(detail)) => Err(RunnerUnavailable(detail)),
        }
    }
}

/// Unbiased pass@k estimate from n samples of which c are correct.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    if k == 0 || k > n {
        return Err(EvalError::Domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    if c > n {
        return Err(EvalError::Domain(format!("need c <= n, got n={n}, c={c}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub timeout_s: f64,
    /// Worker threads for sample execution; 0 means one per CPU.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { ks: vec![1, 10, 100], timeout_s: 10.0, jobs: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProblemCount {
    pub n: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemResult {
    pub n: usize,
    pub c: usize,
    pub deterministic: bool,
    pub pass_at_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureRow {
    pub temperature: f64,
    pub per_problem: BTreeMap<String, ProblemResult>,
    pub pass_at_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub min_calls: usize,
    pub max_calls: usize,
    pub problems: usize,
    pub pass_at_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    /// Counts pooled over every temperature.
    pub per_problem: BTreeMap<String, ProblemCount>,
    pub rows: Vec<TemperatureRow>,
    /// Best value over the temperature rows for each k.
    pub pass_at_k: BTreeMap<usize, f64>,
    pub temperature_best: BTreeMap<usize, f64>,
    pub infra_failures: usize,
    pub error_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groupings: Option<Vec<BucketRow>>,
}

fn temperature_key(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn problem_pass_at_k(task_id: &str, n: usize, c: usize, deterministic: bool, k: usize) -> Result<f64, EvalError> {
    if deterministic {
        return Ok(if c > 0 { 1.0 } else { 0.0 });
    }
    if k > n {
        return Err(EvalError::InsufficientSamples { task_id: task_id.into(), n, k });
    }
    pass_at_k(n, c, k)
}

/// Execute every sample and aggregate pass@k per temperature.
pub fn evaluate(
    problems: &[Problem],
    candidate_sets: &[CandidateSet],
    runner: &dyn Runner,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let by_id: HashMap<&str, &Problem> = problems.iter().map(|p| (p.task_id.as_str(), p)).collect();
    for set in candidate_sets {
        if !by_id.contains_key(set.task_id.as_str()) {
            return Err(EvalError::MissingProblem(set.task_id.clone()));
        }
    }

    let jobs: Vec<(usize, usize)> =
        candidate_sets.iter().enumerate().flat_map(|(si, set)| (0..set.samples.len()).map(move |i| (si, i))).collect();
    let execute = || -> Result<Vec<(ExecVerdict, bool)>, EvalError> {
        jobs.par_iter()
            .map(|&(si, i)| {
                let set = &candidate_sets[si];
                let program = assemble_program(by_id[set.task_id.as_str()], &set.samples[i].text);
                let run = || runner.run(&program, config.timeout_s).map_err(|e| EvalError::SandboxUnavailable(e.0));
                let first = run()?;
                if first.error_kind != ErrorKind::Infra {
                    return Ok((first, false));
                }
                log::warn!("{}: infrastructure fault, retrying sample {i}", set.task_id);
                let second = run()?;
                let exhausted = second.error_kind == ErrorKind::Infra;
                Ok((second, exhausted))
            })
            .collect()
    };
    let verdicts = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| EvalError::SandboxUnavailable(e.to_string()))?
            .install(execute)?
    } else {
        execute()?
    };

    let mut infra_failures = 0;
    let mut error_counts: BTreeMap<String, usize> = BTreeMap::new();
    // temperature key -> task -> (n, c, deterministic)
    type TaskCounts = BTreeMap<String, (usize, usize, bool)>;
    let mut grid: BTreeMap<i64, (f64, TaskCounts)> = BTreeMap::new();
    let mut pooled: BTreeMap<String, ProblemCount> = BTreeMap::new();
    for (&(si, i), (verdict, exhausted)) in jobs.iter().zip(&verdicts) {
        let set = &candidate_sets[si];
        let sample = &set.samples[i];
        if *exhausted {
            infra_failures += 1;
        }
        *error_counts.entry(format!("{:?}", verdict.error_kind)).or_default() += 1;
        let row =
            grid.entry(temperature_key(sample.temperature)).or_insert_with(|| (sample.temperature, BTreeMap::new()));
        let cell = row.1.entry(set.task_id.clone()).or_insert((0, 0, true));
        cell.0 += 1;
        cell.1 += usize::from(verdict.passed);
        cell.2 &= sample.stage == Stage::SketchShortcut;
        let p = pooled.entry(set.task_id.clone()).or_default();
        p.n += 1;
        p.c += usize::from(verdict.passed);
    }
    if infra_failures > 0 {
        log::warn!("{infra_failures} samples failed on infrastructure faults after a retry");
    }

    let mut rows = Vec::new();
    for (_, (temperature, cells)) in grid {
        let mut per_problem = BTreeMap::new();
        for (task_id, (n, c, det)) in cells {
            let deterministic = det && n == 1;
            let mut scores = BTreeMap::new();
            for &k in &config.ks {
                scores.insert(k, problem_pass_at_k(&task_id, n, c, deterministic, k)?);
            }
            per_problem.insert(task_id, ProblemResult { n, c, deterministic, pass_at_k: scores });
        }
        let pass_at_k = mean_pass_at_k(per_problem.values(), &config.ks);
        rows.push(TemperatureRow { temperature, per_problem, pass_at_k });
    }

    let mut best = BTreeMap::new();
    let mut temperature_best = BTreeMap::new();
    for &k in &config.ks {
        let winner = rows.iter().fold(None::<&TemperatureRow>, |acc, row| match acc {
            Some(b) if b.pass_at_k[&k] >= row.pass_at_k[&k] => Some(b),
            _ => Some(row),
        });
        if let Some(row) = winner {
            best.insert(k, row.pass_at_k[&k]);
            temperature_best.insert(k, row.temperature);
        }
    }

    Ok(EvalReport {
        ks: config.ks.clone(),
        per_problem: pooled,
        rows,
        pass_at_k: best,
        temperature_best,
        infra_failures,
        error_counts,
        groupings: None,
    })
}

fn mean_pass_at_k<'a>(results: impl Iterator<Item = &'a ProblemResult> + Clone, ks: &[usize]) -> BTreeMap<usize, f64> {
    let count = results.clone().count();
    ks.iter()
        .map(|&k| {
            let total: f64 = results.clone().map(|r| r.pass_at_k[&k]).sum();
            (k, if count == 0 { 0.0 } else { total / count as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMatch {
    pub matches: Vec<bool>,
    pub accuracy: f64,
}

/// Compare the normalized sketch of each prediction with the gold sketch.
pub fn sketch_exact_match<S: AsRef<str>>(
    predictions: &[S],
    gold: &str,
    mode: SketchMode,
    table: &SymbolTable,
) -> Result<ExactMatch, EvalError> {
    let sketched_norm = |text: &str| -> Result<String, LexError> {
        let sketch = sketch_tokens(&lexer::tokenize(text)?, mode, table);
        normalize(&sketch.text)
    };
    let gold_norm = sketched_norm(gold)?;
    let matches: Vec<bool> =
        predictions.iter().map(|p| sketched_norm(p.as_ref()).is_ok_and(|s| s == gold_norm)).collect();
    let accuracy =
        if matches.is_empty() { 0.0 } else { matches.iter().filter(|m| **m).count() as f64 / matches.len() as f64 };
    Ok(ExactMatch { matches, accuracy })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiCountMode {
    /// Calls rooted at the library, one of its aliases, or a variable
    /// assigned from such a call.
    #[default]
    Taint,
    /// Every `name.attr(` call site.
    Crude,
}

/// Names under which `library` is bound by the imports in `code`.
pub fn detect_aliases(code: &str, library: &str) -> BTreeSet<String> {
    let mut aliases = BTreeSet::new();
    let Ok(stream) = lexer::tokenize(code) else {
        return aliases;
    };
    let t = &stream.tokens;
    for i in 0..t.len() {
        if !t[i].is_name("import") {
            continue;
        }
        let mut j = i + 1;
        while j < t.len() && t[j].kind == TokenKind::Name {
            let root = j;
            while j + 2 < t.len() && t[j + 1].is_op(".") && t[j + 2].kind == TokenKind::Name {
                j += 2;
            }
            j += 1;
            let bound = if t.get(j).is_some_and(|x| x.is_name("as"))
                && t.get(j + 1).is_some_and(|x| x.kind == TokenKind::Name)
            {
                j += 2;
                Some(t[j - 1].text.clone())
            } else {
                None
            };
            if t[root].text == library {
                aliases.insert(bound.unwrap_or_else(|| library.to_string()));
            }
            if t.get(j).is_some_and(|x| x.is_op(",")) {
                j += 1;
            } else {
                break;
            }
        }
    }
    aliases
}

fn matching_open(tokens: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0usize;
    for k in (0..=close).rev() {
        match tokens[k].text.as_str() {
            ")" | "]" | "}" if tokens[k].kind == TokenKind::Operator => depth += 1,
            "(" | "[" | "{" if tokens[k].kind == TokenKind::Operator => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            _ => {}
        }
    }
    None
}

/// Root name of the attribute chain whose call opens at `paren`, if the call
/// has the shape `root.attr...(`.
fn call_root(tokens: &[Token], paren: usize) -> Option<&str> {
    if paren < 3 || tokens[paren - 1].kind != TokenKind::Name || !tokens[paren - 2].is_op(".") {
        return None;
    }
    let mut k = paren - 3;
    loop {
        let t = &tokens[k];
        if t.is_op(")") || t.is_op("]") {
            k = matching_open(tokens, k)?.checked_sub(1)?;
            continue;
        }
        if t.kind != TokenKind::Name || is_keyword(&t.text) {
            return None;
        }
        if k >= 2 && tokens[k - 1].is_op(".") {
            k -= 2;
            continue;
        }
        return Some(&t.text);
    }
}

/// Count library API call sites in `code`.
pub fn count_api_calls(
    code: &str,
    library: &str,
    aliases: &BTreeSet<String>,
    mode: ApiCountMode,
) -> Result<usize, LexError> {
    let stream = lexer::tokenize(code)?;
    let tokens = &stream.tokens;
    let mut roots: HashSet<&str> = aliases.iter().map(String::as_str).collect();
    roots.insert(library);
    let mut tainted: HashSet<String> = HashSet::new();
    let mut count = 0;

    let mut start = 0;
    let mut depth = 0usize;
    for i in 0..=tokens.len() {
        let boundary = i == tokens.len()
            || matches!(
                tokens[i].kind,
                TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::EndMarker
            )
            || (depth == 0 && tokens[i].is_op(";"));
        if i < tokens.len() && tokens[i].kind == TokenKind::Operator {
            match tokens[i].text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        if !boundary {
            continue;
        }
        let stmt = start..i;
        start = i + 1;
        let mut hits = 0;
        for p in stmt.clone() {
            if !tokens[p].is_op("(") {
                continue;
            }
            if let Some(root) = call_root(tokens, p) {
                let counted = match mode {
                    ApiCountMode::Crude => true,
                    ApiCountMode::Taint => roots.contains(root) || tainted.contains(root),
                };
                if counted {
                    hits += 1;
                }
            }
        }
        count += hits;
        if mode == ApiCountMode::Taint {
            if let Some(targets) = assignment_targets(&tokens[stmt]) {
                for name in targets {
                    if hits > 0 {
                        tainted.insert(name);
                    } else {
                        tainted.remove(&name);
                    }
                }
            }
        }
    }
    Ok(count)
}

/// Plain names assigned by a statement of the form `a, b = ...` or `a = b = ...`.
fn assignment_targets(stmt: &[Token]) -> Option<Vec<String>> {
    let mut names = Vec::new();
    let mut depth = 0usize;
    let mut segment_start = 0;
    let mut found = false;
    for (i, t) in stmt.iter().enumerate() {
        if t.kind != TokenKind::Operator {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            "=" if depth == 0 => {
                found = true;
                for tok in &stmt[segment_start..i] {
                    if tok.kind == TokenKind::Name && !is_keyword(&tok.text) {
                        names.push(tok.text.clone());
                    } else if !(tok.is_op(",") || tok.is_op("(") || tok.is_op(")")) {
                        names.clear();
                        break;
                    }
                }
                segment_start = i + 1;
            }
            _ => {}
        }
    }
    found.then_some(names)
}

/// Upper bounds of count buckets: nearest-rank quartiles, deduplicated.
pub fn quartile_bounds(counts: &[usize]) -> Vec<usize> {
    if counts.is_empty() {
        return Vec::new();
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut bounds: Vec<usize> = (1..=4).map(|q| sorted[(q * n).div_ceil(4) - 1]).collect();
    bounds.dedup();
    bounds
}

/// Group problems by API-call count (from their canonical solutions) and
/// average each bucket's per-problem pass@k from `row`.
pub fn bucket_by_api_count(
    problems: &[Problem],
    row: &TemperatureRow,
    bounds: Option<&[usize]>,
    mode: ApiCountMode,
) -> Vec<BucketRow> {
    let counted: Vec<(&Problem, usize)> = problems
        .iter()
        .filter(|p| row.per_problem.contains_key(&p.task_id))
        .map(|p| {
            let code = format!("{}{}", p.context, p.canonical_solution);
            let aliases = detect_aliases(&code, &p.library);
            let calls = count_api_calls(&code, &p.library, &aliases, mode).unwrap_or(0);
            (p, calls)
        })
        .collect();
    let counts: Vec<usize> = counted.iter().map(|(_, c)| *c).collect();
    let bounds = bounds.map_or_else(|| quartile_bounds(&counts), <[usize]>::to_vec);
    let ks: Vec<usize> = row.pass_at_k.keys().copied().collect();

    let mut out = Vec::new();
    let mut lower = 0usize;
    for (i, &upper) in bounds.iter().enumerate() {
        let last = i + 1 == bounds.len();
        let members: Vec<&ProblemResult> = counted
            .iter()
            .filter(|(_, c)| *c >= lower && (*c <= upper || last))
            .map(|(p, _)| &row.per_problem[&p.task_id])
            .collect();
        let max_calls = if last { counts.iter().copied().max().unwrap_or(upper).max(upper) } else { upper };
        out.push(BucketRow {
            label: if lower == max_calls { format!("{lower}") } else { format!("{lower}-{max_calls}") },
            min_calls: lower,
            max_calls,
            problems: members.len(),
            pass_at_k: mean_pass_at_k(members.iter().copied(), &ks),
        });
        lower = upper + 1;
    }
    out
}

pub fn buckets_to_csv(rows: &[BucketRow]) -> Result<String, EvalError> {
    let ks: Vec<usize> = rows.first().map(|r| r.pass_at_k.keys().copied().collect()).unwrap_or_default();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["bucket".to_string(), "min_calls".into(), "max_calls".into(), "problems".into()];
    header.extend(ks.iter().map(|k| format!("pass@{k}")));
    writer.write_record(&header)?;
    for row in rows {
        let mut record =
            vec![row.label.clone(), row.min_calls.to_string(), row.max_calls.to_string(), row.problems.to_string()];
        record.extend(ks.iter().map(|k| format!("{:.6}", row.pass_at_k[k])));
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(task: &str, check: Check, tests: &[&str]) -> Problem {
        Problem {
            task_id: task.into(),
            context: "import pandas as pd\n".into(),
            canonical_solution: "x = 1\n".into(),
            tests: tests.iter().map(|s| s.to_string()).collect(),
            check,
            library: "pandas".into(),
        }
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_completion("return x\ndef g():", &DEFAULT_STOPS), "return x");
        assert_eq!(truncate_completion("return x", &DEFAULT_STOPS), "return x");
        assert_eq!(truncate_completion("a\nif b\nclass", &DEFAULT_STOPS), "a");
        assert_eq!(truncate_completion("abcd", &["cd", "bc"]), "a");
    }

    #[test]
    fn problem_wire_format() {
        let line = r#"{"task_id":"T/0","context":"c","canonical_solution":"s","tests":["assert f() == 1"],"check_kind":"function","entry_point":"f","library":"numpy"}"#;
        let p: Problem = serde_json::from_str(line).unwrap();
        assert_eq!(p.check, Check::FunctionCall { entry_point: "f".into() });
        assert_eq!(serde_json::to_string(&p).unwrap(), line);
        let bad = r#"{"task_id":"T/1","context":"","canonical_solution":"","tests":["a","b"],"check_kind":"variable","var_name":"out","library":""}"#;
        assert!(serde_json::from_str::<Problem>(bad).is_err());
    }

    #[test]
    fn assembly() {
        let p = problem("t", Check::VariableEquals { var_name: "x".into() }, &["assert x == 1"]);
        assert_eq!(assemble_program(&p, "x = 1"), "import pandas as pd\nx = 1\n\nassert x == 1\n");
    }

    #[test]
    fn pass_at_k_basics() {
        assert_eq!(pass_at_k(200, 200, 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(10, 0, 4).unwrap(), 0.0);
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
    }

    #[test]
    fn api_counts() {
        let aliases: BTreeSet<String> = ["pd".to_string()].into();
        let count = |code: &str| count_api_calls(code, "pandas", &aliases, ApiCountMode::Taint).unwrap();
        assert_eq!(count("pd.Series([1])"), 1);
        assert_eq!(count("x = pd.DataFrame(d); x.groupby('a').sum()"), 3);
        assert_eq!(count("y = 1 + 2"), 0);
        assert_eq!(count("y = [1].copy(); y.append(2)"), 0);
        assert_eq!(count("x = pd.read_csv(p)\nx = load()\nx.head()\n"), 1);
        assert_eq!(count("pd.concat([a, b])['c'].mean()"), 2);
        assert_eq!(count_api_calls("'a'.join(b); c.d(e)", "pandas", &aliases, ApiCountMode::Crude).unwrap(), 1);
    }

    #[test]
    fn alias_detection() {
        let aliases =
            detect_aliases("import numpy as np, pandas as pd\nimport pandas\nimport pandas.io as pio\n", "pandas");
        assert_eq!(aliases, ["pandas", "pd", "pio"].map(String::from).into());
    }

    #[test]
    fn quartiles() {
        assert_eq!(quartile_bounds(&[1, 2, 3, 4, 5, 6, 7, 8]), [2, 4, 6, 8]);
        assert_eq!(quartile_bounds(&[1, 1, 1, 1]), [1]);
        assert!(quartile_bounds(&[]).is_empty());
    }
}
