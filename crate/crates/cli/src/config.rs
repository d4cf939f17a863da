//! The declarative run configuration. Command-line flags are folded into it
//! before anything runs, and the result is frozen into the run directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sketchcode_core::corpus::{FilterConfig, WeightConfig};
use sketchcode_core::evalkit::{default_stops, ApiCountMode};
use sketchcode_core::orchestrator::{default_temperatures, GenerationSettings, ModelEndpoint};
use sketchcode_core::sketch::{SketchMode, SymbolTable};
use sketchcode_core::traindata::EmitConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    pub seed: u64,
    /// Worker threads for every pool; 0 means one per CPU.
    pub jobs: usize,
    pub library: String,
    pub benchmark: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub sketch: SketchSection,
    pub traindata: TraindataSection,
    pub endpoints: EndpointsSection,
    pub inference: InferenceSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_dir: PathBuf::from("run"),
            seed: 0,
            jobs: 0,
            library: "pandas".into(),
            benchmark: None,
            corpus: CorpusSection::default(),
            sketch: SketchSection::default(),
            traindata: TraindataSection::default(),
            endpoints: EndpointsSection::default(),
            inference: InferenceSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// JSON-lines manifest of source files.
    pub manifest: Option<PathBuf>,
    /// Directory the manifest paths are relative to; defaults to the
    /// manifest's own directory.
    pub root: Option<PathBuf>,
    /// Command line of the harness used for the syntax rule; the lexical
    /// check alone when unset.
    pub syntax_harness: Option<String>,
    pub extra_draws: usize,
    pub filter: FilterConfig,
    pub weights: WeightConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchSection {
    pub mode: SketchMode,
    pub table: SymbolTable,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraindataSection {
    pub emit: EmitConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointsSection {
    pub baseline: Option<ModelEndpoint>,
    pub sketcher: Option<ModelEndpoint>,
    pub generator: Option<ModelEndpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    #[default]
    Baseline,
    TwoStage,
}

impl StrategyKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::TwoStage => "two-stage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    pub strategy: StrategyKind,
    pub temperatures: Vec<f64>,
    /// Samples per problem for the baseline.
    pub n: usize,
    pub n_sketch: usize,
    pub n_final: usize,
    pub max_tokens: usize,
    pub top_p: f64,
    pub stop: Vec<String>,
    pub in_flight: usize,
}

impl Default for InferenceSection {
    fn default() -> Self {
        let settings = GenerationSettings::default();
        InferenceSection {
            strategy: StrategyKind::Baseline,
            temperatures: default_temperatures(),
            n: 200,
            n_sketch: 200,
            n_final: 200,
            max_tokens: settings.max_tokens,
            top_p: settings.top_p,
            stop: default_stops(),
            in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerKind {
    #[default]
    Harness,
    /// Passes exactly the canonical solutions; for offline checks.
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub timeout_s: f64,
    pub runner: RunnerKind,
    pub harness: Option<String>,
    pub memory_cap_mb: u64,
    pub bucket_mode: ApiCountMode,
    pub bucket_bounds: Option<Vec<usize>>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ks: vec![1, 10, 100],
            timeout_s: 10.0,
            runner: RunnerKind::Harness,
            harness: None,
            memory_cap_mb: 512,
            bucket_mode: ApiCountMode::Taint,
            bucket_bounds: None,
        }
    }
}

impl RunConfig {
    /// Load a TOML file; relative paths inside it resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run_dir);
        for p in [&mut self.benchmark, &mut self.corpus.manifest, &mut self.corpus.root].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.filter.validate().map_err(anyhow::Error::msg).context("corpus.filter")?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            bail!("eval.ks must be a non-empty list of positive integers");
        }
        if self.eval.timeout_s <= 0.0 {
            bail!("eval.timeout_s must be positive");
        }
        if self.inference.temperatures.iter().any(|t| !(0.0..=2.0).contains(t)) {
            bail!("inference.temperatures must lie in [0, 2]");
        }
        if self.inference.n == 0 || self.inference.n_sketch == 0 || self.inference.n_final == 0 {
            bail!("inference sample counts must be positive");
        }
        if self.traindata.emit.shard_bytes == 0 || self.traindata.emit.sentinel.trim().is_empty() {
            bail!("traindata.emit needs a positive shard_bytes and a non-blank sentinel");
        }
        for (name, path) in [("benchmark", &self.benchmark), ("corpus.manifest", &self.corpus.manifest)] {
            if let Some(p) = path {
                if !p.exists() {
                    bail!("{name} {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn generation_settings(&self) -> GenerationSettings {
        GenerationSettings {
            max_tokens: self.inference.max_tokens,
            top_p: self.inference.top_p,
            stop: self.inference.stop.clone(),
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Write the effective configuration for one subcommand into the run
    /// directory.
    pub fn freeze(&self, command: &str) -> Result<PathBuf> {
        let dir = self.run_dir.join("config");
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join(format!("{command}.toml"));
        fs::write(&path, self.to_toml()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.run_dir.join("corpus")
    }

    pub fn candidates_dir(&self, strategy: StrategyKind) -> PathBuf {
        self.run_dir.join("candidates").join(strategy.dir_name())
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.run_dir.join("eval")
    }
}
