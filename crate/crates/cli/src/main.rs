mod config;
mod evaluation;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use sketchcode_core::sketch::SketchMode;

use config::{RunConfig, StrategyKind};

/// Sketch-based code generation: corpus preparation, training data,
/// two-stage inference and execution-based evaluation.
#[derive(Debug, Parser)]
#[command(name = "sketchcode", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; 0 means one per CPU.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Print the effective configuration and the planned inputs and outputs,
    /// then exit without touching anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Directory that receives every default output.
    #[arg(long, global = true, value_name = "DIR")]
    run_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, filter, deduplicate and plan the training corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Anonymize source into sketches.
    #[command(subcommand)]
    Sketch(SketchCommand),
    /// Write sharded training documents for the sketcher or the generator.
    Traindata(TraindataArgs),
    /// Sample candidates from completion endpoints.
    Infer(InferArgs),
    /// Execute candidates and report metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve completions from a canned transcript until killed.
    MockServe(MockServeArgs),
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Clean and quality-filter the files listed in a manifest.
    Filter {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory manifest paths are relative to.
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop exact duplicates after whitespace normalization.
    Dedup {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep files that import the target library.
    Extract {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        library: Option<String>,
    },
    /// Build the weighted, shuffled epoch plan.
    Plan {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        extra_draws: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum SketchCommand {
    /// Print the sketch of one file.
    File {
        path: PathBuf,
        #[arg(long)]
        mode: Option<SketchMode>,
    },
    /// Sketch every record of a records file.
    Corpus {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<SketchMode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DocKind {
    Sketcher,
    Generator,
}

#[derive(Debug, Args)]
struct TraindataArgs {
    #[arg(value_enum)]
    kind: DocKind,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<SketchMode>,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(value_enum)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Point every configured endpoint at this server.
    #[arg(long)]
    base_url: Option<String>,
    /// Comma-separated sampling temperatures.
    #[arg(long, value_delimiter = ',')]
    temperatures: Option<Vec<f64>>,
    /// Samples per problem for the baseline.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_sketch: Option<usize>,
    #[arg(long)]
    n_final: Option<usize>,
    #[arg(long)]
    mode: Option<SketchMode>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Execute candidate files and write the metrics report.
    Run {
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Candidate directories or files; directories are searched for
        /// `.jsonl` files.
        #[arg(long, num_args = 1..)]
        candidates: Vec<PathBuf>,
        /// Harness command line.
        #[arg(long, conflicts_with = "stub")]
        harness: Option<String>,
        /// Pass exactly the canonical solutions instead of executing.
        #[arg(long)]
        stub: bool,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unbiased pass@k for one problem.
    Passk {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        k: usize,
    },
    /// Sketch exact match of candidates against canonical solutions.
    SketchEm {
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        candidates: Vec<PathBuf>,
        #[arg(long)]
        mode: Option<SketchMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a metrics report as a table.
    Report {
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct MockServeArgs {
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long, default_value = "127.0.0.1:0")]
    addr: String,
    /// Append every request to this JSON-lines file.
    #[arg(long)]
    record: Option<PathBuf>,
}

/// A configuration problem found after flags were applied.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Shared state for one invocation.
pub struct Ctx {
    pub config: RunConfig,
    pub dry_run: bool,
}

impl Ctx {
    /// Announce what a command reads and writes. In a dry run this prints
    /// the plan and returns `false`; otherwise the configuration is frozen
    /// under `name` and the command should proceed.
    pub fn proceed(&self, name: &str, reads: &[impl AsRef<Path>], writes: &[impl AsRef<Path>]) -> Result<bool> {
        self.config.validate().map_err(|e| UsageError(format!("{e:#}")))?;
        if self.dry_run {
            println!("# {name}");
            for p in reads {
                println!("# reads  {}", p.as_ref().display());
            }
            for p in writes {
                println!("# writes {}", p.as_ref().display());
            }
            print!("{}", self.config.to_toml());
            return Ok(false);
        }
        let frozen = self.config.freeze(name)?;
        log::info!("configuration frozen to {}", frozen.display());
        Ok(true)
    }
}

fn build_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(jobs) = global.jobs {
        config.jobs = jobs;
    }
    if let Some(dir) = &global.run_dir {
        config.run_dir = dir.clone();
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<()> {
    match command {
        Command::Corpus(cmd) => match cmd {
            CorpusCommand::Filter { manifest, root, out } => pipeline::filter(ctx, manifest, root, out),
            CorpusCommand::Dedup { input, out } => pipeline::dedup_records(ctx, input, out),
            CorpusCommand::Extract { input, out, library } => pipeline::extract(ctx, input, out, library),
            CorpusCommand::Plan { input, out, extra_draws } => pipeline::plan(ctx, input, out, extra_draws),
        },
        Command::Sketch(cmd) => match cmd {
            SketchCommand::File { path, mode } => pipeline::sketch_file(ctx, &path, mode),
            SketchCommand::Corpus { input, out, mode } => pipeline::sketch_corpus(ctx, input, out, mode),
        },
        Command::Traindata(args) => pipeline::traindata(ctx, args),
        Command::Infer(args) => evaluation::infer(ctx, args),
        Command::Eval(cmd) => match cmd {
            EvalCommand::Run { benchmark, candidates, harness, stub, ks, out } => {
                evaluation::run(ctx, benchmark, candidates, harness, stub, ks, out)
            }
            EvalCommand::Passk { n, c, k } => evaluation::passk(n, c, k),
            EvalCommand::SketchEm { benchmark, candidates, mode, out } => {
                evaluation::sketch_em(ctx, benchmark, candidates, mode, out)
            }
            EvalCommand::Report { report } => evaluation::report(ctx, report),
        },
        Command::MockServe(args) => evaluation::mock_serve(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbose);

    let config = match build_config(&cli.global) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    if config.jobs > 0 {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build_global() {
            log::warn!("could not size the worker pool: {err}");
        }
    }

    let mut ctx = Ctx { config, dry_run: cli.global.dry_run };
    match dispatch(cli.command, &mut ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if err.is::<UsageError>() { 2 } else { 1 })
        }
    }
}
