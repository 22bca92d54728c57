//! Command-line orchestration of the pipeline.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, ErrorClass, Result};

pub use commands::{
    run_stage, ArtifactEntry, ArtifactMeta, CandidateSummary, GoldMarkup, Manifest, OntologySummary, Provenance,
    RankedRow, ReportFile, RunOptions, Stage, TrainingSummary, VERSION,
};
pub use config::{
    Backend, EvaluationSection, ExtractionSection, Overrides, Paths, PipelineConfig, RankingSection, SelectorKind,
    StandardizationSection, SynthSection,
};

#[derive(Debug, Parser)]
#[command(name = "phenoprio", version, about = "Phenotype extraction, standardization and prioritization pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Pipeline config (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required when no config file is given
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// Evaluation cutoffs, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Accept inputs produced under a different config
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ontology with disease and gene annotations
    World,
    /// Parse ontology and annotations, write the term feature table
    Ingest,
    /// Generate a cohort with narratives
    Synth,
    /// Filter notes and split them into chunks
    Chunk,
    /// Extract phenotype mentions from chunks
    Extract,
    /// Map mentions to ontology terms
    Standardize,
    /// Train both rankers and keep the better one
    Train,
    /// Rank each patient's terms
    Rank {
        /// JSONL term lists to rank instead of the standardized ones
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Top-k metrics with bootstrap intervals
    Evaluate {
        /// JSONL ranked lists to evaluate instead of the ranker output
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Metrics after extraction, standardization and prioritization
    Ablate,
    /// Prioritized metrics against random orderings
    Permtest,
}

impl Command {
    fn stage(&self) -> (Stage, Option<PathBuf>) {
        match self {
            Command::World => (Stage::World, None),
            Command::Ingest => (Stage::Ingest, None),
            Command::Synth => (Stage::Synth, None),
            Command::Chunk => (Stage::Chunk, None),
            Command::Extract => (Stage::Extract, None),
            Command::Standardize => (Stage::Standardize, None),
            Command::Train => (Stage::Train, None),
            Command::Rank { input } => (Stage::Rank, input.clone()),
            Command::Evaluate { input } => (Stage::Evaluate, input.clone()),
            Command::Ablate => (Stage::Ablate, None),
            Command::Permtest => (Stage::Permtest, None),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Backend => 4,
    }
}

pub fn error_json(e: &Error) -> String {
    let class = match e.class() {
        ErrorClass::Config => "config",
        ErrorClass::Data => "data",
        ErrorClass::Backend => "backend",
    };
    json!({"error": {"class": class, "kind": e.kind(), "message": e.to_string()}}).to_string()
}

/// Resolves the config from the file and flags.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match (&cli.config, cli.seed) {
        (Some(path), _) => PipelineConfig::load(path)?,
        (None, Some(seed)) => PipelineConfig::with_seed(seed),
        (None, None) => return Err(Error::Config("either --config or --seed is required".into())),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        backend: cli.backend,
        cutoffs: cli.k.clone(),
        out_dir: cli.out.clone(),
        concurrency: cli.concurrency,
    });
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a subcommand inside a pool of `concurrency` workers.
pub fn execute(stage: Stage, cfg: &PipelineConfig, opts: &RunOptions) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_stage(stage, cfg, opts))
}

/// Parses arguments, runs, and returns the process exit code. Errors are
/// printed to stderr as one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (stage, input) = cli.command.stage();
    let result = resolve_config(&cli).and_then(|cfg| {
        execute(
            stage,
            &cfg,
            &RunOptions {
                force: cli.force,
                input,
            },
        )
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
