//! chronoprompt: template construction, multi-task prompt tuning, and
//! evaluation workflows for temporal relation extraction.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use chronoprompt::corpus::Split;
use chronoprompt::evaluator::MetricsMode;
use chronoprompt::trainer::AuxMode;
use clap::{Args, Parser, Subcommand};

use crate::config::{BackendKind, RunConfig};

/// Failures with documented exit codes: 2 usage or config, 3 missing
/// artifact, 4 divergence.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Missing(String),
    Diverged(u64),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::Missing(what) => write!(f, "missing {what}"),
            Failure::Diverged(step) => write!(
                f,
                "training diverged at step {step}; history records the last finite step"
            ),
        }
    }
}

impl std::error::Error for Failure {}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Missing(_) => 3,
            Failure::Diverged(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "chronoprompt",
    version,
    about = "Cloze-prompt workflows for temporal relation extraction"
)]
struct Cli {
    /// Run configuration TOML.
    #[arg(long, global = true, default_value = "chronoprompt.toml")]
    config: PathBuf,
    /// Root seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model backend, overriding the config file.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// Output directory override: run root for train, report directory for
    /// the read-only commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, score, and select cloze templates into the pool file.
    GenerateTemplates(GenerateArgs),
    /// Train with the multi-task objective and write a run directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(ReportArgs),
    /// Predict a relation graph over one sentence with marked events.
    Predict(PredictArgs),
    /// Export mask-position representations as TSV.
    ExportReprs(ExportArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Beam width for span infilling; 1 gives one candidate per scaffold.
    #[arg(long, default_value_t = 200)]
    pub beam_width: usize,
    /// Longest fill, in tokens.
    #[arg(long, default_value_t = 8)]
    pub max_fill_tokens: usize,
    /// Few-shot instances per label in each scoring split.
    #[arg(long, default_value_t = 4)]
    pub fewshot_per_label: usize,
    /// How many templates to mark selected.
    #[arg(long, default_value_t = 5)]
    pub topk: usize,
    /// Epochs per scoring fine-tune.
    #[arg(long, default_value_t = 2)]
    pub scoring_epochs: usize,
    /// Hand-written template scored alongside the generated ones, e.g.
    /// "{sent} The temporal relation between {e1} and {e2} is {mask} ."
    #[arg(long)]
    pub manual_template: Option<String>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Pool index to train with instead of the best selected template.
    #[arg(long)]
    pub template_index: Option<usize>,
    /// Hand-written template used instead of the pool.
    #[arg(long)]
    pub manual_template: Option<String>,
    /// Auxiliary masking task, overriding the config file.
    #[arg(long, value_parser = parse_aux)]
    pub aux: Option<AuxMode>,
    /// Contrastive term on or off, overriding the config file.
    #[arg(long, value_parser = parse_switch)]
    pub contrastive: Option<bool>,
    /// Sweep one loss weight: tau|alpha|beta=V1,V2,...
    #[arg(long)]
    pub sweep: Option<String>,
    /// Overwrite an existing run directory for the same config.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Checkpoint file or run directory containing one.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Split to evaluate.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Metric convention, overriding the config file.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<MetricsMode>,
    /// Break results down by unseen-trigger buckets (reads the train split).
    #[arg(long)]
    pub buckets: bool,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Checkpoint file or run directory containing one.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON file: {"tokens": [...], "events": [[start, end], ...]}.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    /// Checkpoint file or run directory containing one.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Split to export.
    #[arg(long, default_value = "dev", value_parser = parse_split)]
    pub split: Split,
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?}; expected train, dev, or test")),
    }
}

fn parse_mode(s: &str) -> Result<MetricsMode, String> {
    match s {
        "strict_micro" => Ok(MetricsMode::StrictMicro),
        "vague_excluded" => Ok(MetricsMode::VagueExcluded),
        _ => Err(format!("unknown mode {s:?}; expected strict_micro or vague_excluded")),
    }
}

fn parse_aux(s: &str) -> Result<AuxMode, String> {
    match s {
        "ter" => Ok(AuxMode::Ter),
        "rand" => Ok(AuxMode::Rand),
        "off" => Ok(AuxMode::Off),
        _ => Err(format!("unknown aux mode {s:?}; expected ter, rand, or off")),
    }
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "mock" => Ok(BackendKind::Mock),
        "external" => Ok(BackendKind::External),
        _ => Err(format!("unknown backend {s:?}; expected mock or external")),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = RunConfig::load(&cli.config)
        .map_err(|e| Failure::Usage(format!("{e:#}")))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(kind) = cli.backend {
        config.backend.kind = kind;
    }
    config.resolve();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::GenerateTemplates(args) => commands::generate_templates(&config, args),
        Command::Train(args) => {
            if let Some(aux) = args.aux {
                config.train.aux_mode = aux;
            }
            if let Some(enabled) = args.contrastive {
                config.train.con_enabled = enabled;
            }
            commands::cmd_train(&config, out, args)
        }
        Command::Eval(args) => commands::cmd_eval(&config, out, args),
        Command::Predict(args) => commands::cmd_predict(out, args),
        Command::ExportReprs(args) => commands::cmd_export_reprs(&config, out, args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        let code = err.downcast_ref::<Failure>().map_or(1, Failure::exit_code);
        std::process::exit(code);
    }
}
