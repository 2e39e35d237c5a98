//! Command-line front end of the `schedrag` pipeline.
//!
//! Every subcommand resolves its configuration (built-in defaults, then the
//! `--config` file, then flags), writes its outputs into
//! `<output_dir>/<command>-<config hash>/` together with `config.toml`,
//! `result.json` and `manifest.json`, and prints a short summary.

pub mod commands;
pub mod config;
pub mod error;
pub mod rundir;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use schedrag::eval::AccuracyMode;
use schedrag::graph::HopDirection;
use schedrag::prompts::TaskKind;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "schedrag",
    version,
    about = "Schedule context retrieval, masked evaluation and preference training",
    after_help = "Precedence: flags override the --config file, which overrides built-in defaults.\n\
                  Exit codes: 0 success, 1 usage, 2 data, 3 gateway, 4 internal."
)]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root directory for run outputs [config: paths.output_dir, default: runs]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic schedule
    Generate(GenerateArgs),
    /// Parse and validate a schedule table, writing its canonical form
    Ingest(IngestArgs),
    /// Degree and maximal-hop distributions of the dependency graph
    AnalyzeGraph(AnalyzeGraphArgs),
    /// Embed a term file and a document corpus into a knowledge base
    BuildKb(BuildKbArgs),
    /// Sample first-order, hierarchical and sequential context bundles
    SampleContext(SampleContextArgs),
    /// Mask cells, query the gateway and score the answers
    RunEval(RunEvalArgs),
    /// Harvest preference pairs from evaluation outcomes
    CollectPrefs(CollectPrefsArgs),
    /// Train the preference scorer on a preference store
    TrainScorer(TrainScorerArgs),
    /// Condense task contexts through the gateway and record their lengths
    Polish(PolishArgs),
    /// Score tables from outcomes and attribute association matrices
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Ingest(_) => "ingest",
            Command::AnalyzeGraph(_) => "analyze-graph",
            Command::BuildKb(_) => "build-kb",
            Command::SampleContext(_) => "sample-context",
            Command::RunEval(_) => "run-eval",
            Command::CollectPrefs(_) => "collect-prefs",
            Command::TrainScorer(_) => "train-scorer",
            Command::Polish(_) => "polish",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SeedArg {
    /// Collection seed [config: seeds.collection, default: 42]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ScheduleArg {
    /// Schedule table (CSV or TSV) [config: paths.schedule]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub schedule: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct KbArg {
    /// Knowledge base directory written by build-kb [config: paths.kb_dir]
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    pub kb: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct GatewayArgs {
    /// Backend: http or mock:<echo|wrong|replay|table|strip|identity> [config: gateway.backend]
    #[arg(long, value_name = "SPEC")]
    #[serde(skip)]
    pub gateway: Option<String>,
    /// Transcript replayed by mock:replay [config: paths.transcript]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub replay: Option<PathBuf>,
    /// JSON object of task key to answer for mock:table [config: paths.answers]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub answers: Option<PathBuf>,
    /// Concurrent requests [config: gateway.client.max_parallel]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub max_parallel: Option<usize>,
    /// Seed sent with every request [config: seeds.inference, default: 12345]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub inference_seed: Option<u64>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct TaskArgs {
    /// Comma-separated task kinds (MVP, DA, AP) [config: eval.tasks]
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    #[serde(skip)]
    pub tasks: Option<Vec<TaskKind>>,
    /// Prompt context [config: eval.context, default: graph]
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub context: Option<config::ContextMode>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ScoringArgs {
    /// Ranked candidates accepted per cell [config: eval.k, default: 2]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub k: Option<usize>,
    /// Accept dates within this many days [config: eval.tolerance_days]
    #[arg(long, value_name = "DAYS")]
    #[serde(skip)]
    pub tolerance_days: Option<u32>,
    /// Accuracy over masked cells or whole rows [config: eval.mode, default: cells]
    #[arg(long, value_parser = parse_mode, value_name = "cells|rows")]
    #[serde(skip)]
    pub mode: Option<AccuracyMode>,
}

fn parse_mode(s: &str) -> Result<AccuracyMode, String> {
    match s {
        "cells" => Ok(AccuracyMode::Cells),
        "rows" => Ok(AccuracyMode::Rows),
        _ => Err(format!("expected cells or rows, got {s:?}")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Number of activities [config: generate.n_activities, default: 100]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub n: Option<usize>,
    /// Target mean total degree [config: generate.target_mean_degree, default: 3.86]
    #[arg(long, value_name = "X")]
    #[serde(skip)]
    pub target_degree: Option<f64>,
    /// Forward window for successor draws [config: generate.window, default: 20]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub window: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    /// JSON object mapping logical fields to header names
    #[arg(long, value_name = "FILE")]
    pub format_spec: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeGraphArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    /// Count maximal hops downstream only, or the larger of both directions
    #[arg(long, value_parser = parse_direction, default_value = "downstream", value_name = "downstream|either")]
    #[serde(serialize_with = "serialize_direction")]
    pub direction: HopDirection,
}

fn parse_direction(s: &str) -> Result<HopDirection, String> {
    match s {
        "downstream" => Ok(HopDirection::Downstream),
        "either" => Ok(HopDirection::Either),
        _ => Err(format!("expected downstream or either, got {s:?}")),
    }
}

fn serialize_direction<S: serde::Serializer>(d: &HopDirection, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match d {
        HopDirection::Downstream => "downstream",
        HopDirection::Either => "either",
    })
}

#[derive(Debug, Args, Serialize)]
pub struct BuildKbArgs {
    /// Directory of reference documents [config: paths.corpus_dir]
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    pub corpus: Option<PathBuf>,
    /// Tab-separated term and definition lines [config: paths.term_file]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub terms: Option<PathBuf>,
    /// Tokens per chunk [config: knowledge.chunk_tokens, default: 500]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub chunk_tokens: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleContextArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    /// Activity to sample around; repeatable, all activities when omitted
    #[arg(long, value_name = "ID")]
    pub target: Vec<String>,
    /// Sequential hop limit [config: sampler.max_sequential_hops, default: 3]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub max_hops: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct RunEvalArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    #[command(flatten)]
    #[serde(skip)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(skip)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub gateway: GatewayArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct CollectPrefsArgs {
    /// outcomes.jsonl written by run-eval [config: paths.outcomes]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub outcomes: Option<PathBuf>,
    /// Preference store to append to [config: paths.preference_db, default: inside the run directory]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub db: Option<PathBuf>,
    /// Also pair every correct answer against a one-cell corruption
    #[arg(long)]
    pub corrupt: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainScorerArgs {
    /// Preference store [config: paths.preference_db]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub prefs: Option<PathBuf>,
    /// Supervised warm-up epochs [config: loss.sft_epochs, default: 10]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub sft_epochs: Option<usize>,
    /// Alignment epochs [config: loss.align_epochs, default: 10]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub align_epochs: Option<usize>,
    /// Gradient step size [config: loss.learning_rate, default: 0.5]
    #[arg(long, value_name = "X")]
    #[serde(skip)]
    pub learning_rate: Option<f64>,
    /// Weight of the context-rule loss [config: loss.alpha, default: 0.5]
    #[arg(long, value_name = "X")]
    #[serde(skip)]
    pub alpha: Option<f64>,
    /// Weight of the preference loss [config: loss.beta, default: 1.0]
    #[arg(long, value_name = "X")]
    #[serde(skip)]
    pub beta: Option<f64>,
    /// Context-rule loss [config: loss.rule_loss, default: applicability]
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub rule_loss: Option<config::RuleLossKind>,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct PolishArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    #[command(flatten)]
    #[serde(skip)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(skip)]
    pub tasks: TaskArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub gateway: GatewayArgs,
    /// Histogram bin width in tokens [config: polish.bin_width, default: 25]
    #[arg(long, value_name = "N")]
    #[serde(skip)]
    pub bin_width: Option<usize>,
    /// Polish at most this many tasks per kind
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// outcomes.jsonl to score [config: paths.outcomes]
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub outcomes: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub schedule: ScheduleArg,
    /// Comma-separated attributes for Pearson and cosine matrices (needs a schedule)
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
}

/// Runs the command line `args` (program name first), writing the summary to
/// `stdout` and diagnostics to `stderr`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match commands::execute(cli) {
        Ok(summary) => {
            let _ = stdout.write_all(summary.as_bytes());
            0
        }
        Err((e, dir)) => {
            let _ = writeln!(stderr, "{e}");
            if let Some(dir) = dir {
                let _ = writeln!(stderr, "run directory: {}", dir.display());
            }
            e.exit_code()
        }
    }
}

/// Long help of the program and of every subcommand, separated by headers.
pub fn help_text() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let mut out = format!("$ schedrag --help\n{}\n", cmd.render_long_help());
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_owned()).collect();
    for name in names {
        if name == "help" {
            continue;
        }
        let sub = cmd.find_subcommand_mut(&name).expect("subcommand exists");
        out.push_str(&format!("\n$ schedrag {name} --help\n{}\n", sub.render_long_help()));
    }
    out
}
