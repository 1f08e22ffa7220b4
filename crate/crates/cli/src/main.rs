use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "sedtalker", version, about = "Speech emotion diarization and emotion-conditioned face animation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration JSON.
    #[arg(long, global = true, env = "SEDTALKER_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides one config key, e.g. `--set sed.train.max_epochs=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Map labels, split the manifest and compute class weights.
    Prepare(commands::prepare::PrepareArgs),
    /// Write a separable synthetic feature set in the `prepare` layout.
    SynthSed(commands::sed::SynthSedArgs),
    /// Train the frame-level classifier.
    TrainSed(commands::sed::TrainSedArgs),
    /// Features to a smoothed emotion timeline.
    Diarize(commands::sed::DiarizeArgs),
    /// Classification report with bootstrap confidence intervals.
    ReportSed(commands::sed::ReportSedArgs),
    /// Train the animator on synthetic data.
    TrainAnimator(commands::animate::TrainAnimatorArgs),
    /// Features and timeline to a mesh sequence.
    Animate(commands::animate::AnimateArgs),
    /// Mesh metrics over paired sequence directories.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    let config = RunConfig::load(g.config.as_deref(), g.seed, &g.overrides)?;
    match cli.command {
        Command::Prepare(a) => commands::prepare::run(&a, &config),
        Command::SynthSed(a) => commands::sed::synth(&a, &config),
        Command::TrainSed(a) => commands::sed::train(&a, &config),
        Command::Diarize(a) => commands::sed::diarize(&a, &config),
        Command::ReportSed(a) => commands::sed::report(&a, &config),
        Command::TrainAnimator(a) => commands::animate::train(&a, &config),
        Command::Animate(a) => commands::animate::run(&a, &config),
        Command::Evaluate(a) => commands::evaluate::run(&a, &config),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use sedtalker_core::Error as E;
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<E>()) else {
        return "usage";
    };
    match e {
        E::Dimension(_) => "dimension",
        E::Parameter(_) => "parameter",
        E::EmptyInput(_) => "empty_input",
        E::Input(_) => "input",
        E::NonFinite(_) => "non_finite",
        E::Config(_) => "config",
        E::Optimizer { .. } => "optimizer",
        E::UnmappedLabel { .. } => "unmapped_label",
        E::UnknownSource(_) => "unknown_source",
        E::DegenerateClass(_) => "degenerate_class",
        E::EmptyUtterance { .. } => "empty_utterance",
        E::Stratification(_) => "stratification",
        E::Alignment { .. } => "alignment",
        E::Topology(_) => "topology",
        E::InfeasibleAlignment { .. } => "infeasible_alignment",
        E::EmptyTimeline(_) => "empty_timeline",
        E::Validation(_) => "validation",
        E::NonFiniteLoss(_) => "non_finite_loss",
        E::Format { .. } => "format",
        E::File { .. } => "file",
        E::Io(_) => "io",
        E::Json(_) => "json",
        E::Csv(_) => "csv",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = json!({
                "error": {
                    "kind": error_kind(&err),
                    "message": err.to_string(),
                    "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
