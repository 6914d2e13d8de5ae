//! `sestra`: train, evaluate, and inspect instruction-execution agents.
//!
//! Exit status is 0 on success, 1 when flags, configuration, or input data
//! are invalid, and 2 when a run fails.

mod commands;
mod domain;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sestra::domains::DomainKind;
use sestra::training::Algorithm;

#[derive(Debug, Parser)]
#[command(
    name = "sestra",
    version,
    about = "Instruction-execution agents trained with single-step reward observation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy and write checkpoints, the resolved config, and a JSONL log.
    Train(TrainArgs),
    /// Greedily evaluate a saved model on a data split.
    Evaluate(EvaluateArgs),
    /// Execute one instruction from one state with a saved model.
    Rollout(RolloutArgs),
    /// Export the six attention heads of one greedy rollout.
    DumpAttention(DumpAttentionArgs),
    /// Write shortest-path demonstrations for every instruction in a split.
    GenDemos(GenDemosArgs),
    /// Run the gradient checks and domain property checks.
    Selftest(SelftestArgs),
}

/// Where interaction records come from: a `.tsv` file, or a directory of
/// `<domain>-<split>.tsv` files.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    domain: Option<DomainKind>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    data: PathBuf,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds; each run goes to `<out>/seed-<n>` and the best
    /// by validation accuracy is reported.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Minimum token count for the vocabulary.
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Where to write the full JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Overrides the horizon stored with the model.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct RolloutArgs {
    #[arg(long)]
    model: PathBuf,
    /// Start state in the domain's state grammar.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    state: Option<String>,
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    instruction: Option<String>,
    /// Earlier instructions of the interaction, oldest first.
    #[arg(long, conflicts_with = "input")]
    history: Vec<String>,
    /// JSON file with `state`, `instruction`, and optional `history`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct DumpAttentionArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Interaction identifier; the first interaction when absent.
    #[arg(long)]
    interaction: Option<String>,
    /// Zero-based turn index.
    #[arg(long, default_value_t = 0)]
    turn: usize,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenDemosArgs {
    #[arg(long)]
    domain: DomainKind,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = sestra::training::DEFAULT_NODE_CAP)]
    node_cap: usize,
    /// JSONL output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Random states per domain.
    #[arg(long, default_value_t = 1000)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::DumpAttention(a) => commands::dump_attention(a),
        Command::GenDemos(a) => commands::gen_demos(a),
        Command::Selftest(a) => selftest::run(a.states, a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
