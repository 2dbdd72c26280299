use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diffprot::resampling::Strategy;
use diffprot_cli::{
    cmd_classify, cmd_evaluate, cmd_generate, cmd_train, parse_snr_list, ClassifyArgs, EvaluateArgs, GenerateArgs,
    TrainArgs, EXIT_THRESHOLD_MISSED,
};

#[derive(Parser)]
#[command(
    name = "diffprot",
    version,
    about = "Transformer differential protection: synthesis, training, evaluation and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled waveform corpus.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Corpus plan JSON; defaults to the reference plan.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cap every top-level class at this many cases.
        #[arg(long)]
        cases_per_class: Option<usize>,
        /// Add measurement noise at this SNR in dB.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Train the six-classifier pipeline on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Training configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["small", "paper"])]
        grid: Option<String>,
        #[arg(long, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<Strategy>()))]
        resample: Option<Strategy>,
    },
    /// Score a trained pipeline on its holdout cases.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Evaluation configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated SNR list in dB; `inf` is noise-free.
        #[arg(long, value_parser = clap::builder::ValueParser::new(parse_snr_list))]
        snr: Option<Vec<Option<f64>>>,
        /// Use every case instead of the recorded holdout.
        #[arg(long)]
        all: bool,
        /// Also time each stage over this many runs (at least 10).
        #[arg(long)]
        timing: Option<usize>,
    },
    /// Emit JSON-lines decisions for CSV records or a sample stream on stdin.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// Write decisions into this directory instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Read `t,ia,ib,ic` rows from standard input.
        #[arg(long, conflicts_with = "inputs", required_unless_present = "inputs")]
        stream: bool,
        inputs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut err = std::io::stderr();
    let result = match cli.command {
        Command::Generate { out, seed, config, cases_per_class, snr } => {
            cmd_generate(&GenerateArgs { out, seed, config, cases_per_class, snr_db: snr }, &mut err).map(|_| true)
        }
        Command::Train { corpus, out, seed, config, grid, resample } => {
            cmd_train(&TrainArgs { corpus, out, seed, config, grid, resample }, &mut err).map(|_| true)
        }
        Command::Evaluate { corpus, model, out, seed, config, snr, all, timing } => cmd_evaluate(
            &EvaluateArgs { corpus, model, out, seed, config, snr, all_cases: all, timing_runs: timing },
            &mut err,
        ),
        Command::Classify { model, out, stream, inputs } => {
            let stdin = std::io::stdin().lock();
            let mut stdout = std::io::stdout().lock();
            cmd_classify(&ClassifyArgs { model, inputs, stream, out }, stdin, &mut stdout).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_THRESHOLD_MISSED),
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            ExitCode::from(1)
        }
    }
}
