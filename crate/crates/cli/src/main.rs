//! `forge`: generate → augment → build → infer → eval, plus a format report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{Category, CliError};

#[derive(Debug, Parser)]
#[command(name = "forge", about = "Build, run and score graph instruction corpora")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Global seed; overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate task instances for every dataset of a suite.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand generated instances into format-augmented and self-supervised samples.
    Augment {
        /// An augment plan, or a suite config whose `augment` block is used.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, split, augment and write a corpus.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a chat-completions endpoint for every sample of a split.
    Infer {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        endpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Request/response journal (default: `<out>.log.jsonl`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a predictions file.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        preds: PathBuf,
        /// Where to write the JSON report (default: `report.json` next to the predictions).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Absolute error charged for unparseable regression answers instead of excluding them.
        #[arg(long, value_name = "VALUE")]
        penalize_unparseable: Option<f64>,
    },
    /// Mean token counts per format and, given predictions, accuracy per format.
    FormatReport {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        preds: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
}

fn version() -> String {
    format!(
        "{} (corpus schema {}, template pack {})",
        env!("CARGO_PKG_VERSION"),
        forge_core::dataset::corpus::SCHEMA_VERSION,
        forge_core::text::templates::TemplatePack::builtin().version
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::msg(Category::Usage, "--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::msg(Category::Internal, e.to_string()))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Generate { config, out } => commands::generate(&config, &out, seed),
        Command::Augment { plan, input, out } => commands::augment(&plan, &input, &out, seed),
        Command::Build { config, out } => commands::build(&config, &out, seed),
        Command::Infer {
            corpus,
            endpoint,
            out,
            log,
        } => commands::infer(&corpus.corpus, &corpus.split, &endpoint, &out, log),
        Command::Eval {
            corpus,
            preds,
            report,
            penalize_unparseable,
        } => commands::eval(&corpus.corpus, &corpus.split, &preds, report, penalize_unparseable),
        Command::FormatReport { corpus, preds, json } => {
            commands::format_report(&corpus.corpus, &corpus.split, preds.as_deref(), json.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.category.exit_code())
        }
    }
}
