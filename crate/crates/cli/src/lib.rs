//! `prsum` command line: each subcommand is one pipeline stage reading and
//! writing plain files, so stages can be re-run independently.

mod commands;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "prsum", version, about = "Build, summarize and score pull-request description corpora")]
pub struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Source sequence length cap in word tokens.
    #[arg(long, default_value_t = 512)]
    pub source_max_tokens: usize,
    /// Target sequence length cap in word tokens.
    #[arg(long, default_value_t = 50)]
    pub target_max_tokens: usize,
    /// Keep full-length sequences.
    #[arg(long)]
    pub no_truncation: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl merged PRs of the listed repositories into a raw JSONL corpus.
    Ingest {
        /// File with one `owner/name [merged_pr_count]` per line.
        #[arg(long)]
        repos: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value = prsum_core::github::DEFAULT_API_URL)]
        base_url: String,
        /// Pages of 100 closed PRs to read per repository.
        #[arg(long, default_value_t = 10)]
        page_limit: usize,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Longest rate-limit wait before giving up with a resume cursor.
        #[arg(long, default_value_t = 3600)]
        max_rate_wait_secs: u64,
        #[arg(long, env = "GITHUB_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
    /// Clean a raw corpus and drop records that cannot be used.
    Preprocess {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        #[arg(long, short)]
        output: PathBuf,
        /// Report of dropped records; defaults to `<output>.flagged.json`.
        #[arg(long)]
        flagged: Option<PathBuf>,
        /// JSON file overriding cleaning switches.
        #[arg(long)]
        cleaning: Option<PathBuf>,
    },
    /// Length statistics of source and target sequences as JSON.
    Stats {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        #[arg(long, default_value_t = 50)]
        bucket_width: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Seeded shuffle into train/validation/test JSONL files.
    Split {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        validation: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
    },
    /// Extractive LexRank descriptions written as predictions.csv.
    Baseline {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Summary length cap in word tokens.
        #[arg(long, default_value_t = 50)]
        summary_tokens: usize,
        #[arg(long, default_value_t = 0.85)]
        damping: f64,
        /// Similarities below this are dropped from the sentence graph.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Descriptions from a generation backend written as predictions.csv.
    Generate {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, env = "PRSUM_BACKEND_URL")]
        backend: String,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long, default_value_t = 2)]
        retries: usize,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = prsum_core::backend::DEFAULT_MAX_TOKENS)]
        max_tokens: usize,
        #[arg(long, default_value = prsum_core::backend::DEFAULT_PREFIX)]
        prefix: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// ROUGE-1/2/L of a predictions.csv.
    Score {
        #[arg(long, short)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Row label in text output; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
        /// Comma-separated subset of rouge1, rouge2, rougeL.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<prsum_core::RougeVariant>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Percent gains of one JSON score report over another.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        challenger: PathBuf,
        #[arg(long)]
        baseline_name: Option<String>,
        #[arg(long)]
        challenger_name: Option<String>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Serve the echo backend until killed.
    MockBackend {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Delay before each generate response.
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

/// Parses `argv` and runs one subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("prsum: {e}");
            e.exit_code()
        }
    }
}
