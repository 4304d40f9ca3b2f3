use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use prsum_core::backend::mock::{MockBackend, MockConfig};
use prsum_core::backend::{BackendClient, BatchOptions, GenerationRequest};
use prsum_core::corpus::{self, load_corpus, save_corpus, split_corpus};
use prsum_core::eval::{self, load_predictions, render_report, score_corpus, write_predictions};
use prsum_core::github::{self, GithubClient, GithubConfig};
use prsum_core::lexrank::summarize_lexrank;
use prsum_core::preprocess::{build_source_sequence, build_target_sequence, clean_record, FlagReason};
use prsum_core::text::split_sentences;
use prsum_core::{
    CleaningConfig, CorpusFormat, EvalReport, LexRankConfig, PredictionRecord, PullRequestRecord, RougeConfig,
    SequenceBudget,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{read_to_string, write, CliError};
use crate::{BudgetArgs, Command, InputFormat, OutputFormat};

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest {
            repos,
            output,
            base_url,
            page_limit,
            jobs,
            max_rate_wait_secs,
            token,
        } => ingest(&repos, &output, base_url, page_limit, jobs, max_rate_wait_secs, token),
        Command::Preprocess {
            input,
            input_format,
            output,
            flagged,
            cleaning,
        } => preprocess(&input, input_format, &output, flagged, cleaning),
        Command::Stats {
            input,
            input_format,
            bucket_width,
            output,
        } => stats(&input, input_format, bucket_width, output.as_deref()),
        Command::Split {
            input,
            input_format,
            output_dir,
            seed,
            train,
            validation,
            test,
        } => split(&input, input_format, &output_dir, seed, (train, validation, test)),
        Command::Baseline {
            input,
            output,
            summary_tokens,
            damping,
            threshold,
            jobs,
            budget,
        } => {
            let config = LexRankConfig {
                damping,
                similarity_threshold: threshold,
                summary_token_budget: summary_tokens,
                ..LexRankConfig::default()
            };
            baseline(&input, &output, &config, &sequence_budget(&budget)?, jobs)
        }
        Command::Generate {
            input,
            output,
            backend,
            parallelism,
            retries,
            timeout_ms,
            max_tokens,
            prefix,
            budget,
        } => {
            let client = BackendClient::new(backend, Duration::from_millis(timeout_ms));
            let opts = BatchOptions {
                parallelism,
                retries,
                ..BatchOptions::default()
            };
            generate(&input, &output, &client, &opts, max_tokens, &prefix, &sequence_budget(&budget)?)
        }
        Command::Score {
            predictions,
            format,
            output,
            name,
            variants,
            beta,
            jobs,
        } => {
            let mut config = RougeConfig {
                beta,
                ..RougeConfig::default()
            };
            if !variants.is_empty() {
                config.variants = variants.into_iter().collect();
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            score(&predictions, format, output.as_deref(), name, &config, jobs)
        }
        Command::Compare {
            baseline,
            challenger,
            baseline_name,
            challenger_name,
            format,
            output,
        } => compare(&baseline, &challenger, baseline_name, challenger_name, format, output.as_deref()),
        Command::MockBackend { host, port, delay_ms } => mock_backend(&host, port, delay_ms),
    }
}

fn sequence_budget(args: &BudgetArgs) -> Result<SequenceBudget, CliError> {
    let budget = SequenceBudget {
        source_max_tokens: args.source_max_tokens,
        target_max_tokens: args.target_max_tokens,
        truncation_enabled: !args.no_truncation,
    };
    budget.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(budget)
}

fn corpus_format(path: &Path, flag: Option<InputFormat>) -> CorpusFormat {
    match flag {
        Some(InputFormat::Jsonl) => CorpusFormat::Jsonl,
        Some(InputFormat::Csv) => CorpusFormat::Csv,
        None => CorpusFormat::from_path(path),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

fn ingest(
    repos_file: &PathBuf,
    output: &Path,
    base_url: String,
    page_limit: usize,
    jobs: usize,
    max_rate_wait_secs: u64,
    token: Option<String>,
) -> Result<(), CliError> {
    let repos = github::parse_repo_list(&read_to_string(repos_file)?)?;
    if token.is_none() {
        warn!("{} is not set; unauthenticated requests have a low rate limit", github::TOKEN_ENV);
    }
    let client = GithubClient::new(GithubConfig {
        base_url,
        token,
        max_rate_wait: Duration::from_secs(max_rate_wait_secs),
        sleeper: Arc::new(std::thread::sleep),
        ..GithubConfig::default()
    });
    let report = client.ingest(&repos, page_limit, jobs);
    for (what, e) in &report.failures {
        warn!("skipped {what}: {e}");
    }
    save_corpus(&report.records, output, CorpusFormat::Jsonl)?;
    info!("wrote {} records to {}", report.records.len(), output.display());
    match report.aborted {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct FlaggedRecord {
    id: String,
    reason: FlagReason,
}

#[derive(Serialize)]
struct FlaggedReport {
    n_input: usize,
    n_kept: usize,
    flagged: Vec<FlaggedRecord>,
}

fn preprocess(
    input: &Path,
    input_format: Option<InputFormat>,
    output: &Path,
    flagged: Option<PathBuf>,
    cleaning: Option<PathBuf>,
) -> Result<(), CliError> {
    let config: CleaningConfig = match cleaning {
        Some(path) => serde_json::from_str(&read_to_string(&path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => CleaningConfig::default(),
    };
    let records = load_corpus(input, corpus_format(input, input_format))?;
    let mut kept = Vec::new();
    let mut report = FlaggedReport {
        n_input: records.len(),
        n_kept: 0,
        flagged: Vec::new(),
    };
    for record in &records {
        match clean_record(record, &config) {
            Ok(clean) => kept.push(clean),
            Err(reason) => report.flagged.push(FlaggedRecord {
                id: record.id.clone(),
                reason,
            }),
        }
    }
    report.n_kept = kept.len();
    save_corpus(&kept, output, CorpusFormat::Jsonl)?;
    let flagged = flagged.unwrap_or_else(|| {
        let mut name = output.as_os_str().to_owned();
        name.push(".flagged.json");
        PathBuf::from(name)
    });
    write(&flagged, to_json(&report))?;
    eprintln!(
        "kept {} of {} records; {} flagged ({})",
        report.n_kept,
        report.n_input,
        report.flagged.len(),
        flagged.display()
    );
    Ok(())
}

fn stats(
    input: &Path,
    input_format: Option<InputFormat>,
    bucket_width: usize,
    output: Option<&Path>,
) -> Result<(), CliError> {
    if bucket_width == 0 {
        return Err(CliError::Usage("--bucket-width must be positive".into()));
    }
    let records = load_corpus(input, corpus_format(input, input_format))?;
    let stats = corpus::compute_stats(&records, &CleaningConfig::default(), bucket_width)?;
    emit(output, &to_json(&stats))
}

fn split(
    input: &Path,
    input_format: Option<InputFormat>,
    output_dir: &Path,
    seed: u64,
    ratios: (f64, f64, f64),
) -> Result<(), CliError> {
    let records = load_corpus(input, corpus_format(input, input_format))?;
    let split = split_corpus(&records, ratios, seed).map_err(|e| match e {
        corpus::CorpusError::BadRatios(_) => CliError::Usage(e.to_string()),
        other => other.into(),
    })?;
    std::fs::create_dir_all(output_dir).map_err(|e| CliError::io(output_dir, e))?;
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        save_corpus(part, &output_dir.join(format!("{name}.jsonl")), CorpusFormat::Jsonl)?;
    }
    eprintln!(
        "seed {seed}: train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}

/// LexRank over the sentences of the truncated source sequence; the
/// reference is the truncated target sequence.
pub fn baseline_prediction(
    record: &PullRequestRecord,
    config: &LexRankConfig,
    budget: &SequenceBudget,
) -> PredictionRecord {
    let cleaning = CleaningConfig::default();
    let source = build_source_sequence(record, &cleaning, budget).to_text();
    let generated = match summarize_lexrank(&split_sentences(&source), config) {
        Ok(summary) => {
            if !summary.converged {
                warn!("{}: centrality did not converge", record.id);
            }
            summary.text
        }
        Err(e) => {
            warn!("{}: no baseline summary ({e})", record.id);
            String::new()
        }
    };
    PredictionRecord {
        id: record.id.clone(),
        generated,
        reference: build_target_sequence(record, &cleaning, budget).to_text(),
    }
}

fn baseline(
    input: &Path,
    output: &Path,
    config: &LexRankConfig,
    budget: &SequenceBudget,
    jobs: usize,
) -> Result<(), CliError> {
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let records = load_corpus(input, CorpusFormat::from_path(input))?;
    let rows: Vec<PredictionRecord> =
        with_jobs(jobs, || records.par_iter().map(|r| baseline_prediction(r, config, budget)).collect())?;
    write_predictions(output, &rows)?;
    eprintln!("wrote {} predictions to {}", rows.len(), output.display());
    Ok(())
}

fn generate(
    input: &Path,
    output: &Path,
    client: &BackendClient,
    opts: &BatchOptions,
    max_tokens: usize,
    prefix: &str,
    budget: &SequenceBudget,
) -> Result<(), CliError> {
    let records = load_corpus(input, CorpusFormat::from_path(input))?;
    let health = client.health_check()?;
    if !health.ready {
        return Err(CliError::Network(format!("backend {} ({}) is not ready", client.endpoint(), health.name)));
    }
    info!("backend {} ready", health.name);
    let cleaning = CleaningConfig::default();
    let requests: Vec<GenerationRequest> = records
        .iter()
        .map(|r| GenerationRequest {
            id: r.id.clone(),
            source: build_source_sequence(r, &cleaning, budget).to_text(),
            max_tokens,
            prefix: prefix.to_string(),
        })
        .collect();
    let outcome = client.generate_batch(&requests, opts);
    let mut responses = outcome.responses.into_iter().peekable();
    let mut rows = Vec::new();
    for record in &records {
        if responses.peek().is_some_and(|r| r.id == record.id) {
            let resp = responses.next().unwrap();
            rows.push(PredictionRecord {
                id: record.id.clone(),
                generated: resp.summary,
                reference: build_target_sequence(record, &cleaning, budget).to_text(),
            });
        }
    }
    write_predictions(output, &rows)?;
    eprintln!("wrote {} predictions to {}", rows.len(), output.display());
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("failed {} after {} attempts: {}", f.id, f.attempts, f.error);
    }
    Err(CliError::Network(format!("{} of {} requests failed", outcome.failures.len(), requests.len())))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn score(
    predictions: &Path,
    format: OutputFormat,
    output: Option<&Path>,
    name: Option<String>,
    config: &RougeConfig,
    jobs: usize,
) -> Result<(), CliError> {
    let file = load_predictions(predictions)?;
    let report = with_jobs(jobs, || score_corpus(&file, config))??;
    let text = match format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Text => render_report(&name.unwrap_or_else(|| file_stem(predictions)), &report),
    };
    emit(output, &text)
}

fn load_report(path: &PathBuf) -> Result<EvalReport, CliError> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| CliError::Data(format!("{}: not a score report: {e}", path.display())))
}

#[derive(Serialize)]
struct AverageGain {
    recall: f64,
    precision: f64,
    f1: f64,
}

#[derive(Serialize)]
struct ComparisonJson {
    #[serde(flatten)]
    table: prsum_core::ComparisonTable,
    average_absolute_gain: AverageGain,
}

fn compare(
    baseline: &PathBuf,
    challenger: &PathBuf,
    baseline_name: Option<String>,
    challenger_name: Option<String>,
    format: OutputFormat,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let (b, c) = (load_report(baseline)?, load_report(challenger)?);
    let table = eval::compare_approaches(
        &baseline_name.unwrap_or_else(|| file_stem(baseline)),
        &b,
        &challenger_name.unwrap_or_else(|| file_stem(challenger)),
        &c,
    )?;
    let text = match format {
        OutputFormat::Text => table.render_text(),
        OutputFormat::Json => {
            let (recall, precision, f1) = eval::average_absolute_gains(&b, &c)?;
            to_json(&ComparisonJson {
                table,
                average_absolute_gain: AverageGain { recall, precision, f1 },
            })
        }
    };
    emit(output, &text)
}

fn mock_backend(host: &str, port: u16, delay_ms: u64) -> Result<(), CliError> {
    let config = MockConfig {
        delay: Duration::from_millis(delay_ms),
        ..MockConfig::default()
    };
    let mock = MockBackend::start(&format!("{host}:{port}"), config)
        .map_err(|e| CliError::Network(format!("cannot listen on {host}:{port}: {e}")))?;
    println!("{} listening on {}", prsum_core::backend::mock::MOCK_NAME, mock.url());
    mock.wait();
    Ok(())
}
