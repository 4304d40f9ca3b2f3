//! Canonical PR corpus format: JSON lines on disk, with a CSV alternative.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{
    build_source_sequence, build_target_sequence, CleaningConfig, SequenceBudget,
};

/// Literal separator used by the list columns of the CSV format.
pub const CM_SEP: &str = "<cm-sep>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record on line {line} has an empty id")]
    EmptyId { line: u64 },
    #[error("record {id:?} cannot be written as CSV: {reason}")]
    Unrepresentable { id: String, reason: &'static str },
    #[error("cannot split {0} records: at least 3 are required")]
    TooFewRecords(usize),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios((f64, f64, f64)),
    #[error("record {0:?} has no commit messages")]
    NoCommits(String),
    #[error("cannot compute statistics of an empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Picks the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// One pull request: its reference description and the text it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PullRequestRecord {
    pub id: String,
    pub description: String,
    pub commit_messages: Vec<String>,
    pub code_comments: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CommitLine {
    message: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    commits: Vec<CommitLine>,
    #[serde(default)]
    code_comments: Vec<String>,
}

impl From<RecordLine> for PullRequestRecord {
    fn from(line: RecordLine) -> Self {
        Self {
            id: line.id,
            description: line.description,
            commit_messages: line.commits.into_iter().map(|c| c.message).collect(),
            code_comments: line.code_comments,
        }
    }
}

impl From<&PullRequestRecord> for RecordLine {
    fn from(r: &PullRequestRecord) -> Self {
        Self {
            id: r.id.clone(),
            description: r.description.clone(),
            commits: r
                .commit_messages
                .iter()
                .map(|m| CommitLine { message: m.clone() })
                .collect(),
            code_comments: r.code_comments.clone(),
        }
    }
}

impl PullRequestRecord {
    /// Encodes the record as one canonical JSONL line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordLine::from(self)).expect("record serializes")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a corpus, preserving file order. Ids must be non-empty and unique.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<PullRequestRecord>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl(path, BufReader::new(file))?,
        CorpusFormat::Csv => read_csv(path, file)?,
    };
    let mut seen = HashSet::new();
    for (id, line) in records.iter().map(|(r, l)| (&r.id, *l)) {
        if id.is_empty() {
            return Err(CorpusError::EmptyId { line });
        }
        if !seen.insert(id.as_str()) {
            return Err(CorpusError::DuplicateId(id.clone()));
        }
    }
    Ok(records.into_iter().map(|(r, _)| r).collect())
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<(PullRequestRecord, u64)>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        out.push((parsed.into(), line_no));
    }
    Ok(out)
}

fn split_list(field: &str) -> Vec<String> {
    if field.is_empty() {
        Vec::new()
    } else {
        field.split(CM_SEP).map(str::to_string).collect()
    }
}

fn read_csv(path: &Path, file: File) -> Result<Vec<(PullRequestRecord, u64)>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let malformed = |line: u64, message: String| CorpusError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let expected = ["id", "description", "commits", "code_comments"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), headers),
        ));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        out.push((
            PullRequestRecord {
                id: row[0].to_string(),
                description: row[1].to_string(),
                commit_messages: split_list(&row[2]),
                code_comments: split_list(&row[3]),
            },
            line,
        ));
    }
    Ok(out)
}

/// Writes a corpus so that [`load_corpus`] returns it unchanged.
pub fn save_corpus(records: &[PullRequestRecord], path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    if format == CorpusFormat::Csv {
        check_csv_representable(records)?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    match format {
        CorpusFormat::Jsonl => {
            for record in records {
                writeln!(writer, "{}", record.to_json_line()).map_err(io_err(path))?;
            }
        }
        CorpusFormat::Csv => {
            let mut csv_writer = csv::Writer::from_writer(&mut writer);
            let wrap = |e: csv::Error| CorpusError::Io {
                path: path.to_path_buf(),
                source: e.into(),
            };
            csv_writer
                .write_record(["id", "description", "commits", "code_comments"])
                .map_err(wrap)?;
            for r in records {
                let commits = r.commit_messages.join(CM_SEP);
                let comments = r.code_comments.join(CM_SEP);
                csv_writer
                    .write_record([r.id.as_str(), &r.description, &commits, &comments])
                    .map_err(wrap)?;
            }
            csv_writer.flush().map_err(io_err(path))?;
        }
    }
    writer.flush().map_err(io_err(path))
}

fn check_csv_representable(records: &[PullRequestRecord]) -> Result<(), CorpusError> {
    for r in records {
        let lists = r.commit_messages.iter().chain(&r.code_comments);
        for item in lists {
            let reason = if item.is_empty() {
                "list items must be non-empty"
            } else if item.contains(CM_SEP) {
                "list items must not contain the <cm-sep> separator"
            } else {
                continue;
            };
            return Err(CorpusError::Unrepresentable {
                id: r.id.clone(),
                reason,
            });
        }
    }
    Ok(())
}

/// Train/validation/test partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<PullRequestRecord>,
    pub validation: Vec<PullRequestRecord>,
    pub test: Vec<PullRequestRecord>,
    pub seed: u64,
}

/// Standard 80/10/10 ratios.
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Split sizes for `n` records: train takes `floor(r_train * n)`, validation
/// the floor of its share of the remainder, test whatever is left.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize), CorpusError> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !r.is_finite() || *r < 0.0) || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    if n < 3 {
        return Err(CorpusError::TooFewRecords(n));
    }
    // The epsilon absorbs products such as 0.8 * 15 landing just under an integer.
    let train = ((tr * n as f64) + 1e-9).floor() as usize;
    let train = train.min(n);
    let rest = n - train;
    let validation = if va + te > 0.0 {
        ((va / (va + te) * rest as f64) + 1e-9).floor() as usize
    } else {
        0
    };
    Ok((train, validation, rest - validation))
}

/// Shuffles with a ChaCha8 stream seeded by `seed`, then slices by [`split_sizes`].
pub fn split_corpus(
    records: &[PullRequestRecord],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let (n_train, n_val, _) = split_sizes(records.len(), ratios)?;
    if let Some(r) = records.iter().find(|r| r.commit_messages.is_empty()) {
        return Err(CorpusError::NoCommits(r.id.clone()));
    }
    let mut shuffled = records.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(n_train + n_val);
    let validation = shuffled.split_off(n_train);
    Ok(CorpusSplit {
        train: shuffled,
        validation,
        test,
        seed,
    })
}

/// Length statistics of source ("article") and target ("abstract") sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_records: usize,
    pub avg_article_len: f64,
    pub avg_abstract_len: f64,
    pub bucket_width: usize,
    /// Bucket lower bound → record count.
    pub article_len_histogram: BTreeMap<usize, usize>,
    pub abstract_len_histogram: BTreeMap<usize, usize>,
}

/// Average and histogram of token lengths, measured before truncation.
pub fn compute_stats(
    records: &[PullRequestRecord],
    cleaning: &CleaningConfig,
    bucket_width: usize,
) -> Result<DatasetStats, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let bucket_width = bucket_width.max(1);
    let untruncated = SequenceBudget {
        truncation_enabled: false,
        ..SequenceBudget::default()
    };
    let mut article_hist = BTreeMap::new();
    let mut abstract_hist = BTreeMap::new();
    let (mut article_total, mut abstract_total) = (0usize, 0usize);
    for record in records {
        let article = build_source_sequence(record, cleaning, &untruncated).len();
        let abstract_len = build_target_sequence(record, cleaning, &untruncated).len();
        article_total += article;
        abstract_total += abstract_len;
        *article_hist.entry(article / bucket_width * bucket_width).or_insert(0) += 1;
        *abstract_hist.entry(abstract_len / bucket_width * bucket_width).or_insert(0) += 1;
    }
    let n = records.len() as f64;
    Ok(DatasetStats {
        n_records: records.len(),
        avg_article_len: article_total as f64 / n,
        avg_abstract_len: abstract_total as f64 / n,
        bucket_width,
        article_len_histogram: article_hist,
        abstract_len_histogram: abstract_hist,
    })
}
