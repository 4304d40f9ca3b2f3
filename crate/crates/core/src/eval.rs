//! Corpus-level ROUGE over `predictions.csv` files and approach-vs-approach
//! comparison tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{clean_text, CleaningConfig};
use crate::rouge::{score_variant, RougeConfig, RougeError, RougeScore, RougeVariant};
use crate::text::{tokenize_words, TokenKind, TokenSequence};

pub const PREDICTIONS_HEADER: [&str; 3] = ["id", "generated", "reference"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `id,generated,reference`, found `{found}`")]
    MissingHeader { path: PathBuf, found: String },
    #[error("{path}:{line}: unbalanced quotes (quoted field opened here is never closed)")]
    UnbalancedQuotes { path: PathBuf, line: u64 },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("duplicate prediction id {0:?}")]
    DuplicateId(String),
    #[error("no scorable records")]
    NothingToScore,
    #[error("reports cover different ROUGE variants")]
    VariantMismatch,
    #[error(transparent)]
    Rouge(#[from] RougeError),
    #[error("cannot parse comparison table: {0}")]
    TableFormat(String),
}

/// One row of `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub generated: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionFile {
    /// Rows with a non-empty reference.
    pub records: Vec<PredictionRecord>,
    /// Rows dropped because their reference is empty.
    pub n_skipped: usize,
}

/// Line on which an unterminated quoted field starts, if any.
fn unbalanced_quote_line(text: &str) -> Option<u64> {
    let mut line = 1u64;
    let mut opened_at = None;
    let mut field_start = true;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if opened_at.is_some() {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                } else {
                    opened_at = None;
                    field_start = false;
                }
            }
        } else {
            match c {
                '"' if field_start => opened_at = Some(line),
                ',' | '\n' | '\r' => field_start = true,
                _ => field_start = false,
            }
        }
        if c == '\n' {
            line += 1;
        }
    }
    opened_at
}

pub fn load_predictions(path: &Path) -> Result<PredictionFile, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_predictions(&text, path)
}

/// Parses `predictions.csv` content; `path` is only used in error messages.
pub fn parse_predictions(text: &str, path: &Path) -> Result<PredictionFile, EvalError> {
    if let Some(line) = unbalanced_quote_line(text) {
        return Err(EvalError::UnbalancedQuotes {
            path: path.to_path_buf(),
            line,
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| EvalError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(PREDICTIONS_HEADER) {
        return Err(EvalError::MissingHeader {
            path: path.to_path_buf(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut file = PredictionFile::default();
    let mut ids = HashSet::new();
    for row in reader.deserialize::<PredictionRecord>() {
        let record = row.map_err(|e| EvalError::Malformed {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !ids.insert(record.id.clone()) {
            return Err(EvalError::DuplicateId(record.id));
        }
        if record.reference.trim().is_empty() {
            file.n_skipped += 1;
        } else {
            file.records.push(record);
        }
    }
    Ok(file)
}

/// Writes `predictions.csv` with RFC-4180 quoting.
pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), EvalError> {
    let io = |source: std::io::Error| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io(e.into()))?;
    writer.write_record(PREDICTIONS_HEADER).map_err(|e| io(e.into()))?;
    for r in records {
        writer.serialize(r).map_err(|e| io(e.into()))?;
    }
    writer.flush().map_err(io)
}

/// Macro-averaged scores per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_scored: usize,
    pub n_skipped: usize,
    pub scores: BTreeMap<RougeVariant, RougeScore>,
}

/// Word tokens used for scoring: cleaned, lowercased, punctuation dropped.
pub fn scoring_tokens(text: &str, kind: TokenKind) -> TokenSequence {
    let cleaned = clean_text(text, &CleaningConfig::default());
    tokenize_words(&cleaned, kind).without_punctuation()
}

fn score_pair(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    config: &RougeConfig,
) -> Result<BTreeMap<RougeVariant, RougeScore>, RougeError> {
    config
        .variants
        .iter()
        .map(|&v| {
            let score = if candidate.is_empty() {
                RougeScore::ZERO
            } else {
                match score_variant(v, candidate, reference, config) {
                    // A reference shorter than n has no n-grams to recall.
                    Err(RougeError::ReferenceTooShort { .. }) => RougeScore::ZERO,
                    other => other?,
                }
            };
            Ok((v, score))
        })
        .collect()
}

/// Scores every record, then averages recall, precision and F1 per variant.
///
/// Records whose reference has no word tokens after cleaning are added to
/// the skipped count. An empty candidate scores zero.
pub fn score_corpus(file: &PredictionFile, config: &RougeConfig) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let per_record: Vec<Option<BTreeMap<RougeVariant, RougeScore>>> = file
        .records
        .par_iter()
        .map(|r| {
            let reference = scoring_tokens(&r.reference, TokenKind::Reference);
            if reference.is_empty() {
                return Ok(None);
            }
            let candidate = scoring_tokens(&r.generated, TokenKind::Candidate);
            score_pair(&candidate, &reference, config).map(Some)
        })
        .collect::<Result<_, RougeError>>()?;
    let scored: Vec<_> = per_record.iter().flatten().collect();
    if scored.is_empty() {
        return Err(EvalError::NothingToScore);
    }
    let n = scored.len() as f64;
    let scores = config
        .variants
        .iter()
        .map(|&v| {
            let (mut r, mut p, mut f) = (0.0, 0.0, 0.0);
            for s in &scored {
                r += s[&v].recall;
                p += s[&v].precision;
                f += s[&v].f1;
            }
            (
                v,
                RougeScore {
                    recall: r / n,
                    precision: p / n,
                    f1: f / n,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        n_scored: scored.len(),
        n_skipped: file.n_skipped + (per_record.len() - scored.len()),
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Recall,
    Precision,
    F1,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Recall, Measure::Precision, Measure::F1];

    pub fn of(self, s: &RougeScore) -> f64 {
        match self {
            Measure::Recall => s.recall,
            Measure::Precision => s.precision,
            Measure::F1 => s.f1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Measure::Recall => "Recall",
            Measure::Precision => "Precision",
            Measure::F1 => "F1",
        }
    }
}

/// One percent-gain cell; `None` when the baseline is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCell {
    pub variant: RougeVariant,
    pub measure: Measure,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline_name: String,
    pub challenger_name: String,
    pub baseline: EvalReport,
    pub challenger: EvalReport,
    pub gains: Vec<GainCell>,
}

fn same_variants(a: &EvalReport, b: &EvalReport) -> Result<(), EvalError> {
    if a.scores.keys().eq(b.scores.keys()) {
        Ok(())
    } else {
        Err(EvalError::VariantMismatch)
    }
}

/// Percent gain `(challenger − baseline) / baseline × 100` for every cell.
pub fn compare_approaches(
    baseline_name: &str,
    baseline: &EvalReport,
    challenger_name: &str,
    challenger: &EvalReport,
) -> Result<ComparisonTable, EvalError> {
    same_variants(baseline, challenger)?;
    let mut gains = Vec::new();
    for (&variant, base) in &baseline.scores {
        let chal = &challenger.scores[&variant];
        for measure in Measure::ALL {
            let (b, c) = (measure.of(base), measure.of(chal));
            gains.push(GainCell {
                variant,
                measure,
                percent: (b > 0.0).then(|| (c - b) / b * 100.0),
            });
        }
    }
    Ok(ComparisonTable {
        baseline_name: baseline_name.to_string(),
        challenger_name: challenger_name.to_string(),
        baseline: baseline.clone(),
        challenger: challenger.clone(),
        gains,
    })
}

/// Mean over variants of `challenger − baseline`, on the ×100 scale, for
/// recall, precision and F1.
pub fn average_absolute_gains(baseline: &EvalReport, challenger: &EvalReport) -> Result<(f64, f64, f64), EvalError> {
    same_variants(baseline, challenger)?;
    if baseline.scores.is_empty() {
        return Err(EvalError::VariantMismatch);
    }
    let n = baseline.scores.len() as f64;
    let mean_delta = |m: Measure| {
        baseline
            .scores
            .iter()
            .map(|(v, b)| (m.of(&challenger.scores[v]) - m.of(b)) * 100.0)
            .sum::<f64>()
            / n
    };
    Ok((
        mean_delta(Measure::Recall),
        mean_delta(Measure::Precision),
        mean_delta(Measure::F1),
    ))
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn gain_text(g: Option<f64>) -> String {
    match g {
        Some(p) => format!("{p:+.2}%"),
        None => "undefined".to_string(),
    }
}

const NAME_WIDTH: usize = 24;

fn push_row(out: &mut String, name: &str, cells: &[String], widths: &[usize]) {
    let _ = write!(out, "{name:<NAME_WIDTH$}");
    for (c, w) in cells.iter().zip(widths) {
        let _ = write!(out, " | {c:>w$}");
    }
    out.push('\n');
}

fn widths(header: &[String]) -> Vec<usize> {
    header.iter().map(|h| h.len().max(9)).collect()
}

/// Renders a report as an aligned text table on the ×100 scale.
pub fn render_report(name: &str, report: &EvalReport) -> String {
    let mut out = String::new();
    let header: Vec<String> = report
        .scores
        .keys()
        .flat_map(|v| Measure::ALL.map(|m| format!("{}/{}", v.label(), m.label())))
        .collect();
    let w = widths(&header);
    push_row(&mut out, "Approach", &header, &w);
    let cells: Vec<String> = report
        .scores
        .values()
        .flat_map(|s| Measure::ALL.map(|m| pct(m.of(s))))
        .collect();
    push_row(&mut out, name, &cells, &w);
    let _ = writeln!(out, "scored: {}  skipped: {}", report.n_scored, report.n_skipped);
    out
}

impl ComparisonTable {
    /// Aligned text with a baseline row, a challenger row, the percent-gain
    /// row and the average absolute gains.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .baseline
            .scores
            .keys()
            .flat_map(|v| Measure::ALL.map(|m| format!("{}/{}", v.label(), m.label())))
            .collect();
        let w = widths(&header);
        push_row(&mut out, "Approach", &header, &w);
        for (name, report) in [
            (&self.baseline_name, &self.baseline),
            (&self.challenger_name, &self.challenger),
        ] {
            let cells: Vec<String> = report
                .scores
                .values()
                .flat_map(|s| Measure::ALL.map(|m| pct(m.of(s))))
                .collect();
            push_row(&mut out, name, &cells, &w);
        }
        let gains: Vec<String> = self.gains.iter().map(|g| gain_text(g.percent)).collect();
        push_row(
            &mut out,
            &format!("{} vs {}", self.baseline_name, self.challenger_name),
            &gains,
            &w,
        );
        if let Ok((r, p, f)) = average_absolute_gains(&self.baseline, &self.challenger) {
            let _ = writeln!(out, "average absolute gain: recall {r:+.2}  precision {p:+.2}  f1 {f:+.2}");
        }
        out
    }
}

/// Numbers recovered from a rendered comparison table, all on the ×100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub columns: Vec<(RougeVariant, Measure)>,
    pub baseline: (String, Vec<f64>),
    pub challenger: (String, Vec<f64>),
    pub gains: Vec<Option<f64>>,
}

fn split_row(line: &str) -> (String, Vec<String>) {
    let mut parts = line.split(" | ");
    let name = parts.next().unwrap_or_default().trim().to_string();
    (name, parts.map(|p| p.trim().to_string()).collect())
}

/// Inverse of [`ComparisonTable::render_text`] for the four table rows.
pub fn parse_comparison_text(text: &str) -> Result<ParsedTable, EvalError> {
    let bad = |m: String| EvalError::TableFormat(m);
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 4 {
        return Err(bad(format!("expected at least 4 lines, found {}", lines.len())));
    }
    let (_, header) = split_row(lines[0]);
    let columns = header
        .iter()
        .map(|h| {
            let (v, m) = h.split_once('/').ok_or_else(|| bad(format!("bad column {h:?}")))?;
            let variant = v.parse::<RougeVariant>().map_err(bad)?;
            let measure = Measure::ALL
                .into_iter()
                .find(|x| x.label() == m)
                .ok_or_else(|| bad(format!("bad measure {m:?}")))?;
            Ok((variant, measure))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let numbers = |line: &str| -> Result<(String, Vec<f64>), EvalError> {
        let (name, cells) = split_row(line);
        let values = cells
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| bad(format!("{c:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((name, values))
    };
    let baseline = numbers(lines[1])?;
    let challenger = numbers(lines[2])?;
    let (_, gain_cells) = split_row(lines[3]);
    let gains = gain_cells
        .iter()
        .map(|c| {
            if c == "undefined" {
                return Ok(None);
            }
            c.trim_end_matches('%')
                .parse::<f64>()
                .map(Some)
                .map_err(|e| bad(format!("{c:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for row in [&baseline.1, &challenger.1] {
        if row.len() != columns.len() {
            return Err(bad("row width does not match header".into()));
        }
    }
    if gains.len() != columns.len() {
        return Err(bad("gain row width does not match header".into()));
    }
    Ok(ParsedTable {
        columns,
        baseline,
        challenger,
        gains,
    })
}
