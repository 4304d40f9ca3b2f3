//! Cleaning rules for commit messages, code comments and PR descriptions,
//! and construction of the budgeted source and target sequences.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{PullRequestRecord, CM_SEP};
use crate::text::{tokenize_words, TokenKind, TokenSequence};

/// Which cleaning rules to apply. Every rule is on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub strip_html: bool,
    pub strip_urls: bool,
    pub strip_issue_refs: bool,
    pub strip_signatures: bool,
    pub strip_mentions: bool,
    pub strip_md_headlines: bool,
    pub lowercase: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            strip_html: true,
            strip_urls: true,
            strip_issue_refs: true,
            strip_signatures: true,
            strip_mentions: true,
            strip_md_headlines: true,
            lowercase: true,
        }
    }
}

/// Token budgets for the model-facing sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceBudget {
    pub source_max_tokens: usize,
    pub target_max_tokens: usize,
    pub truncation_enabled: bool,
}

impl Default for SequenceBudget {
    fn default() -> Self {
        Self {
            source_max_tokens: 512,
            target_max_tokens: 50,
            truncation_enabled: true,
        }
    }
}

impl SequenceBudget {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.source_max_tokens == 0 || self.target_max_tokens == 0 {
            Err("token budgets must be positive")
        } else {
            Ok(())
        }
    }
}

static HTML_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->|</?[A-Za-z][^<>]*>").unwrap());
static ISSUE_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[0-9]+").unwrap());
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[\w.+-]+@[\w-]+(\.[\w-]+)+$").unwrap());

const SIGNATURES: [&str; 3] = ["reviewed-by", "signed-off-by", "co-authored-by"];

fn is_url(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    ["http://", "https://", "www."]
        .iter()
        .any(|p| lower.starts_with(p))
}

fn is_headline_marker(token: &str) -> bool {
    (1..=6).contains(&token.len()) && token.bytes().all(|b| b == b'#')
}

fn is_signature(token: &str) -> bool {
    let head = token.trim_end_matches(':');
    SIGNATURES.iter().any(|s| head.eq_ignore_ascii_case(s))
}

fn ends_sentence(s: &str) -> bool {
    s.ends_with(['.', '!', '?'])
}

/// Joins segments with a sentence boundary (". "), or a bare space when the
/// previous segment already ends in a terminator.
pub fn join_with_boundary<S: AsRef<str>>(segments: &[S]) -> String {
    let mut out = String::new();
    for seg in segments {
        let seg = seg.as_ref();
        if !out.is_empty() {
            out.push_str(if ends_sentence(&out) { " " } else { ". " });
        }
        out.push_str(seg);
    }
    out
}

/// Splits on every literal `<cm-sep>`, trimming segments and dropping empty ones.
pub fn replace_separator(joined: &str) -> Vec<String> {
    joined
        .split(CM_SEP)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn clean_line(line: &str, config: &CleaningConfig) -> Option<String> {
    let mut tokens: Vec<&str> = line
        .split_whitespace()
        .filter(|t| !(config.strip_urls && is_url(t)))
        .filter(|t| !(config.strip_mentions && (t.starts_with('@') || EMAIL.is_match(t))))
        .collect();
    if config.strip_md_headlines {
        let markers = tokens.iter().take_while(|t| is_headline_marker(t)).count();
        tokens.drain(..markers);
    }
    let mut joined = tokens.join(" ");
    if config.strip_issue_refs {
        joined = ISSUE_REF.replace_all(&joined, "").into_owned();
    }
    if config.strip_signatures {
        let first = joined.split_whitespace().next();
        if first.is_some_and(is_signature) {
            return None;
        }
    }
    Some(joined)
}

fn clean_pass(raw: &str, config: &CleaningConfig) -> String {
    let mut text = join_with_boundary(&replace_separator(raw));
    if config.strip_html {
        loop {
            let next = HTML_TAG.replace_all(&text, " ");
            if next == text {
                break;
            }
            text = next.into_owned();
        }
    }
    let lines: Vec<String> = text
        .lines()
        .filter_map(|line| clean_line(line, config))
        .collect();
    let mut out = lines
        .iter()
        .flat_map(|l| l.split_whitespace())
        .collect::<Vec<_>>()
        .join(" ");
    if config.lowercase {
        out = out.to_lowercase();
    }
    out
}

/// Applies the configured cleaning rules and collapses whitespace.
///
/// Rules are re-applied until the text stops changing, so the result is a
/// fixed point: cleaning cleaned text is a no-op. Each pass shortens the
/// text or leaves it unchanged, so the loop terminates.
pub fn clean_text(raw: &str, config: &CleaningConfig) -> String {
    let mut current = clean_pass(raw, config);
    loop {
        let next = clean_pass(&current, config);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// A built sequence, flagged when cleaning left nothing to tokenize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltSequence {
    pub sequence: TokenSequence,
    pub flagged_empty: bool,
}

impl BuiltSequence {
    fn from_text(text: &str, kind: TokenKind, max: usize, truncate: bool) -> Self {
        let mut sequence = tokenize_words(text, kind);
        if truncate {
            sequence.truncate(max);
        }
        Self {
            flagged_empty: sequence.is_empty(),
            sequence,
        }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.sequence.to_text()
    }
}

/// Cleaned commit messages, then cleaned code comments, in order.
pub fn source_segments(record: &PullRequestRecord, config: &CleaningConfig) -> Vec<String> {
    record
        .commit_messages
        .iter()
        .chain(&record.code_comments)
        .map(|s| clean_text(s, config))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Model input: every commit message then every code comment, cleaned,
/// joined at sentence boundaries, tokenized and head-truncated.
pub fn build_source_sequence(
    record: &PullRequestRecord,
    config: &CleaningConfig,
    budget: &SequenceBudget,
) -> BuiltSequence {
    let text = join_with_boundary(&source_segments(record, config));
    BuiltSequence::from_text(
        &text,
        TokenKind::Source,
        budget.source_max_tokens,
        budget.truncation_enabled,
    )
}

/// Model target: the cleaned description, tokenized and head-truncated.
pub fn build_target_sequence(
    record: &PullRequestRecord,
    config: &CleaningConfig,
    budget: &SequenceBudget,
) -> BuiltSequence {
    let text = clean_text(&record.description, config);
    BuiltSequence::from_text(
        &text,
        TokenKind::Target,
        budget.target_max_tokens,
        budget.truncation_enabled,
    )
}

/// Why a record was dropped during corpus preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    NoCommitMessages,
    EmptySource,
    EmptyDescription,
}

/// Cleans every text field of a record. Returns the reason when the record
/// cannot be used for training or evaluation.
pub fn clean_record(
    record: &PullRequestRecord,
    config: &CleaningConfig,
) -> Result<PullRequestRecord, FlagReason> {
    let clean_list = |items: &[String]| -> Vec<String> {
        items
            .iter()
            .flat_map(|s| replace_separator(s))
            .map(|s| clean_text(&s, config))
            .filter(|s| !s.is_empty())
            .collect()
    };
    let cleaned = PullRequestRecord {
        id: record.id.clone(),
        description: clean_text(&record.description, config),
        commit_messages: clean_list(&record.commit_messages),
        code_comments: clean_list(&record.code_comments),
    };
    if cleaned.commit_messages.is_empty() {
        if cleaned.code_comments.is_empty() {
            return Err(FlagReason::EmptySource);
        }
        return Err(FlagReason::NoCommitMessages);
    }
    if cleaned.description.is_empty() {
        return Err(FlagReason::EmptyDescription);
    }
    Ok(cleaned)
}
