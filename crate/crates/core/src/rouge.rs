//! ROUGE-1, ROUGE-2 and ROUGE-L against a single reference.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::TokenSequence;

#[derive(Debug, Error, PartialEq)]
pub enum RougeError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("reference has {len} tokens, fewer than n = {n}")]
    ReferenceTooShort { n: usize, len: usize },
    #[error("ROUGE-L is undefined for an empty {0}")]
    EmptySequence(&'static str),
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
}

impl RougeVariant {
    pub const ALL: [RougeVariant; 3] = [Self::Rouge1, Self::Rouge2, Self::RougeL];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rouge1 => "rouge1",
            Self::Rouge2 => "rouge2",
            Self::RougeL => "rougeL",
        }
    }

    /// Column heading, e.g. `ROUGE-1`.
    pub fn label(self) -> &'static str {
        match self {
            Self::Rouge1 => "ROUGE-1",
            Self::Rouge2 => "ROUGE-2",
            Self::RougeL => "ROUGE-L",
        }
    }
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RougeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "rouge1" | "1" => Ok(Self::Rouge1),
            "rouge2" | "2" => Ok(Self::Rouge2),
            "rougel" | "l" => Ok(Self::RougeL),
            _ => Err(format!("unknown ROUGE variant {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RougeConfig {
    pub beta: f64,
    pub variants: BTreeSet<RougeVariant>,
}

impl Default for RougeConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            variants: RougeVariant::ALL.into_iter().collect(),
        }
    }
}

impl RougeConfig {
    pub fn validate(&self) -> Result<(), RougeError> {
        if self.beta > 0.0 && self.beta.is_finite() {
            Ok(())
        } else {
            Err(RougeError::BadBeta(self.beta))
        }
    }
}

/// Recall, precision and F-measure, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        recall: 0.0,
        precision: 0.0,
        f1: 0.0,
    };

    pub fn from_recall_precision(recall: f64, precision: f64, beta: f64) -> Self {
        Self {
            recall,
            precision,
            f1: f_measure(recall, precision, beta),
        }
    }
}

/// `(1 + β²)·R·P / (R + β²·P)`, zero when the denominator is zero.
pub fn f_measure(recall: f64, precision: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = recall + b2 * precision;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * recall * precision / denom
    }
}

/// Multiset of contiguous n-grams.
pub fn ngrams(seq: &TokenSequence, n: usize) -> Result<HashMap<&[String], usize>, RougeError> {
    if n == 0 {
        return Err(RougeError::ZeroOrder);
    }
    let mut counts = HashMap::new();
    for window in seq.tokens().windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    Ok(counts)
}

fn sorted_windows(seq: &TokenSequence, n: usize) -> Vec<&[String]> {
    let mut windows: Vec<&[String]> = seq.tokens().windows(n).collect();
    windows.sort_unstable();
    windows
}

/// Size of the multiset intersection of two sorted n-gram lists.
fn clipped_matches(a: &[&[String]], b: &[&[String]]) -> usize {
    let (mut i, mut j, mut matched) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                matched += 1;
                i += 1;
                j += 1;
            }
        }
    }
    matched
}

/// ROUGE-N with clipped matching: each candidate n-gram matches at most as
/// many times as it occurs in the reference.
pub fn rouge_n(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    n: usize,
    beta: f64,
) -> Result<RougeScore, RougeError> {
    if n == 0 {
        return Err(RougeError::ZeroOrder);
    }
    if reference.len() < n {
        return Err(RougeError::ReferenceTooShort {
            n,
            len: reference.len(),
        });
    }
    let matched = clipped_matches(&sorted_windows(candidate, n), &sorted_windows(reference, n));
    let ref_total = reference.len() + 1 - n;
    let cand_total = (candidate.len() + 1).saturating_sub(n);
    let recall = matched as f64 / ref_total as f64;
    let precision = if cand_total == 0 {
        0.0
    } else {
        matched as f64 / cand_total as f64
    };
    Ok(RougeScore::from_recall_precision(recall, precision, beta))
}

/// Longest common subsequence length, O(|x|·|y|) time and O(min) space.
pub fn lcs_length(x: &TokenSequence, y: &TokenSequence) -> usize {
    let (long, short) = if x.len() >= y.len() {
        (x.tokens(), y.tokens())
    } else {
        (y.tokens(), x.tokens())
    };
    let mut row = vec![0usize; short.len() + 1];
    for a in long {
        let mut diag = 0;
        for (j, b) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if a == b { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()]
}

/// ROUGE-L: recall over the reference length, precision over the candidate length.
pub fn rouge_l(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    config: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    config.validate()?;
    if candidate.is_empty() {
        return Err(RougeError::EmptySequence("candidate"));
    }
    if reference.is_empty() {
        return Err(RougeError::EmptySequence("reference"));
    }
    let lcs = lcs_length(candidate, reference) as f64;
    Ok(RougeScore::from_recall_precision(
        lcs / reference.len() as f64,
        lcs / candidate.len() as f64,
        config.beta,
    ))
}

/// Scores one variant.
pub fn score_variant(
    variant: RougeVariant,
    candidate: &TokenSequence,
    reference: &TokenSequence,
    config: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    match variant {
        RougeVariant::Rouge1 => rouge_n(candidate, reference, 1, config.beta),
        RougeVariant::Rouge2 => rouge_n(candidate, reference, 2, config.beta),
        RougeVariant::RougeL => rouge_l(candidate, reference, config),
    }
}
