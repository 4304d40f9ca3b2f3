//! Continuous LexRank: tf-idf sentence vectors, a cosine similarity graph,
//! and damped power iteration for eigenvector centrality.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{is_punctuation_token, tokenize_words, TokenKind};

#[derive(Debug, Error, PartialEq)]
pub enum LexRankError {
    #[error("document has no sentences")]
    EmptyDocument,
    #[error("no sentence contains a word token")]
    NoTerms,
    #[error("invalid LexRank configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexRankConfig {
    pub damping: f64,
    pub convergence_epsilon: f64,
    pub max_iterations: usize,
    /// Similarities below this are dropped; 0 keeps every edge.
    pub similarity_threshold: f64,
    pub summary_token_budget: usize,
}

impl Default for LexRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            convergence_epsilon: 1e-8,
            max_iterations: 200,
            similarity_threshold: 0.0,
            summary_token_budget: 50,
        }
    }
}

impl LexRankConfig {
    pub fn validate(&self) -> Result<(), LexRankError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(LexRankError::BadConfig("damping must lie in (0, 1)"));
        }
        if !(self.convergence_epsilon > 0.0) {
            return Err(LexRankError::BadConfig("convergence_epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.similarity_threshold) {
            return Err(LexRankError::BadConfig("similarity_threshold must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Sparse term → weight vector. Ordered so float sums are reproducible.
pub type TermVector = BTreeMap<String, f64>;

/// Lowercased word tokens of a sentence, punctuation removed.
pub fn sentence_terms(sentence: &str) -> Vec<String> {
    tokenize_words(sentence, TokenKind::Source)
        .into_tokens()
        .into_iter()
        .filter(|t| !is_punctuation_token(t))
        .map(|t| t.to_lowercase())
        .collect()
}

/// `tf · (ln(N / df) + 1)` per term, with N the number of sentences.
pub fn tfidf_vectors<S: AsRef<str>>(sentences: &[S]) -> Vec<TermVector> {
    let term_lists: Vec<Vec<String>> = sentences.iter().map(|s| sentence_terms(s.as_ref())).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for terms in &term_lists {
        let mut unique: Vec<&str> = terms.iter().map(String::as_str).collect();
        unique.sort_unstable();
        unique.dedup();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let n = sentences.len() as f64;
    term_lists
        .iter()
        .map(|terms| {
            let mut tf: TermVector = BTreeMap::new();
            for t in terms {
                *tf.entry(t.clone()).or_insert(0.0) += 1.0;
            }
            for (term, w) in tf.iter_mut() {
                *w *= (n / df[term.as_str()] as f64).ln() + 1.0;
            }
            tf
        })
        .collect()
}

fn norm(v: &TermVector) -> f64 {
    v.values().map(|w| w * w).sum::<f64>().sqrt()
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|x| w * x))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGraph {
    pub sentences: Vec<String>,
    pub vectors: Vec<TermVector>,
    /// Symmetric cosine similarities after thresholding.
    pub similarity: Matrix,
    /// Row-stochastic transition matrix.
    pub transition: Matrix,
    pub centrality: Vec<f64>,
}

/// Builds the similarity and transition matrices. Centrality is left
/// empty until [`power_iteration`] runs.
pub fn build_graph<S: AsRef<str>>(sentences: &[S], config: &LexRankConfig) -> Result<SentenceGraph, LexRankError> {
    config.validate()?;
    if sentences.is_empty() {
        return Err(LexRankError::EmptyDocument);
    }
    let vectors = tfidf_vectors(sentences);
    if vectors.iter().all(|v| v.is_empty()) {
        return Err(LexRankError::NoTerms);
    }
    let n = sentences.len();
    let mut similarity = Matrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut s = if i == j && !vectors[i].is_empty() {
                1.0
            } else {
                cosine(&vectors[i], &vectors[j])
            };
            if i != j && s < config.similarity_threshold {
                s = 0.0;
            }
            similarity.set(i, j, s);
            similarity.set(j, i, s);
        }
    }
    let mut transition = Matrix::zeros(n);
    for i in 0..n {
        let row_sum: f64 = similarity.row(i).iter().sum();
        for j in 0..n {
            let v = if row_sum > 0.0 {
                similarity.get(i, j) / row_sum
            } else {
                1.0 / n as f64
            };
            transition.set(i, j, v);
        }
    }
    Ok(SentenceGraph {
        sentences: sentences.iter().map(|s| s.as_ref().to_string()).collect(),
        vectors,
        similarity,
        transition,
        centrality: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centrality {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iterations` ran out; `scores` is then the last iterate.
    pub converged: bool,
}

/// Stationary distribution of `(1 − d)/N · 1 + d · Mᵀ p`, from a uniform start.
pub fn power_iteration(graph: &SentenceGraph, config: &LexRankConfig) -> Centrality {
    let m = &graph.transition;
    let n = m.size();
    let d = config.damping;
    let teleport = (1.0 - d) / n as f64;
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        next.fill(teleport);
        for (i, &pi) in p.iter().enumerate() {
            for (acc, &mij) in next.iter_mut().zip(m.row(i)) {
                *acc += d * mij * pi;
            }
        }
        let delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut p, &mut next);
        if delta < config.convergence_epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("power iteration stopped after {iterations} iterations without converging");
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Centrality {
        scores: p,
        iterations,
        converged,
    }
}

/// Sentence indices by descending score, earlier position first on ties.
/// Scores are compared on a 1e-12 grid so rounding noise does not reorder ties.
pub fn rank_sentences(scores: &[f64]) -> Vec<usize> {
    let key = |x: f64| (x * 1e12).round() as i64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).cmp(&key(scores[a])).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    /// Document positions of the selected sentences, ascending.
    pub selected: Vec<usize>,
    pub converged: bool,
}

/// Picks central sentences within the token budget and emits them in
/// document order.
///
/// Sentences are taken greedily in rank order; one that would overflow the
/// budget is skipped and later, shorter ones are still considered. If
/// nothing fits, the top sentence is truncated to the budget.
pub fn summarize_lexrank<S: AsRef<str>>(document: &[S], config: &LexRankConfig) -> Result<Summary, LexRankError> {
    if document.is_empty() {
        return Err(LexRankError::EmptyDocument);
    }
    let mut graph = build_graph(document, config)?;
    let centrality = power_iteration(&graph, config);
    graph.centrality = centrality.scores;

    let lengths: Vec<usize> = document
        .iter()
        .map(|s| tokenize_words(s.as_ref(), TokenKind::Candidate).len())
        .collect();
    let budget = config.summary_token_budget;
    let ranking = rank_sentences(&graph.centrality);
    let mut selected = Vec::new();
    let mut used = 0;
    for &i in &ranking {
        if lengths[i] > 0 && used + lengths[i] <= budget {
            used += lengths[i];
            selected.push(i);
        }
    }
    let text = if selected.is_empty() {
        let top = ranking[0];
        selected.push(top);
        let mut tokens = tokenize_words(document[top].as_ref(), TokenKind::Candidate);
        tokens.truncate(budget);
        tokens.to_text()
    } else {
        selected.sort_unstable();
        selected
            .iter()
            .map(|&i| document[i].as_ref().trim())
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(Summary {
        text,
        selected,
        converged: centrality.converged,
    })
}
