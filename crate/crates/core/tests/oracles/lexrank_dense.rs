//! Dense reference for LexRank: transition matrix built with dense
//! vectors, stationary distribution by LU solve of (I − d·Mᵀ)p = (1 − d)/N · 1.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use prsum_core::lexrank::{build_graph, power_iteration, rank_sentences, LexRankConfig};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct Document {
    pub name: String,
    pub sentences: Vec<String>,
    pub expected_top: Option<usize>,
}

pub fn documents(path: &Path) -> Vec<Document> {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn terms(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Transition matrix built from scratch with dense vectors.
pub fn oracle_transition(sentences: &[String]) -> DMatrix<f64> {
    let lists: Vec<Vec<String>> = sentences.iter().map(|s| terms(s)).collect();
    let mut vocab = BTreeMap::new();
    for t in lists.iter().flatten() {
        let next = vocab.len();
        vocab.entry(t.clone()).or_insert(next);
    }
    let (n, v) = (sentences.len(), vocab.len());
    let mut tf = DMatrix::<f64>::zeros(n, v);
    for (i, list) in lists.iter().enumerate() {
        for t in list {
            tf[(i, vocab[t])] += 1.0;
        }
    }
    let mut w = tf.clone();
    for j in 0..v {
        let df = (0..n).filter(|&i| tf[(i, j)] > 0.0).count() as f64;
        let idf = (n as f64 / df).ln() + 1.0;
        w.column_mut(j).scale_mut(idf);
    }
    let mut sim = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (w.row(i), w.row(j));
            let denom = a.norm() * b.norm();
            sim[(i, j)] = if denom == 0.0 { 0.0 } else { a.dot(&b) / denom };
        }
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let s = sim.row(i).sum();
        for j in 0..n {
            m[(i, j)] = if s > 0.0 { sim[(i, j)] / s } else { 1.0 / n as f64 };
        }
    }
    m
}

/// Solves (I − d·Mᵀ) p = (1 − d)/N · 1 and renormalizes.
pub fn oracle_centrality(m: &DMatrix<f64>, d: f64) -> Vec<f64> {
    let n = m.nrows();
    let a = DMatrix::<f64>::identity(n, n) - m.transpose() * d;
    let b = DVector::<f64>::from_element(n, (1.0 - d) / n as f64);
    let p = a.lu().solve(&b).expect("system is non-singular for d < 1");
    let total = p.sum();
    p.iter().map(|x| x / total).collect()
}

pub fn oracle_ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        if (scores[a] - scores[b]).abs() < 1e-9 {
            a.cmp(&b)
        } else {
            scores[b].partial_cmp(&scores[a]).unwrap()
        }
    });
    order
}

/// Every fixture: centrality within 1e-6 of the solve, identical ranking,
/// sum 1 ± 1e-9, and the expected top sentence where one is given.
pub fn check_documents(docs: &[Document]) -> Vec<String> {
    let config = LexRankConfig::default();
    let mut failures = Vec::new();
    for doc in docs {
        if doc.sentences.is_empty() || doc.sentences.len() > 5 {
            failures.push(format!("{}: {} sentences", doc.name, doc.sentences.len()));
            continue;
        }
        let graph = match build_graph(&doc.sentences, &config) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("{}: {e}", doc.name));
                continue;
            }
        };
        let c = power_iteration(&graph, &config);
        let oracle = oracle_centrality(&oracle_transition(&doc.sentences), config.damping);
        let worst = c.scores.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !c.converged || worst >= 1e-6 {
            failures.push(format!("{}: max deviation {worst:e}, converged {}", doc.name, c.converged));
        }
        let total: f64 = c.scores.iter().sum();
        if (total - 1.0).abs() >= 1e-9 {
            failures.push(format!("{}: centrality sums to {total}", doc.name));
        }
        let (ours, theirs) = (rank_sentences(&c.scores), oracle_ranking(&oracle));
        if ours != theirs {
            failures.push(format!("{}: ranking {ours:?}, oracle {theirs:?}", doc.name));
        }
        if let Some(top) = doc.expected_top {
            if ours[0] != top || theirs[0] != top {
                failures.push(format!("{}: expected sentence {top} first, got {}", doc.name, ours[0]));
            }
        }
    }
    failures
}
