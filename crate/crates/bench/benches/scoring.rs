use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use prsum_core::lexrank::summarize_lexrank;
use prsum_core::preprocess::clean_text;
use prsum_core::rouge::{lcs_length, rouge_l, rouge_n};
use prsum_core::text::{split_sentences, tokenize_words, TokenKind};
use prsum_core::{CleaningConfig, LexRankConfig, RougeConfig};

const WORDS: &[&str] = &[
    "add", "fix", "the", "parser", "cache", "timeout", "driver", "retry", "null", "values", "in", "mapper",
    "tests", "for", "default", "config", "loader", "encoding", "headers", "logging",
];

/// Deterministic pseudo-text of `n` words with a sentence break every 9.
fn text(n: usize, salt: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let w = WORDS[(i * 7 + salt * 13 + i / 3) % WORDS.len()];
        out.push_str(w);
        out.push_str(if i % 9 == 8 { ". " } else { " " });
    }
    out
}

fn bench_rouge(c: &mut Criterion) {
    let mut group = c.benchmark_group("rouge");
    for len in [50, 512] {
        let cand = tokenize_words(&text(len, 1), TokenKind::Candidate).without_punctuation();
        let reference = tokenize_words(&text(len, 2), TokenKind::Reference).without_punctuation();
        group.bench_with_input(BenchmarkId::new("rouge1", len), &len, |b, _| {
            b.iter(|| rouge_n(black_box(&cand), black_box(&reference), 1, 1.0))
        });
        group.bench_with_input(BenchmarkId::new("rouge2", len), &len, |b, _| {
            b.iter(|| rouge_n(black_box(&cand), black_box(&reference), 2, 1.0))
        });
        group.bench_with_input(BenchmarkId::new("rougeL", len), &len, |b, _| {
            b.iter(|| rouge_l(black_box(&cand), black_box(&reference), &RougeConfig::default()))
        });
        group.bench_with_input(BenchmarkId::new("lcs", len), &len, |b, _| {
            b.iter(|| lcs_length(black_box(&cand), black_box(&reference)))
        });
    }
    group.finish();
}

fn bench_lexrank(c: &mut Criterion) {
    let mut group = c.benchmark_group("lexrank");
    for words in [60, 512] {
        let sentences = split_sentences(&text(words, 3));
        let config = LexRankConfig::default();
        group.bench_with_input(BenchmarkId::new("summarize", sentences.len()), &sentences, |b, s| {
            b.iter(|| summarize_lexrank(black_box(s), &config))
        });
    }
    group.finish();
}

fn bench_cleaning(c: &mut Criterion) {
    let raw = format!(
        "## Summary\n<!-- template -->\n{}\nFixes #456, see https://example.org/x and thanks @alice<cm-sep>Signed-off-by: A <a@b.org>\n<b>done</b>",
        text(200, 4)
    );
    let config = CleaningConfig::default();
    c.bench_function("clean_text/noisy_200_words", |b| b.iter(|| clean_text(black_box(&raw), &config)));
}

criterion_group!(benches, bench_rouge, bench_lexrank, bench_cleaning);
criterion_main!(benches);
