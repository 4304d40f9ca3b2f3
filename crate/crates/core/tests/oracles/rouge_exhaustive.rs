//! Exhaustive ROUGE-N / LCS check over short sequences on three symbols.
//!
//! Scores only depend on which positions hold equal tokens, so pairs are
//! enumerated up to relabelling of the alphabet: a pair is kept when the
//! concatenation `x ++ y` introduces symbols in the order 0, 1, 2.

use prsum_core::rouge::{lcs_length, rouge_n, RougeError};
use prsum_core::text::{TokenKind, TokenSequence};

pub const MAX_LEN: usize = 8;
pub const SYMBOLS: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Default)]
pub struct ExhaustiveReport {
    pub sequences: usize,
    pub pairs: usize,
    pub mismatches: Vec<String>,
}

/// All sequences of length 0..=MAX_LEN, shortest first.
pub fn all_sequences() -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut start = 0;
    for _ in 0..MAX_LEN {
        let end = out.len();
        for i in start..end {
            for s in 0..3u8 {
                let mut next = out[i].clone();
                next.push(s);
                out.push(next);
            }
        }
        start = end;
    }
    out
}

fn index_of(seq: &[u8]) -> usize {
    // Offset of the length block plus base-3 value.
    let block: usize = (0..seq.len()).map(|k| 3usize.pow(k as u32)).sum();
    block + seq.iter().fold(0, |acc, &s| acc * 3 + s as usize)
}

fn is_canonical(x: &[u8], y: &[u8]) -> bool {
    let mut next = 0u8;
    for &s in x.iter().chain(y) {
        if s > next {
            return false;
        }
        if s == next {
            next += 1;
        }
    }
    true
}

fn to_sequence(seq: &[u8]) -> TokenSequence {
    TokenSequence::new(
        seq.iter().map(|&s| SYMBOLS[s as usize].to_string()),
        TokenKind::Candidate,
    )
}

fn gram_counts(seq: &[u8], n: usize) -> [usize; 9] {
    let mut counts = [0; 9];
    if seq.len() >= n {
        for w in seq.windows(n) {
            counts[w.iter().fold(0, |acc, &s| acc * 3 + s as usize)] += 1;
        }
    }
    counts
}

/// Bitset over sequence indices of every subsequence of each sequence.
fn subsequence_sets(seqs: &[Vec<u8>]) -> (usize, Vec<u64>) {
    let words = seqs.len().div_ceil(64);
    let mut sets = vec![0u64; seqs.len() * words];
    let mut buf = Vec::with_capacity(MAX_LEN);
    for (i, seq) in seqs.iter().enumerate() {
        for mask in 0u32..(1 << seq.len()) {
            buf.clear();
            buf.extend((0..seq.len()).filter(|k| mask & (1 << k) != 0).map(|k| seq[k]));
            let j = index_of(&buf);
            sets[i * words + j / 64] |= 1 << (j % 64);
        }
    }
    (words, sets)
}

fn length_of_index(j: usize) -> usize {
    let (mut len, mut block) = (0, 1);
    let mut rest = j;
    while rest >= block {
        rest -= block;
        block *= 3;
        len += 1;
    }
    len
}

fn oracle_lcs(words: usize, sets: &[u64], a: usize, b: usize) -> usize {
    let (sa, sb) = (&sets[a * words..(a + 1) * words], &sets[b * words..(b + 1) * words]);
    for w in (0..words).rev() {
        let common = sa[w] & sb[w];
        if common != 0 {
            return length_of_index(w * 64 + 63 - common.leading_zeros() as usize);
        }
    }
    0
}

pub fn run() -> ExhaustiveReport {
    let seqs = all_sequences();
    let tokens: Vec<TokenSequence> = seqs.iter().map(|s| to_sequence(s)).collect();
    let grams: Vec<[[usize; 9]; 2]> = seqs
        .iter()
        .map(|s| [gram_counts(s, 1), gram_counts(s, 2)])
        .collect();
    let (words, sets) = subsequence_sets(&seqs);
    let mut report = ExhaustiveReport {
        sequences: seqs.len(),
        ..Default::default()
    };
    let fail = |report: &mut ExhaustiveReport, msg: String| {
        if report.mismatches.len() < 20 {
            report.mismatches.push(msg);
        }
    };

    for (xi, x) in seqs.iter().enumerate() {
        if !is_canonical(x, &[]) {
            continue;
        }
        for (yi, y) in seqs.iter().enumerate() {
            if !is_canonical(x, y) {
                continue;
            }
            report.pairs += 1;
            let (cand, reference) = (&tokens[xi], &tokens[yi]);

            let lcs = lcs_length(cand, reference);
            let expected = oracle_lcs(words, &sets, xi, yi);
            if lcs != expected {
                fail(&mut report, format!("lcs {x:?} {y:?}: got {lcs}, oracle {expected}"));
            }

            for n in 1..=2 {
                let (cg, rg) = (&grams[xi][n - 1], &grams[yi][n - 1]);
                let matched: usize = cg.iter().zip(rg).map(|(c, r)| *c.min(r)).sum();
                let ref_total = (y.len() + 1).saturating_sub(n);
                let cand_total = (x.len() + 1).saturating_sub(n);
                match rouge_n(cand, reference, n, 1.0) {
                    Err(RougeError::ReferenceTooShort { .. }) if ref_total == 0 => {}
                    Ok(score) if ref_total > 0 => {
                        let recall = matched as f64 / ref_total as f64;
                        let precision = if cand_total == 0 {
                            0.0
                        } else {
                            matched as f64 / cand_total as f64
                        };
                        if score.recall != recall || score.precision != precision {
                            fail(
                                &mut report,
                                format!(
                                    "rouge{n} {x:?} {y:?}: got ({}, {}), oracle ({recall}, {precision})",
                                    score.recall, score.precision
                                ),
                            );
                        }
                    }
                    other => fail(&mut report, format!("rouge{n} {x:?} {y:?}: unexpected {other:?}")),
                }
            }
        }
    }
    report
}
