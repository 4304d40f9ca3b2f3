//! Word tokenization and sentence segmentation shared by the cleaning
//! pipeline, the LexRank baseline and the ROUGE scorer.

use serde::{Deserialize, Serialize};

/// Where a token sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Source,
    Target,
    Candidate,
    Reference,
}

/// An ordered list of non-empty tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    kind: TokenKind,
}

impl TokenSequence {
    /// Builds a sequence, dropping any empty tokens.
    pub fn new<I, S>(tokens: I, kind: TokenKind) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t: &String| !t.is_empty())
            .collect();
        Self { tokens, kind }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: TokenKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Keeps the first `max` tokens.
    pub fn truncate(&mut self, max: usize) {
        self.tokens.truncate(max);
    }

    /// Drops tokens made only of punctuation.
    pub fn without_punctuation(&self) -> Self {
        Self {
            tokens: self
                .tokens
                .iter()
                .filter(|t| !is_punctuation_token(t))
                .cloned()
                .collect(),
            kind: self.kind,
        }
    }

    /// Space-joined rendering, the on-disk form of a tokenized text.
    pub fn to_text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// True when every character of `token` is punctuation.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punct)
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// word as single-character tokens. Interior punctuation (`java-formatter`,
/// `don't`) stays attached.
pub fn tokenize_words(text: &str, kind: TokenKind) -> TokenSequence {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let Some(first_word) = chars.iter().position(|&(_, c)| !is_punct(c)) else {
            tokens.extend(chars.iter().map(|&(_, c)| c.to_string()));
            continue;
        };
        let last_word = chars.iter().rposition(|&(_, c)| !is_punct(c)).unwrap();
        tokens.extend(chars[..first_word].iter().map(|&(_, c)| c.to_string()));
        let start = chars[first_word].0;
        let end = chars
            .get(last_word + 1)
            .map(|&(i, _)| i)
            .unwrap_or(word.len());
        tokens.push(word[start..end].to_string());
        tokens.extend(chars[last_word + 1..].iter().map(|&(_, c)| c.to_string()));
    }
    TokenSequence { tokens, kind }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits text into sentences at newlines and at runs of `.`, `!` or `?`
/// that are followed by whitespace or the end of the text. Terminators stay
/// with their sentence; blank sentences are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    for line in text.lines() {
        let mut start = 0;
        let mut iter = line.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            if !is_terminator(c) {
                continue;
            }
            let mut end = i + c.len_utf8();
            while let Some(&(j, next)) = iter.peek() {
                if is_terminator(next) {
                    end = j + next.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            let at_boundary = iter.peek().is_none_or(|&(_, next)| next.is_whitespace());
            if at_boundary {
                push_sentence(&mut sentences, &line[start..end]);
                start = end;
            }
        }
        push_sentence(&mut sentences, &line[start..]);
    }
    sentences
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let s = raw.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}
