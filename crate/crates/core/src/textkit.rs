//! Text normalization, word tokenization, sentence splitting and n-grams.
//!
//! Every scorer in the crate goes through [`normalize`] first, so the rules
//! here decide what counts as "the same word" everywhere else:
//!
//! * lowercase,
//! * delete every character in a Unicode punctuation category (`P*`) as well
//!   as `<`, `>` and `/`,
//! * collapse whitespace runs to a single space and trim the ends.
//!
//! Words are maximal runs of non-space characters of normalized text. There
//! is no stemming.

use std::fmt;

use unicode_general_category::{get_general_category, GeneralCategory};

/// Text that has been through [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Ordered word tokens. Never contains an empty token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Space-joined form; re-tokenizing it yields the same sequence.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

/// Ordered, non-empty sentence spans.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceSeq(Vec<String>);

impl SentenceSeq {
    pub fn sentences(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Punctuation class used by [`normalize`].
pub fn is_punctuation(c: char) -> bool {
    if matches!(c, '<' | '>' | '/') {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn normalize(raw: &str) -> NormalizedText {
    let stripped: String = raw
        .chars()
        .filter(|c| !is_punctuation(*c))
        .flat_map(char::to_lowercase)
        .collect();
    let mut out = String::with_capacity(stripped.len());
    for word in stripped.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    NormalizedText(out)
}

pub fn tokenize_words(text: &NormalizedText) -> TokenSeq {
    TokenSeq(text.0.split_whitespace().map(str::to_owned).collect())
}

/// Shorthand for `tokenize_words(&normalize(raw))`.
pub fn words(raw: &str) -> TokenSeq {
    tokenize_words(&normalize(raw))
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits on `.`, `!` or `?` when followed by whitespace or the end of the
/// text. The terminator stays with its sentence. Spans that hold nothing but
/// terminators and whitespace are dropped.
pub fn split_sentences(raw: &str) -> SentenceSeq {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = raw.char_indices().peekable();
    while let Some((idx, c)) = chars.next() {
        if !is_terminal(c) {
            continue;
        }
        let boundary = match chars.peek() {
            None => true,
            Some((_, next)) => next.is_whitespace(),
        };
        if boundary {
            let end = idx + c.len_utf8();
            push_span(&mut sentences, &raw[start..end]);
            start = end;
        }
    }
    push_span(&mut sentences, &raw[start..]);
    SentenceSeq(sentences)
}

fn push_span(out: &mut Vec<String>, span: &str) {
    let span = span.trim();
    if span.chars().any(|c| !is_terminal(c) && !c.is_whitespace()) {
        out.push(span.to_owned());
    }
}

/// Contiguous n-grams in order.
///
/// # Panics
///
/// Panics if `n == 0`.
pub fn ngrams(tokens: &TokenSeq, n: usize) -> Vec<&[String]> {
    assert!(n >= 1, "n-gram order must be positive");
    tokens.0.windows(n).collect()
}
