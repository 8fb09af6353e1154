//! Deterministic keyphrase/text normalization and stemming.
//!
//! Every comparison in the toolkit (matching, presence decisions, verdict
//! lookups, negative-sampling exclusions) goes through these two functions,
//! so they are the single place where spelling variation is collapsed.

mod porter;

pub use porter::stem as stem_word;

/// Casefold, replace dashes with spaces, strip the remaining punctuation
/// and collapse whitespace runs.
///
/// The result contains only lowercase alphanumeric tokens separated by
/// single spaces. Idempotent.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut cleaned = String::with_capacity(lowered.len());
    for ch in lowered.chars() {
        match ch {
            '-' | '\u{2013}' | '\u{2014}' => cleaned.push(' '),
            // A few letters (mathematical alphanumerics and friends) have no
            // lowercase mapping; they are dropped like punctuation so the
            // output never carries case.
            c if c.is_alphanumeric() && !c.is_uppercase() => cleaned.push(c),
            c if c.is_whitespace() => cleaned.push(' '),
            _ => {}
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Replace each whitespace token of an already-normalized phrase by its
/// Porter stem; tokens re-joined with single spaces.
///
/// Porter rules apply to ASCII letters only, so tokens containing digits or
/// non-ASCII characters pass through unchanged ("t5" stays "t5").
pub fn stem_phrase(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(stem_token)
        .collect::<Vec<_>>()
        .join(" ")
}

/// `stem_phrase(normalize(text))` in one step.
pub fn normalize_and_stem(text: &str) -> String {
    stem_phrase(&normalize(text))
}

/// Stem one normalized token: Porter for pure ASCII words, identity otherwise.
pub fn stem_token(token: &str) -> String {
    if token.bytes().all(|b| b.is_ascii_lowercase()) {
        porter::stem(token)
    } else {
        token.to_string()
    }
}

/// A keyphrase carried through all three representations.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct StemmedKeyphrase {
    pub raw: String,
    pub normalized: String,
    pub stemmed: String,
}

impl StemmedKeyphrase {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let normalized = normalize(&raw);
        let stemmed = stem_phrase(&normalized);
        StemmedKeyphrase {
            raw,
            normalized,
            stemmed,
        }
    }
}

/// Keep the first `budget` whitespace tokens of `text`.
///
/// Returns the input untouched when it fits; otherwise the surviving tokens
/// are re-joined with single spaces.
pub fn truncate_tokens(text: &str, budget: usize) -> String {
    let count = text.split_whitespace().count();
    if count <= budget {
        return text.to_string();
    }
    text.split_whitespace()
        .take(budget)
        .collect::<Vec<_>>()
        .join(" ")
}
