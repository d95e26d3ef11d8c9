//! Tokenization, rule-based sentence segmentation and Okapi BM25 ranking.
//!
//! The same engine serves two purposes: ranking whole webpage bodies
//! against a user query, and ranking individual source sentences against
//! generated sentences when attaching references.

mod bm25;
mod sentences;

pub use bm25::{build_index, rank, Bm25Error, Bm25Index, Bm25Params, ScoredId};
pub use sentences::split_sentences;

/// Lowercases `text` and splits it on every maximal run of
/// non-alphanumeric characters. No stemming and no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Matching key used for condition names, aliases and drug names:
/// lowercased, trimmed, inner whitespace collapsed to single spaces.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
