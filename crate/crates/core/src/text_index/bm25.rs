use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum Bm25Error {
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("invalid BM25 parameters: k1={k1}, b={b} (need k1 >= 0 and 0 <= b <= 1)")]
    InvalidParams { k1: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, Bm25Error> {
        if !(k1 >= 0.0 && k1.is_finite() && (0.0..=1.0).contains(&b)) {
            return Err(Bm25Error::InvalidParams { k1, b });
        }
        Ok(Self { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// A ranked hit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredId {
    pub id: String,
    pub score: f64,
}

/// Immutable BM25 index over a fixed set of texts.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_ids: Vec<String>,
    /// term -> (document ordinal, term frequency), ascending by ordinal
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[usize] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Number of indexed documents containing `term` at least once.
    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Occurrences of `term` in the document at `ordinal`.
    pub fn term_frequency(&self, ordinal: usize, term: &str) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.binary_search_by_key(&ordinal, |&(d, _)| d).ok().map(|i| p[i].1))
            .unwrap_or(0)
    }

    /// Non-negative IDF: `ln((N - df + 0.5) / (df + 0.5) + 1)`.
    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_ids.len() as f64;
        let df = df as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score every document against the query tokens. Each query token
    /// occurrence contributes once, summed in query order.
    fn score_all(&self, query_tokens: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_ids.len()];
        let Bm25Params { k1, b } = self.params;
        for token in query_tokens {
            let Some(postings) = self.postings.get(token) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for &(doc, tf) in postings {
                let tf = tf as f64;
                let len_norm = 1.0 - b + b * self.doc_lengths[doc] as f64 / self.avg_doc_length;
                scores[doc] += idf * (tf * (k1 + 1.0)) / (tf + k1 * len_norm);
            }
        }
        scores
    }
}

/// Builds an index over `(id, text)` items. Ids must be unique.
pub fn build_index<I, S, T>(items: I, params: Bm25Params) -> Result<Bm25Index, Bm25Error>
where
    I: IntoIterator<Item = (S, T)>,
    S: Into<String>,
    T: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut doc_ids = Vec::new();
    let mut doc_lengths = Vec::new();
    let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();

    for (ordinal, (id, text)) in items.into_iter().enumerate() {
        let id = id.into();
        if !seen.insert(id.clone()) {
            return Err(Bm25Error::DuplicateId(id));
        }
        let tokens = tokenize(text.as_ref());
        doc_lengths.push(tokens.len());
        let mut counts: HashMap<String, u32> = HashMap::new();
        for token in tokens {
            *counts.entry(token).or_default() += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push((ordinal, tf));
        }
        doc_ids.push(id);
    }

    let avg_doc_length = if doc_lengths.is_empty() {
        0.0
    } else {
        doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64
    };

    Ok(Bm25Index {
        doc_ids,
        postings,
        doc_lengths,
        avg_doc_length,
        params,
    })
}

/// Top-`k` documents for `query_text`, by descending score then ascending
/// id. Documents without any query token (score 0) are never returned.
pub fn rank(index: &Bm25Index, query_text: &str, k: usize) -> Vec<ScoredId> {
    if k == 0 || index.is_empty() {
        return Vec::new();
    }
    let query_tokens = tokenize(query_text);
    let scores = index.score_all(&query_tokens);
    let mut hits: Vec<ScoredId> = scores
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s > 0.0)
        .map(|(doc, score)| ScoredId {
            id: index.doc_ids[doc].clone(),
            score,
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.truncate(k);
    hits
}
