//! Sentence-level reference attribution.
//!
//! Every source sentence of the supporting documents becomes a BM25 item;
//! each generated sentence is used as a query against them. All
//! (generated sentence, source sentence) pairs compete in one global pool
//! and the best N with a positive score are kept, N being the number of
//! generated sentences. A generated sentence can therefore end up with
//! several references while others get none.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb_store::{ExerciseRecord, MedicationRecord, SourceDocument};
use crate::text_index::{build_index, rank, split_sentences, Bm25Params};

/// Attached to every response.
pub const DISCLAIMER: &str = "Physio is a research demonstration, not a medical service. \
Please consult a qualified health professional before making any decision about your health.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroundingError {
    #[error("answer text is empty")]
    EmptyAnswer,
    #[error("no source documents to attribute against")]
    NoDocuments,
    #[error("document `{0}` appears twice in the source set")]
    DuplicateDocument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub document_id: String,
    pub title: String,
    pub url: String,
    pub source_sentence: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSentence {
    pub text: String,
    pub references: Vec<Reference>,
}

impl AnswerSentence {
    pub fn plain(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            references: Vec::new(),
        }
    }
}

/// The unit returned to clients and stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub sentences: Vec<AnswerSentence>,
    pub exercises: Vec<ExerciseRecord>,
    pub medications: Vec<MedicationRecord>,
    /// False for the default response and for answers produced without
    /// supporting documents.
    pub grounded: bool,
    pub disclaimer: String,
}

impl GroundedAnswer {
    /// Ungrounded answer made of the sentences of `text`, nothing attached.
    pub fn ungrounded(text: &str) -> Self {
        let mut sentences: Vec<AnswerSentence> =
            split_sentences(text).into_iter().map(AnswerSentence::plain).collect();
        if sentences.is_empty() && !text.trim().is_empty() {
            sentences.push(AnswerSentence::plain(text.trim()));
        }
        Self {
            sentences,
            exercises: Vec::new(),
            medications: Vec::new(),
            grounded: false,
            disclaimer: DISCLAIMER.to_string(),
        }
    }

    pub fn reference_count(&self) -> usize {
        self.sentences.iter().map(|s| s.references.len()).sum()
    }

    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Id of a source sentence inside the attribution index. The ordinal is
/// zero-padded so that lexicographic order follows (document, ordinal).
pub fn source_sentence_id(document_id: &str, ordinal: usize) -> String {
    format!("{document_id}#{ordinal:06}")
}

/// Splits `answer_text` into sentences and attaches the global top-N
/// (generated sentence, source sentence) pairs as references. Ties are
/// broken by generated-sentence order, then source sentence id.
pub fn attribute_references(
    answer_text: &str,
    documents: &[&SourceDocument],
) -> Result<Vec<AnswerSentence>, GroundingError> {
    let generated = split_sentences(answer_text);
    if generated.is_empty() {
        return Err(GroundingError::EmptyAnswer);
    }
    if documents.is_empty() {
        return Err(GroundingError::NoDocuments);
    }

    let mut seen = HashSet::new();
    let mut locations: HashMap<String, (usize, usize)> = HashMap::new();
    let mut items = Vec::new();
    for (doc_idx, doc) in documents.iter().enumerate() {
        if !seen.insert(doc.id.as_str()) {
            return Err(GroundingError::DuplicateDocument(doc.id.clone()));
        }
        for (ordinal, sentence) in doc.sentences.iter().enumerate() {
            let id = source_sentence_id(&doc.id, ordinal);
            locations.insert(id.clone(), (doc_idx, ordinal));
            items.push((id, sentence.as_str()));
        }
    }
    let index = build_index(items, Bm25Params::default())
        .map_err(|_| GroundingError::DuplicateDocument(String::new()))?;

    struct Candidate {
        generated: usize,
        source_id: String,
        score: f64,
    }
    let mut candidates: Vec<Candidate> = generated
        .iter()
        .enumerate()
        .flat_map(|(g, text)| {
            rank(&index, text, index.len())
                .into_iter()
                .map(move |hit| Candidate {
                    generated: g,
                    source_id: hit.id,
                    score: hit.score,
                })
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.generated.cmp(&b.generated))
            .then_with(|| a.source_id.cmp(&b.source_id))
    });
    candidates.truncate(generated.len());

    let mut sentences: Vec<AnswerSentence> =
        generated.into_iter().map(AnswerSentence::plain).collect();
    for c in candidates {
        let (doc_idx, ordinal) = locations[&c.source_id];
        let doc = documents[doc_idx];
        sentences[c.generated].references.push(Reference {
            document_id: doc.id.clone(),
            title: doc.title.clone(),
            url: doc.url.clone(),
            source_sentence: doc.sentences[ordinal].clone(),
            score: c.score,
        });
    }
    Ok(sentences)
}
