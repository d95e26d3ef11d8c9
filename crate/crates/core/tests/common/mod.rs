//! Fixture helpers and brute-force oracles shared by the integration and
//! acceptance tests. The oracles deliberately avoid the library's ranking,
//! attribution and edit-distance code.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use physio_core::kb_store::{ConditionRecord, KnowledgeBase, SourceDocument, WebpageRecord};
use physio_core::llm_gateway::{LlmGateway, MockBackend};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const BACK_PAIN_QUERY: &str = "I feel pain in my lower back. What can I do?";
pub const OFF_TOPIC_QUERY: &str = "What is the capital of France?";
pub const UNLINKABLE_QUERY: &str = "My elbow hurts after playing tennis. Any advice?";
pub const ANKLE_QUERY: &str = "I have sprained my ankle playing football. How should I treat it?";
pub const UNPARSEABLE_VALIDATION_QUERY: &str = "Is this a physio question or not?";
pub const NO_DOCUMENTS_QUERY: &str = "My neck is stiff after sleeping badly.";
pub const SLOW_QUERY: &str = "My back hurts and the model is slow.";

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn fixture_kb() -> KnowledgeBase {
    KnowledgeBase::load_dir(data_dir()).expect("bundled fixture loads")
}

pub fn mock_gateway() -> (LlmGateway, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::from_file(data_dir().join("mock_script.jsonl")).expect("mock script"));
    (LlmGateway::new(mock.clone()), mock)
}

pub fn lines_in(file: &str) -> usize {
    std::fs::read_to_string(data_dir().join(file))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count()
}

// ---------------------------------------------------------------- BM25 oracle

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Scores every document with the textbook Okapi formula (k1 = 1.2,
/// b = 0.75, non-negative IDF), drops zero scores and sorts by descending
/// score, then ascending id.
pub fn bm25_oracle(docs: &[(String, String)], query: &str) -> Vec<(String, f64)> {
    let (k1, b) = (1.2f64, 0.75f64);
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(_, t)| oracle_tokens(t)).collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let query = oracle_tokens(query);
    let mut out = Vec::new();
    for (i, (id, _)) in docs.iter().enumerate() {
        let doc = &tokenized[i];
        let mut score = 0.0;
        for term in &query {
            let tf = doc.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
        }
        if score > 0.0 {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

// ----------------------------------------------------------- grounding oracle

/// One selected pair: generated sentence index, document id, source
/// sentence ordinal, score.
pub type OraclePair = (usize, String, usize, f64);

/// Enumerates every (generated, source) pair, scores it against the pool
/// of all source sentences, and keeps the global top-N positive pairs.
pub fn grounding_oracle(answer: &[String], docs: &[(String, Vec<String>)]) -> Vec<OraclePair> {
    let pool: Vec<(String, String)> = docs
        .iter()
        .flat_map(|(doc, sentences)| {
            sentences
                .iter()
                .enumerate()
                .map(move |(i, s)| (format!("{doc}#{i:06}"), s.clone()))
        })
        .collect();
    let mut candidates: Vec<(usize, String, f64)> = Vec::new();
    for (g, sentence) in answer.iter().enumerate() {
        for (id, score) in bm25_oracle(&pool, sentence) {
            candidates.push((g, id, score));
        }
    }
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
            .then_with(|| a.1.cmp(&b.1))
    });
    candidates.truncate(answer.len());
    candidates
        .into_iter()
        .map(|(g, id, score)| {
            let (doc, ordinal) = id.rsplit_once('#').unwrap();
            (g, doc.to_string(), ordinal.parse().unwrap(), score)
        })
        .collect()
}

// ---------------------------------------------------------- Levenshtein oracle

/// Full-matrix Wagner-Fischer edit distance over chars.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

// ------------------------------------------------------------ random inputs

pub const VOCAB: &[&str] = &[
    "ice", "sprain", "rest", "back", "pain", "walk", "stretch", "knee", "heat", "swelling", "ankle",
    "muscle",
];

pub fn random_text<R: Rng>(rng: &mut R, max_tokens: usize) -> String {
    let n = rng.random_range(0..=max_tokens);
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random sentence of 1..=max_tokens vocabulary words ending with '.'.
pub fn random_sentence<R: Rng>(rng: &mut R, max_tokens: usize) -> String {
    let n = rng.random_range(1..=max_tokens);
    let words: Vec<&str> = (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    format!("{}.", words.join(" "))
}

pub fn random_corpus<R: Rng>(rng: &mut R, max_docs: usize, max_tokens: usize) -> Vec<(String, String)> {
    let n = rng.random_range(1..=max_docs);
    (0..n)
        .map(|i| (format!("doc{i:02}"), random_text(rng, max_tokens)))
        .collect()
}

/// Random documents (1..=max_docs) of 1..=max_sentences sentences each,
/// returned both as library documents and as the oracle's plain lists.
pub fn random_documents<R: Rng>(
    rng: &mut R,
    max_docs: usize,
    max_sentences: usize,
) -> (Vec<SourceDocument>, Vec<(String, Vec<String>)>) {
    let n = rng.random_range(1..=max_docs);
    let mut docs = Vec::new();
    let mut plain = Vec::new();
    for d in 0..n {
        let k = rng.random_range(1..=max_sentences);
        let sentences: Vec<String> = (0..k).map(|_| random_sentence(rng, 6)).collect();
        let id = format!("d{d}");
        let doc: SourceDocument = WebpageRecord {
            id: id.clone(),
            condition_id: "c".into(),
            url: format!("https://example.org/{id}"),
            title: id.clone(),
            body: sentences.join(" "),
        }
        .into();
        assert_eq!(doc.sentences, sentences);
        docs.push(doc);
        plain.push((id, sentences));
    }
    (docs, plain)
}

/// Conditions with names and aliases drawn from a small pool so that all
/// three linking stages get exercised.
pub fn random_conditions<R: Rng>(rng: &mut R) -> Vec<ConditionRecord> {
    const WORDS: &[&str] = &["back", "pain", "knee", "ankle", "sprain", "neck", "hip", "stiff", "sore", "lumbago"];
    let n = rng.random_range(1..=6);
    let mut names = std::collections::HashSet::new();
    let mut out = Vec::new();
    for i in 0..n {
        let words = rng.random_range(1..=3);
        let name: Vec<&str> = (0..words).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let name = name.join(" ");
        if !names.insert(name.clone()) {
            continue;
        }
        let aliases = (0..rng.random_range(0..=3))
            .map(|_| {
                let w = rng.random_range(1..=2);
                (0..w).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
            })
            .collect();
        out.push(ConditionRecord {
            id: format!("c{i}"),
            canonical_name: name,
            aliases,
        });
    }
    out
}

pub fn random_condition_query<R: Rng>(rng: &mut R) -> String {
    const WORDS: &[&str] = &["back", "pain", "knee", "ankle", "sprain", "neck", "hip", "stiff", "sore", "lumbago", "elbow"];
    let w = rng.random_range(1..=3);
    (0..w).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn random_word<R: Rng>(rng: &mut R, max_len: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', 'e', 'é', ' '];
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}
