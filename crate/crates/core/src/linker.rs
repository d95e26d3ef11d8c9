//! Resolves free-text condition names and drug names against the
//! knowledge base.
//!
//! Conditions go through a strict cascade: exact canonical name, then
//! alias, then substring containment in either direction. Drugs use an
//! exact lookup followed by normalized Levenshtein similarity.

use serde::{Deserialize, Serialize};

use crate::kb_store::{ConditionRecord, KnowledgeBase, MedicationRecord};
use crate::text_index::normalize_key;

/// Minimum normalized similarity for a fuzzy drug-name match.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.80;

/// Candidate names shorter than this never take part in substring matching.
pub const MIN_SUBSTRING_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMethod {
    Exact,
    Alias,
    Substring,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkResult {
    pub condition_id: Option<String>,
    pub method: LinkMethod,
}

impl LinkResult {
    pub fn unlinked() -> Self {
        Self {
            condition_id: None,
            method: LinkMethod::None,
        }
    }

    pub fn is_linked(&self) -> bool {
        self.condition_id.is_some()
    }
}

/// Links `name` to a condition. Within a stage the shortest canonical
/// name wins, then the smallest id.
pub fn link_condition(kb: &KnowledgeBase, name: &str) -> LinkResult {
    let query = normalize_key(name);
    if query.is_empty() {
        return LinkResult::unlinked();
    }

    type Matcher<'a> = &'a dyn Fn(&ConditionRecord) -> bool;
    let stages: [(LinkMethod, Matcher); 3] = [
        (LinkMethod::Exact, &|c| c.canonical_name == query),
        (LinkMethod::Alias, &|c| c.aliases.contains(&query)),
        (LinkMethod::Substring, &|c| {
            std::iter::once(&c.canonical_name)
                .chain(&c.aliases)
                .any(|cand| contains_either_way(&query, cand))
        }),
    ];

    for (method, matches) in stages {
        let best = kb
            .conditions()
            .iter()
            .filter(|c| matches(c))
            .min_by(|a, b| {
                a.canonical_name
                    .chars()
                    .count()
                    .cmp(&b.canonical_name.chars().count())
                    .then_with(|| a.id.cmp(&b.id))
            });
        if let Some(c) = best {
            return LinkResult {
                condition_id: Some(c.id.clone()),
                method,
            };
        }
    }
    LinkResult::unlinked()
}

fn contains_either_way(query: &str, candidate: &str) -> bool {
    candidate.chars().count() >= MIN_SUBSTRING_LEN
        && (candidate.contains(query) || query.contains(candidate))
}

/// Character-level edit distance (insert, delete, substitute; unit costs).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)` on normalized strings.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let a = normalize_key(a);
    let b = normalize_key(b);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

/// Exact drug lookup, falling back to the most similar record when its
/// similarity reaches `threshold` (ties go to the smaller name).
pub fn link_medication<'kb>(
    kb: &'kb KnowledgeBase,
    name: &str,
    threshold: f64,
) -> Option<&'kb MedicationRecord> {
    if normalize_key(name).is_empty() {
        return None;
    }
    if let Some(found) = kb.find_medication_exact(name) {
        return Some(found);
    }
    kb.medications()
        .iter()
        .map(|m| (normalized_similarity(name, &m.name), m))
        .filter(|(sim, _)| *sim >= threshold)
        .max_by(|(sa, ma), (sb, mb)| sa.total_cmp(sb).then_with(|| mb.name.cmp(&ma.name)))
        .map(|(_, m)| m)
}
