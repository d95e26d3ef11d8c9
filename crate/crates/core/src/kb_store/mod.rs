//! The knowledge base: conditions, curated webpages, exercises and
//! medications, loaded from line-delimited JSON, plus the response cache.
//!
//! Webpages and exercises are indexed by condition id, medications by
//! normalized drug name. Everything except the cache is immutable once
//! loaded.

mod cache;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_index::{normalize_key, split_sentences};

pub use cache::{cache_key, CacheEntry, CacheError, ResponseCache};

pub const CONDITIONS_FILE: &str = "conditions.jsonl";
pub const WEBPAGES_FILE: &str = "webpages.jsonl";
pub const EXERCISES_FILE: &str = "exercises.jsonl";
pub const MEDICATIONS_FILE: &str = "medications.jsonl";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub id: String,
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

/// A webpage as it appears in the ingestion file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebpageRecord {
    pub id: String,
    pub condition_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
}

/// A curated webpage with its body segmented into sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub id: String,
    pub condition_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
    pub sentences: Vec<String>,
}

impl From<WebpageRecord> for SourceDocument {
    fn from(page: WebpageRecord) -> Self {
        let sentences = split_sentences(&page.body);
        Self {
            id: page.id,
            condition_id: page.condition_id,
            url: page.url,
            title: page.title,
            body: page.body,
            sentences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExerciseRecord {
    pub id: String,
    pub condition_id: String,
    pub name: String,
    pub video_url: String,
    #[serde(default)]
    pub instructions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicationRecord {
    pub name: String,
    pub otc: bool,
    pub description: String,
    #[serde(default)]
    pub url: Option<String>,
}

/// Collection sizes, as reported by the health endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbCounts {
    pub conditions: usize,
    pub webpages: usize,
    pub exercises: usize,
    pub medications: usize,
}

#[derive(Debug)]
pub struct KnowledgeBase {
    conditions: Vec<ConditionRecord>,
    webpages: Vec<SourceDocument>,
    exercises: Vec<ExerciseRecord>,
    medications: Vec<MedicationRecord>,
    condition_by_id: HashMap<String, usize>,
    webpages_by_condition: HashMap<String, Vec<usize>>,
    exercises_by_condition: HashMap<String, Vec<usize>>,
    medication_by_name: HashMap<String, usize>,
    cache: ResponseCache,
}

/// Loads the four ingestion files. The response cache starts empty and in
/// memory; see [`KnowledgeBase::with_cache`].
pub fn load_knowledge_base(
    conditions_path: impl AsRef<Path>,
    webpages_path: impl AsRef<Path>,
    exercises_path: impl AsRef<Path>,
    medications_path: impl AsRef<Path>,
) -> Result<KnowledgeBase, KbError> {
    let conditions = read_jsonl(conditions_path.as_ref())?;
    let webpages = read_jsonl(webpages_path.as_ref())?;
    let exercises = read_jsonl(exercises_path.as_ref())?;
    let medications = read_jsonl(medications_path.as_ref())?;

    check_fields(conditions_path.as_ref(), &conditions, |c: &ConditionRecord| {
        non_empty(&c.id, "id").and(non_empty(&normalize_key(&c.canonical_name), "canonical_name"))
    })?;
    check_fields(webpages_path.as_ref(), &webpages, |w: &WebpageRecord| {
        non_empty(&w.id, "id")
            .and(non_empty(&w.url, "url"))
            .and(non_empty(&w.body, "body"))
    })?;
    check_fields(exercises_path.as_ref(), &exercises, |e: &ExerciseRecord| {
        non_empty(&e.id, "id").and(non_empty(&e.name, "name"))
    })?;
    check_fields(medications_path.as_ref(), &medications, |m: &MedicationRecord| {
        non_empty(&normalize_key(&m.name), "name")
    })?;

    KnowledgeBase::from_records(
        conditions.into_iter().map(|(_, r)| r).collect(),
        webpages.into_iter().map(|(_, r)| r).collect(),
        exercises.into_iter().map(|(_, r)| r).collect(),
        medications.into_iter().map(|(_, r)| r).collect(),
    )
}

fn non_empty(value: &str, field: &'static str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("field `{field}` must not be empty"))
    } else {
        Ok(())
    }
}

fn check_fields<T>(
    path: &Path,
    records: &[(usize, T)],
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<(), KbError> {
    for (line, record) in records {
        check(record).map_err(|message| KbError::Malformed {
            path: path.to_path_buf(),
            line: *line,
            message,
        })?;
    }
    Ok(())
}

/// Parses one record per non-blank line, keeping 1-based line numbers.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, KbError> {
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| KbError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

impl KnowledgeBase {
    /// Loads `conditions.jsonl`, `webpages.jsonl`, `exercises.jsonl` and
    /// `medications.jsonl` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref();
        load_knowledge_base(
            dir.join(CONDITIONS_FILE),
            dir.join(WEBPAGES_FILE),
            dir.join(EXERCISES_FILE),
            dir.join(MEDICATIONS_FILE),
        )
    }

    /// Builds a knowledge base from in-memory records, normalizing names
    /// and enforcing uniqueness and referential integrity.
    pub fn from_records(
        conditions: Vec<ConditionRecord>,
        webpages: Vec<WebpageRecord>,
        exercises: Vec<ExerciseRecord>,
        medications: Vec<MedicationRecord>,
    ) -> Result<Self, KbError> {
        let mut condition_by_id = HashMap::new();
        let mut names = HashSet::new();
        let conditions: Vec<ConditionRecord> = conditions
            .into_iter()
            .map(normalize_condition)
            .collect();
        for (idx, c) in conditions.iter().enumerate() {
            if c.canonical_name.is_empty() {
                return Err(KbError::Integrity(format!("condition `{}` has an empty name", c.id)));
            }
            if condition_by_id.insert(c.id.clone(), idx).is_some() {
                return Err(KbError::Integrity(format!("duplicate condition id `{}`", c.id)));
            }
            if !names.insert(c.canonical_name.clone()) {
                return Err(KbError::Integrity(format!(
                    "duplicate canonical name `{}`",
                    c.canonical_name
                )));
            }
        }

        let mut webpages_by_condition: HashMap<String, Vec<usize>> = HashMap::new();
        let mut page_ids = HashSet::new();
        let webpages: Vec<SourceDocument> = webpages.into_iter().map(SourceDocument::from).collect();
        for (idx, page) in webpages.iter().enumerate() {
            if !condition_by_id.contains_key(&page.condition_id) {
                return Err(KbError::Integrity(format!(
                    "webpage `{}` references unknown condition `{}`",
                    page.id, page.condition_id
                )));
            }
            if !page_ids.insert(page.id.clone()) {
                return Err(KbError::Integrity(format!("duplicate webpage id `{}`", page.id)));
            }
            webpages_by_condition
                .entry(page.condition_id.clone())
                .or_default()
                .push(idx);
        }

        let mut exercises_by_condition: HashMap<String, Vec<usize>> = HashMap::new();
        let mut exercise_ids = HashSet::new();
        for (idx, ex) in exercises.iter().enumerate() {
            if !condition_by_id.contains_key(&ex.condition_id) {
                return Err(KbError::Integrity(format!(
                    "exercise `{}` references unknown condition `{}`",
                    ex.id, ex.condition_id
                )));
            }
            if !exercise_ids.insert(ex.id.clone()) {
                return Err(KbError::Integrity(format!("duplicate exercise id `{}`", ex.id)));
            }
            exercises_by_condition
                .entry(ex.condition_id.clone())
                .or_default()
                .push(idx);
        }

        let mut medication_by_name = HashMap::new();
        let medications: Vec<MedicationRecord> = medications
            .into_iter()
            .map(|m| MedicationRecord {
                name: normalize_key(&m.name),
                ..m
            })
            .collect();
        for (idx, m) in medications.iter().enumerate() {
            if m.name.is_empty() {
                return Err(KbError::Integrity("medication with an empty name".into()));
            }
            if medication_by_name.insert(m.name.clone(), idx).is_some() {
                return Err(KbError::Integrity(format!("duplicate medication `{}`", m.name)));
            }
        }

        Ok(Self {
            conditions,
            webpages,
            exercises,
            medications,
            condition_by_id,
            webpages_by_condition,
            exercises_by_condition,
            medication_by_name,
            cache: ResponseCache::in_memory(),
        })
    }

    /// Replaces the response cache, e.g. with a file-backed one.
    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn counts(&self) -> KbCounts {
        KbCounts {
            conditions: self.conditions.len(),
            webpages: self.webpages.len(),
            exercises: self.exercises.len(),
            medications: self.medications.len(),
        }
    }

    pub fn conditions(&self) -> &[ConditionRecord] {
        &self.conditions
    }

    pub fn webpages(&self) -> &[SourceDocument] {
        &self.webpages
    }

    pub fn exercises(&self) -> &[ExerciseRecord] {
        &self.exercises
    }

    pub fn medications(&self) -> &[MedicationRecord] {
        &self.medications
    }

    pub fn condition(&self, id: &str) -> Option<&ConditionRecord> {
        self.condition_by_id.get(id).map(|&i| &self.conditions[i])
    }

    fn require_condition(&self, id: &str) -> Result<(), KbError> {
        if self.condition_by_id.contains_key(id) {
            Ok(())
        } else {
            Err(KbError::NotFound {
                kind: "condition",
                id: id.to_string(),
            })
        }
    }

    /// Webpages for a condition, in ingest order.
    pub fn documents_for(&self, condition_id: &str) -> Result<Vec<&SourceDocument>, KbError> {
        self.require_condition(condition_id)?;
        Ok(self
            .webpages_by_condition
            .get(condition_id)
            .map(|ids| ids.iter().map(|&i| &self.webpages[i]).collect())
            .unwrap_or_default())
    }

    /// Exercises for a condition, in ingest order.
    pub fn exercises_for(&self, condition_id: &str) -> Result<Vec<&ExerciseRecord>, KbError> {
        self.require_condition(condition_id)?;
        Ok(self
            .exercises_by_condition
            .get(condition_id)
            .map(|ids| ids.iter().map(|&i| &self.exercises[i]).collect())
            .unwrap_or_default())
    }

    /// Case-insensitive exact lookup on the normalized drug name.
    pub fn find_medication_exact(&self, name: &str) -> Option<&MedicationRecord> {
        self.medication_by_name
            .get(&normalize_key(name))
            .map(|&i| &self.medications[i])
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn cache_get(&self, key: &str) -> Result<Option<CacheEntry>, CacheError> {
        self.cache.get(key)
    }

    pub fn cache_put(&self, key: &str, response: String) -> Result<(), CacheError> {
        self.cache.put(key, response)
    }

    /// Canonical JSON of the four collections (cache excluded). Loading
    /// the same files always yields the same bytes.
    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            conditions: &'a [ConditionRecord],
            webpages: &'a [SourceDocument],
            exercises: &'a [ExerciseRecord],
            medications: &'a [MedicationRecord],
        }
        serde_json::to_string(&Snapshot {
            conditions: &self.conditions,
            webpages: &self.webpages,
            exercises: &self.exercises,
            medications: &self.medications,
        })
        .expect("knowledge base records always serialize")
    }
}

fn normalize_condition(c: ConditionRecord) -> ConditionRecord {
    let canonical_name = normalize_key(&c.canonical_name);
    let mut seen = HashSet::new();
    let aliases = c
        .aliases
        .iter()
        .map(|a| normalize_key(a))
        .filter(|a| !a.is_empty() && *a != canonical_name && seen.insert(a.clone()))
        .collect();
    ConditionRecord {
        id: c.id,
        canonical_name,
        aliases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(id: &str, name: &str, aliases: &[&str]) -> ConditionRecord {
        ConditionRecord {
            id: id.into(),
            canonical_name: name.into(),
            aliases: aliases.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn page(id: &str, condition: &str, body: &str) -> WebpageRecord {
        WebpageRecord {
            id: id.into(),
            condition_id: condition.into(),
            url: format!("https://example.org/{id}"),
            title: id.into(),
            body: body.into(),
        }
    }

    fn med(name: &str, otc: bool) -> MedicationRecord {
        MedicationRecord {
            name: name.into(),
            otc,
            description: String::new(),
            url: None,
        }
    }

    #[test]
    fn aliases_are_normalized_and_deduplicated() {
        let kb = KnowledgeBase::from_records(
            vec![cond("bp", " Back  Pain", &["Lumbago", "lumbago ", "BACK PAIN", ""])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let c = kb.condition("bp").unwrap();
        assert_eq!(c.canonical_name, "back pain");
        assert_eq!(c.aliases, vec!["lumbago"]);
    }

    #[test]
    fn duplicate_canonical_names_rejected_case_insensitively() {
        let err = KnowledgeBase::from_records(
            vec![cond("a", "Back pain", &[]), cond("b", "back PAIN", &[])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, KbError::Integrity(_)));
    }

    #[test]
    fn dangling_condition_reference_rejected() {
        let err = KnowledgeBase::from_records(
            vec![cond("a", "back pain", &[])],
            vec![page("p", "nope", "Body.")],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown condition `nope`"));
    }

    #[test]
    fn duplicate_drug_names_rejected() {
        let err = KnowledgeBase::from_records(
            vec![],
            vec![],
            vec![],
            vec![med("Ibuprofen", true), med("ibuprofen", false)],
        )
        .unwrap_err();
        assert!(matches!(err, KbError::Integrity(_)));
    }

    #[test]
    fn lookups() {
        let kb = KnowledgeBase::from_records(
            vec![cond("a", "back pain", &[]), cond("b", "neck pain", &[])],
            vec![page("p1", "a", "One. Two."), page("p2", "a", "Three.")],
            vec![],
            vec![med("ibuprofen", true)],
        )
        .unwrap();
        let docs = kb.documents_for("a").unwrap();
        assert_eq!(docs.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["p1", "p2"]);
        assert_eq!(docs[0].sentences, vec!["One.", "Two."]);
        assert!(kb.documents_for("b").unwrap().is_empty());
        assert!(kb.exercises_for("b").unwrap().is_empty());
        assert!(matches!(kb.documents_for("zzz"), Err(KbError::NotFound { .. })));
        assert!(matches!(kb.exercises_for("zzz"), Err(KbError::NotFound { .. })));

        assert_eq!(kb.find_medication_exact("Ibuprofen").unwrap().name, "ibuprofen");
        assert_eq!(kb.find_medication_exact("  ibuprofen ").unwrap().name, "ibuprofen");
        assert!(kb.find_medication_exact("unobtainium").is_none());
    }
}
