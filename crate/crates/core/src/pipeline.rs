//! End-to-end handling of one user query.
//!
//! Stages, in order: cache lookup, validation, condition identification,
//! linking, document retrieval, answer generation, reference attribution,
//! exercise sampling, medication suggestion, assembly and cache write.
//! Validation fails closed; the medication stage degrades to an empty list.

use std::collections::HashSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{attribute_references, AnswerSentence, GroundedAnswer, GroundingError, DISCLAIMER};
use crate::kb_store::{cache_key, ExerciseRecord, KbError, KnowledgeBase, MedicationRecord, SourceDocument};
use crate::linker::{link_condition, link_medication, LinkResult, DEFAULT_FUZZY_THRESHOLD};
use crate::llm_gateway::{GatewayError, LlmGateway, MAX_PROMPT_DOCUMENTS};
use crate::text_index::{build_index, rank, Bm25Params};

/// Longest accepted query, in characters after trimming.
pub const MAX_QUERY_CHARS: usize = 2000;

pub const DEFAULT_RESPONSE: &str = "Sorry, I can only help with physiotherapy-related questions \
written in English. Please describe your pain, injury or rehabilitation question.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub top_docs: usize,
    pub max_exercises: usize,
    pub rng_seed: Option<u64>,
    pub default_response_text: String,
    pub fuzzy_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            top_docs: 5,
            max_exercises: 5,
            rng_seed: None,
            default_response_text: DEFAULT_RESPONSE.to_string(),
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.top_docs == 0 || self.top_docs > MAX_PROMPT_DOCUMENTS {
            return Err(PipelineError::Config(format!(
                "top_docs must be between 1 and {MAX_PROMPT_DOCUMENTS}, got {}",
                self.top_docs
            )));
        }
        if !(0.0..=1.0).contains(&self.fuzzy_threshold) {
            return Err(PipelineError::Config(format!(
                "fuzzy_threshold must be in [0, 1], got {}",
                self.fuzzy_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CacheLookup,
    Validation,
    ConditionIdentification,
    Linking,
    Retrieval,
    Generation,
    Attribution,
    Exercises,
    Medications,
    Assembly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

/// What happened while handling one query. Stages are listed in the
/// order they ran; stages that were not reached are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub stages: Vec<Stage>,
    pub validated: bool,
    pub identified_condition: Option<String>,
    pub link: LinkResult,
    pub retrieved_doc_ids: Vec<String>,
    pub cache_hit: bool,
    pub stage_errors: Vec<StageError>,
}

impl Default for PipelineTrace {
    fn default() -> Self {
        Self {
            stages: Vec::new(),
            validated: false,
            identified_condition: None,
            link: LinkResult::unlinked(),
            retrieved_doc_ids: Vec::new(),
            cache_hit: false,
            stage_errors: Vec::new(),
        }
    }
}

impl PipelineTrace {
    fn enter(&mut self, stage: Stage) {
        self.stages.push(stage);
    }

    fn error(&mut self, stage: Stage, message: impl ToString) {
        self.stage_errors.push(StageError {
            stage,
            message: message.to_string(),
        });
    }

    pub fn reached(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid query: {0}")]
    InvalidInput(String),
    #[error("answer generation failed: {0}")]
    Generation(#[from] GatewayError),
    #[error("reference attribution failed: {0}")]
    Attribution(#[from] GroundingError),
    #[error(transparent)]
    KnowledgeBase(#[from] KbError),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
}

/// Knowledge base, model gateway and configuration bundled together.
#[derive(Debug, Clone)]
pub struct Advisor {
    pub kb: Arc<KnowledgeBase>,
    pub gateway: LlmGateway,
    pub config: PipelineConfig,
}

impl Advisor {
    pub fn new(kb: Arc<KnowledgeBase>, gateway: LlmGateway, config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { kb, gateway, config })
    }

    pub fn handle(&self, query: &str) -> Result<(GroundedAnswer, PipelineTrace), PipelineError> {
        handle_query(query, &self.kb, &self.gateway, &self.config)
    }
}

pub fn default_response(config: &PipelineConfig) -> GroundedAnswer {
    GroundedAnswer {
        sentences: vec![AnswerSentence::plain(config.default_response_text.clone())],
        exercises: Vec::new(),
        medications: Vec::new(),
        grounded: false,
        disclaimer: DISCLAIMER.to_string(),
    }
}

pub fn handle_query(
    query: &str,
    kb: &KnowledgeBase,
    gateway: &LlmGateway,
    config: &PipelineConfig,
) -> Result<(GroundedAnswer, PipelineTrace), PipelineError> {
    let query = query.trim();
    if query.is_empty() {
        return Err(PipelineError::InvalidInput("query is empty".into()));
    }
    let chars = query.chars().count();
    if chars > MAX_QUERY_CHARS {
        return Err(PipelineError::InvalidInput(format!(
            "query has {chars} characters, at most {MAX_QUERY_CHARS} allowed"
        )));
    }

    let mut trace = PipelineTrace::default();

    trace.enter(Stage::CacheLookup);
    let key = cache_key(query);
    match kb.cache_get(&key) {
        Ok(Some(entry)) => match serde_json::from_str::<GroundedAnswer>(&entry.response) {
            Ok(answer) => {
                trace.cache_hit = true;
                return Ok((answer, trace));
            }
            Err(e) => trace.error(Stage::CacheLookup, e),
        },
        Ok(None) => {}
        Err(e) => trace.error(Stage::CacheLookup, e),
    }

    trace.enter(Stage::Validation);
    match gateway.validate_prompt(query) {
        Ok(true) => trace.validated = true,
        Ok(false) => return Ok((default_response(config), trace)),
        Err(e) => {
            trace.error(Stage::Validation, e);
            return Ok((default_response(config), trace));
        }
    }

    trace.enter(Stage::ConditionIdentification);
    let identified = match gateway.identify_condition(query) {
        Ok(name) => Some(name),
        Err(e) => {
            trace.error(Stage::ConditionIdentification, e);
            None
        }
    };
    trace.identified_condition = identified.clone();

    trace.enter(Stage::Linking);
    let link = identified
        .as_deref()
        .map_or_else(LinkResult::unlinked, |name| link_condition(kb, name));
    trace.link = link.clone();
    let Some(condition_id) = link.condition_id else {
        trace.enter(Stage::Generation);
        let text = gateway.answer_directly(query)?;
        return Ok((GroundedAnswer::ungrounded(&text), trace));
    };

    trace.enter(Stage::Retrieval);
    let documents = retrieve_documents(kb, &condition_id, query, config.top_docs)?;
    trace.retrieved_doc_ids = documents.iter().map(|d| d.id.clone()).collect();

    trace.enter(Stage::Generation);
    let (sentences, grounded) = if documents.is_empty() {
        // linked condition without curated pages
        let text = gateway.answer_directly(query)?;
        (GroundedAnswer::ungrounded(&text).sentences, false)
    } else {
        let text = gateway.generate_answer(query, &documents)?;
        trace.enter(Stage::Attribution);
        (attribute_references(&text, &documents)?, true)
    };

    trace.enter(Stage::Exercises);
    let exercises = match sample_exercises(kb, &condition_id, config.max_exercises, config.rng_seed) {
        Ok(ex) => ex,
        Err(e) => {
            trace.error(Stage::Exercises, e);
            Vec::new()
        }
    };

    trace.enter(Stage::Medications);
    let condition_name = kb
        .condition(&condition_id)
        .map_or(condition_id.as_str(), |c| c.canonical_name.as_str());
    let answer_text = sentences
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let medications = match gateway.suggest_medications(query, condition_name, &answer_text) {
        Ok(names) => resolve_medications(kb, &names, config.fuzzy_threshold),
        Err(e) => {
            trace.error(Stage::Medications, e);
            Vec::new()
        }
    };

    trace.enter(Stage::Assembly);
    let answer = GroundedAnswer {
        sentences,
        exercises,
        medications,
        grounded,
        disclaimer: DISCLAIMER.to_string(),
    };
    match serde_json::to_string(&answer) {
        Ok(serialized) => {
            if let Err(e) = kb.cache_put(&key, serialized) {
                trace.error(Stage::Assembly, e);
            }
        }
        Err(e) => trace.error(Stage::Assembly, e),
    }
    Ok((answer, trace))
}

/// Ranks the condition's pages by BM25 relevance of their full body to
/// the raw query and keeps the best `top_docs`. When no page shares a
/// token with the query, the first `top_docs` pages in ingest order are
/// used instead.
pub fn retrieve_documents<'kb>(
    kb: &'kb KnowledgeBase,
    condition_id: &str,
    query: &str,
    top_docs: usize,
) -> Result<Vec<&'kb SourceDocument>, KbError> {
    let pages = kb.documents_for(condition_id)?;
    let index = build_index(
        pages.iter().map(|d| (d.id.as_str(), d.body.as_str())),
        Bm25Params::default(),
    )
    .map_err(|e| KbError::Integrity(e.to_string()))?;
    let hits = rank(&index, query, top_docs);
    if hits.is_empty() {
        return Ok(pages.into_iter().take(top_docs).collect());
    }
    Ok(hits
        .iter()
        .filter_map(|hit| pages.iter().find(|d| d.id == hit.id).copied())
        .collect())
}

/// Uniform sample without replacement of up to `max_exercises` exercises,
/// returned in ingest order. A seed makes the draw reproducible.
pub fn sample_exercises(
    kb: &KnowledgeBase,
    condition_id: &str,
    max_exercises: usize,
    rng_seed: Option<u64>,
) -> Result<Vec<ExerciseRecord>, KbError> {
    let all = kb.exercises_for(condition_id)?;
    let amount = max_exercises.min(all.len());
    let mut rng = match rng_seed {
        Some(seed) => ChaCha8Rng::seed_from_u64(seed),
        None => ChaCha8Rng::from_rng(&mut rand::rng()),
    };
    let mut picked = rand::seq::index::sample(&mut rng, all.len(), amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i].clone()).collect())
}

/// Keeps only over-the-counter records, preserving order.
pub fn filter_otc(records: Vec<MedicationRecord>) -> Vec<MedicationRecord> {
    records.into_iter().filter(|m| m.otc).collect()
}

/// Links suggested names to knowledge-base records. Unknown names are
/// dropped, duplicates collapse to the first occurrence, and only OTC
/// records survive.
pub fn resolve_medications(kb: &KnowledgeBase, names: &[String], threshold: f64) -> Vec<MedicationRecord> {
    let mut seen = HashSet::new();
    let linked = names
        .iter()
        .filter_map(|name| link_medication(kb, name, threshold))
        .filter(|m| seen.insert(m.name.clone()))
        .cloned()
        .collect();
    filter_otc(linked)
}
