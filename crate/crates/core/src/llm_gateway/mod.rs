//! Every interaction with the generative model goes through here: prompt
//! templates, the completion backend, and strict parsing of replies.
//! Nothing else in the crate builds prompts or reads raw completions.

mod backend;
mod parse;
mod remote;
mod templates;

use std::sync::Arc;

use thiserror::Error;

use crate::kb_store::SourceDocument;
use crate::text_index::tokenize;

pub use backend::{
    BackendError, BackendKind, CompletionBackend, CompletionRequest, MockBackend, MockRule,
    ScriptError,
};
pub use parse::{parse_boolean, parse_string_list, ParseError};
pub use remote::{RemoteBackend, API_KEY_ENV};
pub use templates::{template, PromptTemplate, TemplateError, TemplateName};

/// Longest accepted condition name, in tokens.
pub const MAX_CONDITION_TOKENS: usize = 8;

/// Upper bound on documents embedded in one answer prompt.
pub const MAX_PROMPT_DOCUMENTS: usize = 5;

const TEMPERATURE: f32 = 0.0;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("condition identification failed: {0}")]
    Identification(String),
    #[error("answer generation failed: {0}")]
    Generation(String),
    #[error("invalid gateway input: {0}")]
    Precondition(String),
}

#[derive(Clone)]
pub struct LlmGateway {
    backend: Arc<dyn CompletionBackend>,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway")
            .field("backend", &self.backend.kind())
            .finish()
    }
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self { backend }
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    fn call(
        &self,
        name: TemplateName,
        query: &str,
        values: &[(&str, &str)],
        max_tokens: u32,
    ) -> Result<String, GatewayError> {
        let prompt = template(name).render(values)?;
        let request = CompletionRequest {
            template: name,
            query: query.to_string(),
            prompt,
            max_tokens,
            temperature: TEMPERATURE,
        };
        Ok(self.backend.complete(&request)?)
    }

    /// Asks whether `query` is an English, physiotherapy-related prompt.
    pub fn validate_prompt(&self, query: &str) -> Result<bool, GatewayError> {
        require_non_empty("query", query)?;
        let reply = self.call(TemplateName::Validation, query, &[("query", query)], 5)?;
        Ok(parse_boolean(&reply)?)
    }

    /// Few-shot condition identification. The reply is trimmed, unquoted
    /// and lowercased, and must be between 1 and
    /// [`MAX_CONDITION_TOKENS`] tokens long.
    pub fn identify_condition(&self, query: &str) -> Result<String, GatewayError> {
        require_non_empty("query", query)?;
        let reply = self.call(
            TemplateName::ConditionIdentification,
            query,
            &[("query", query)],
            20,
        )?;
        let name = reply
            .trim()
            .trim_matches(|c| matches!(c, '"' | '\'' | '`' | '\u{201c}' | '\u{201d}'))
            .trim()
            .to_lowercase();
        let tokens = tokenize(&name).len();
        if tokens == 0 {
            return Err(GatewayError::Identification("empty reply".into()));
        }
        if tokens > MAX_CONDITION_TOKENS {
            return Err(GatewayError::Identification(format!(
                "reply has {tokens} tokens, at most {MAX_CONDITION_TOKENS} allowed"
            )));
        }
        Ok(name)
    }

    /// Grounded answer over 1 to [`MAX_PROMPT_DOCUMENTS`] pages.
    pub fn generate_answer(
        &self,
        query: &str,
        documents: &[&SourceDocument],
    ) -> Result<String, GatewayError> {
        require_non_empty("query", query)?;
        if documents.is_empty() || documents.len() > MAX_PROMPT_DOCUMENTS {
            return Err(GatewayError::Precondition(format!(
                "answer generation needs 1 to {MAX_PROMPT_DOCUMENTS} documents, got {}",
                documents.len()
            )));
        }
        let rendered = render_documents(documents);
        let reply = self.call(
            TemplateName::AnswerGeneration,
            query,
            &[("documents", &rendered), ("query", query)],
            700,
        )?;
        non_empty_reply(reply)
    }

    /// Answer without supporting pages, for queries whose condition is not
    /// in the knowledge base.
    pub fn answer_directly(&self, query: &str) -> Result<String, GatewayError> {
        require_non_empty("query", query)?;
        let reply = self.call(TemplateName::DirectAnswer, query, &[("query", query)], 500)?;
        non_empty_reply(reply)
    }

    /// Medication names suggested for the query. May be empty.
    pub fn suggest_medications(
        &self,
        query: &str,
        condition: &str,
        answer: &str,
    ) -> Result<Vec<String>, GatewayError> {
        require_non_empty("query", query)?;
        require_non_empty("condition", condition)?;
        require_non_empty("answer", answer)?;
        let reply = self.call(
            TemplateName::MedicationSuggestion,
            query,
            &[("query", query), ("condition", condition), ("answer", answer)],
            200,
        )?;
        Ok(parse_string_list(&reply)?)
    }
}

/// `[title] (url)` header followed by the body, one block per page.
fn render_documents(documents: &[&SourceDocument]) -> String {
    documents
        .iter()
        .map(|d| format!("[{}] ({})\n{}", d.title, d.url, d.body))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn require_non_empty(field: &str, value: &str) -> Result<(), GatewayError> {
    if value.trim().is_empty() {
        Err(GatewayError::Precondition(format!("`{field}` must not be empty")))
    } else {
        Ok(())
    }
}

fn non_empty_reply(reply: String) -> Result<String, GatewayError> {
    let trimmed = reply.trim();
    if trimmed.is_empty() {
        Err(GatewayError::Generation("empty completion".into()))
    } else {
        Ok(trimmed.to_string())
    }
}
