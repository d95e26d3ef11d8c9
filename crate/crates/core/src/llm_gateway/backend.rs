use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::templates::TemplateName;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("completion request timed out")]
    Timeout,
    #[error("completion endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("completion transport failure: {0}")]
    Transport(String),
    #[error("unexpected completion payload: {0}")]
    InvalidResponse(String),
    #[error("no mock script rule for template `{template}` and query {query:?}")]
    NoScriptRule { template: TemplateName, query: String },
    #[error("scripted backend failure: {0}")]
    Scripted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Remote => "remote",
            BackendKind::Mock => "mock",
        }
    }
}

/// One model call. `prompt` is the fully rendered template; `template` and
/// `query` let scripted backends pick a reply without parsing the prompt.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub template: TemplateName,
    pub query: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    fn kind(&self) -> BackendKind;
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read mock script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mock script line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One line of a mock script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub template: TemplateName,
    /// Case-insensitive substring of the user query; empty matches anything.
    #[serde(default)]
    pub query_substring: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    /// Simulated failure instead of a completion; `"timeout"` maps to
    /// [`BackendError::Timeout`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MockRule {
    pub fn reply(template: TemplateName, query_substring: &str, completion: &str) -> Self {
        Self {
            template,
            query_substring: query_substring.to_string(),
            completion: Some(completion.to_string()),
            error: None,
        }
    }

    pub fn failure(template: TemplateName, query_substring: &str, error: &str) -> Self {
        Self {
            template,
            query_substring: query_substring.to_string(),
            completion: None,
            error: Some(error.to_string()),
        }
    }

    fn matches(&self, request: &CompletionRequest) -> bool {
        self.template == request.template
            && request
                .query
                .to_lowercase()
                .contains(&self.query_substring.to_lowercase())
    }
}

/// Deterministic scripted backend. The first matching rule wins; no match
/// is an error. Counts every call it receives.
#[derive(Debug, Default)]
pub struct MockBackend {
    rules: Vec<MockRule>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self {
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self, ScriptError> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule = serde_json::from_str(line).map_err(|e| ScriptError::Malformed {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if rule.completion.is_some() == rule.error.is_some() {
                return Err(ScriptError::Malformed {
                    line: idx + 1,
                    message: "exactly one of `completion` or `error` is required".into(),
                });
            }
            rules.push(rule);
        }
        Ok(Self::new(rules))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl_str(&text)
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset_call_count(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rule = self
            .rules
            .iter()
            .find(|r| r.matches(request))
            .ok_or_else(|| BackendError::NoScriptRule {
                template: request.template,
                query: request.query.clone(),
            })?;
        match (&rule.completion, &rule.error) {
            (_, Some(e)) if e.eq_ignore_ascii_case("timeout") => Err(BackendError::Timeout),
            (_, Some(e)) => Err(BackendError::Scripted(e.clone())),
            (Some(c), None) => Ok(c.clone()),
            (None, None) => Err(BackendError::Scripted("rule has no completion".into())),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }
}
