use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendError, BackendKind, CompletionBackend, CompletionRequest};

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "PHYSIO_LLM_API_KEY";

/// Generic chat-completion endpoint: POSTs
/// `{model, messages, temperature, max_tokens}` and reads
/// `choices[0].message.content` from the reply.
pub struct RemoteBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            model: model.into(),
            api_key,
            agent,
        }
    }

    /// Reads the secret from [`API_KEY_ENV`].
    pub fn from_env(url: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(url, model, key, timeout)
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(self.request_body(request)).map_err(map_transport)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status { status, body });
        }
        let payload: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        payload
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::InvalidResponse(payload.to_string()))
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }
}

fn map_transport(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        other => BackendError::Transport(other.to_string()),
    }
}
