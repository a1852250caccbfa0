use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendFailure, CompletionBackend, CompletionRequest};

pub const ENDPOINT_ENV: &str = "SYNTHGOV_ENDPOINT";
pub const API_KEY_ENV: &str = "SYNTHGOV_API_KEY";

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_output_words: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Minimal JSON-over-HTTP adapter: POST `{model, prompt, temperature,
/// max_output_words}`, expect `{"text": ...}` back.
pub struct RemoteBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendFailure::Unavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }

    /// Endpoint and credential from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, BackendFailure> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .map_err(|_| BackendFailure::Rejected(format!("{ENDPOINT_ENV} is not set")))?;
        Self::new(endpoint, std::env::var(API_KEY_ENV).ok(), timeout)
    }
}

impl CompletionBackend for RemoteBackend {
    fn backend_id(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendFailure> {
        let body = WireRequest {
            model: &request.model_id,
            prompt: &request.bundle.rendered,
            temperature: request.temperature,
            max_output_words: request.max_output_words,
        };
        let mut call = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| BackendFailure::Unavailable(e.without_url().to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(BackendFailure::Throttled);
        }
        if status.is_server_error() {
            return Err(BackendFailure::Unavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendFailure::Rejected(format!("HTTP {status}")));
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| BackendFailure::Rejected(format!("malformed response: {}", e.without_url())))?;
        Ok(parsed.text)
    }
}
