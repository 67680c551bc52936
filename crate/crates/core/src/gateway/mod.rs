//! The single path through which model calls flow.
//!
//! Every call carries a JSON schema for its output. The gateway parses the
//! provider's raw text, drops members the schema does not declare, validates
//! the rest, and re-prompts with a repair message when parsing or validation
//! fails. Providers only ever see text in and text out.

mod http;
mod schema;
mod stub;
mod tokens;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use schema::{parse_model_json, strip_undeclared};
pub use stub::{StubProvider, StubScript};
pub use tokens::{estimate_tokens, TokenCount};

pub const DEFAULT_RETRY_LIMIT: u32 = 2;

pub const REPAIR_PROMPT: &str =
    "Your previous output was not valid JSON for the required schema. Output only valid JSON.";

/// Temperature for extraction, outcome generation and question generation.
pub const PIPELINE_TEMPERATURE: f64 = 0.0;
/// Temperature for free-form coaching chat.
pub const CHAT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            text: text.into(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub messages: Vec<Message>,
    pub output_schema: Value,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl LlmRequest {
    /// A system + user request at pipeline temperature.
    pub fn new(system: impl Into<String>, user: impl Into<String>, output_schema: Value) -> Self {
        LlmRequest {
            messages: vec![Message::system(system), Message::user(user)],
            output_schema,
            temperature: PIPELINE_TEMPERATURE,
            max_output_tokens: 2048,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, max: u32) -> Self {
        self.max_output_tokens = max;
        self
    }

    /// Hex SHA-256 of the concatenated message texts. Stub scripts are keyed by it.
    pub fn fingerprint(&self) -> String {
        fingerprint_messages(&self.messages)
    }

    fn check(&self) -> Result<jsonschema::JSONSchema, GatewayError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| GatewayError::InvalidRequest("messages must not be empty".into()))?;
        if first.role != Role::System {
            return Err(GatewayError::InvalidRequest(
                "first message must have role system".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        schema::compile(&self.output_schema)
            .map_err(|e| GatewayError::InvalidRequest(format!("invalid output schema: {e}")))
    }
}

pub fn fingerprint_messages(messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    for message in messages {
        hasher.update(message.text.as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One schema-constrained round trip, including every raw attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub request: LlmRequest,
    pub raw_responses: Vec<String>,
    pub parsed: Option<Value>,
    pub attempts: u32,
    pub provider_id: String,
}

/// What a provider sees for one attempt.
#[derive(Debug)]
pub struct ProviderCall<'a> {
    /// Messages for this attempt, including any repair prompts.
    pub request: &'a LlmRequest,
    /// Fingerprint of the original request, stable across repair attempts.
    pub fingerprint: &'a str,
    /// Zero-based attempt number.
    pub attempt: u32,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// Text-in, text-out model backend.
pub trait ModelProvider: Send + Sync {
    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError>;
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("model output violated the schema after {attempts} attempts: {reasons:?}")]
    SchemaViolation {
        attempts: u32,
        last_raw: String,
        reasons: Vec<String>,
    },
    #[error("provider `{provider_id}` unavailable: {message}")]
    ProviderUnavailable {
        provider_id: String,
        message: String,
    },
    #[error("no provider registered")]
    NoProvider,
    #[error("provider `{0}` already registered")]
    DuplicateProvider(String),
    #[error("provider id must not be empty")]
    EmptyProviderId,
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
}

impl GatewayError {
    /// Transport failures may succeed on a later call; schema failures will not.
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::ProviderUnavailable { .. })
    }
}

#[derive(Default)]
struct Registry {
    providers: BTreeMap<String, Arc<dyn ModelProvider>>,
    active: Option<String>,
}

/// Shared model gateway. Cheap to clone; clones share the provider registry.
#[derive(Clone)]
pub struct Gateway {
    registry: Arc<RwLock<Registry>>,
    retry_limit: u32,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("active", &self.active_provider())
            .field("retry_limit", &self.retry_limit)
            .finish()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Gateway {
            registry: Arc::default(),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn with_retry_limit(mut self, retry_limit: u32) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    pub fn retry_limit(&self) -> u32 {
        self.retry_limit
    }

    /// Registers a provider and makes it the active one.
    pub fn register_provider(
        &self,
        provider_id: &str,
        provider: Arc<dyn ModelProvider>,
    ) -> Result<(), GatewayError> {
        if provider_id.trim().is_empty() {
            return Err(GatewayError::EmptyProviderId);
        }
        let mut registry = self.registry.write().expect("provider registry poisoned");
        if registry.providers.contains_key(provider_id) {
            return Err(GatewayError::DuplicateProvider(provider_id.to_string()));
        }
        registry.providers.insert(provider_id.to_string(), provider);
        registry.active = Some(provider_id.to_string());
        Ok(())
    }

    /// Switches routing to an already registered provider.
    pub fn activate(&self, provider_id: &str) -> Result<(), GatewayError> {
        let mut registry = self.registry.write().expect("provider registry poisoned");
        if !registry.providers.contains_key(provider_id) {
            return Err(GatewayError::UnknownProvider(provider_id.to_string()));
        }
        registry.active = Some(provider_id.to_string());
        Ok(())
    }

    pub fn active_provider(&self) -> Option<String> {
        self.registry
            .read()
            .expect("provider registry poisoned")
            .active
            .clone()
    }

    fn current(&self) -> Result<(String, Arc<dyn ModelProvider>), GatewayError> {
        let registry = self.registry.read().expect("provider registry poisoned");
        let id = registry.active.clone().ok_or(GatewayError::NoProvider)?;
        let provider = registry.providers[&id].clone();
        Ok((id, provider))
    }

    /// Runs `request` against the active provider until the output parses and
    /// validates, re-prompting at most `retry_limit` times.
    pub fn complete_structured(&self, request: LlmRequest) -> Result<LlmExchange, GatewayError> {
        let compiled = request.check()?;
        let (provider_id, provider) = self.current()?;
        let fingerprint = request.fingerprint();

        let mut attempt_request = request.clone();
        let mut raw_responses = Vec::new();
        let mut reasons = Vec::new();
        for attempt in 0..=self.retry_limit {
            let call = ProviderCall {
                request: &attempt_request,
                fingerprint: &fingerprint,
                attempt,
            };
            let raw = provider
                .complete(&call)
                .map_err(|e| GatewayError::ProviderUnavailable {
                    provider_id: provider_id.clone(),
                    message: e.0,
                })?;
            raw_responses.push(raw.clone());

            reasons = match schema::parse_model_json(&raw) {
                Ok(mut value) => {
                    schema::strip_undeclared(&mut value, &request.output_schema);
                    let found = schema::violations(&compiled, &value);
                    if found.is_empty() {
                        return Ok(LlmExchange {
                            request,
                            attempts: raw_responses.len() as u32,
                            raw_responses,
                            parsed: Some(value),
                            provider_id,
                        });
                    }
                    found
                }
                Err(e) => vec![format!("not JSON: {e}")],
            };
            tracing::debug!(attempt, ?reasons, "model output rejected");
            attempt_request.messages.push(Message::user(REPAIR_PROMPT));
        }

        Err(GatewayError::SchemaViolation {
            attempts: raw_responses.len() as u32,
            last_raw: raw_responses.pop().unwrap_or_default(),
            reasons,
        })
    }

    /// `complete_structured` followed by deserialization into `T`.
    pub fn complete_as<T: serde::de::DeserializeOwned>(
        &self,
        request: LlmRequest,
    ) -> Result<(T, LlmExchange), GatewayError> {
        let exchange = self.complete_structured(request)?;
        let parsed = exchange.parsed.clone().unwrap_or(Value::Null);
        let typed = serde_json::from_value(parsed).map_err(|e| GatewayError::SchemaViolation {
            attempts: exchange.attempts,
            last_raw: exchange.raw_responses.last().cloned().unwrap_or_default(),
            reasons: vec![format!("output does not fit the expected shape: {e}")],
        })?;
        Ok((typed, exchange))
    }
}
