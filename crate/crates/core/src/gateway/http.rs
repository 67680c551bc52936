use std::time::Duration;

use serde_json::{json, Value};

use super::{ModelProvider, ProviderCall, ProviderError, Role};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
}

impl HttpProviderConfig {
    /// Reads `LLM_BASE_URL`, `LLM_API_KEY` and `LLM_MODEL`.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var("LLM_BASE_URL").ok()?;
        Some(HttpProviderConfig {
            base_url,
            api_key: std::env::var("LLM_API_KEY").ok(),
            model: std::env::var("LLM_MODEL").unwrap_or_else(|_| "gpt-4o-mini".to_string()),
        })
    }
}

/// Client for a chat-completions style endpoint (`POST {base}/chat/completions`).
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        HttpProvider { config, agent }
    }

    pub fn request_body(&self, call: &ProviderCall<'_>) -> Value {
        let messages: Vec<Value> = call
            .request
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": m.text})
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": call.request.temperature,
            "max_tokens": call.request.max_output_tokens,
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": "output", "schema": call.request.output_schema}
            }
        })
    }
}

impl ModelProvider for HttpProvider {
    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let response: Value = req
            .send_json(self.request_body(call))
            .map_err(|e| ProviderError(e.to_string()))?
            .into_json()
            .map_err(|e| ProviderError(e.to_string()))?;
        response
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError("response has no choices[0].message.content".into()))
    }
}
