use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ModelProvider, ProviderCall, ProviderError};

/// Scripted responses keyed by request fingerprint.
///
/// File shape:
///
/// ```json
/// {
///   "version": 1,
///   "scripts": {
///     "<fingerprint>": { "label": "resume chunk 0", "responses": [ {...}, "raw text" ] }
///   }
/// }
/// ```
///
/// A response given as a JSON string is returned verbatim; any other JSON
/// value is returned in compact serialized form. Successive calls with the
/// same fingerprint walk the list and then keep returning the last entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubScript {
    #[serde(default = "default_version")]
    pub version: u32,
    pub scripts: BTreeMap<String, ScriptEntry>,
}

fn default_version() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub responses: Vec<Value>,
}

impl StubScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Adds raw-text responses for a fingerprint.
    pub fn insert(&mut self, fingerprint: &str, responses: Vec<String>) {
        self.insert_values(
            fingerprint,
            None,
            responses.into_iter().map(Value::String).collect(),
        );
    }

    pub fn insert_values(
        &mut self,
        fingerprint: &str,
        label: Option<String>,
        responses: Vec<Value>,
    ) {
        self.scripts
            .insert(fingerprint.to_string(), ScriptEntry { label, responses });
    }

    /// Appends all entries of `other`, replacing on fingerprint collision.
    pub fn extend(&mut self, other: StubScript) {
        self.scripts.extend(other.scripts);
    }
}

fn render(value: &Value) -> String {
    match value {
        Value::String(text) => text.clone(),
        other => other.to_string(),
    }
}

/// Deterministic offline provider driven by a [`StubScript`].
#[derive(Debug)]
pub struct StubProvider {
    script: StubScript,
    cursors: Mutex<BTreeMap<String, usize>>,
}

impl StubProvider {
    pub fn new(script: StubScript) -> Self {
        StubProvider {
            script,
            cursors: Mutex::default(),
        }
    }
}

impl ModelProvider for StubProvider {
    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        let entry = self.script.scripts.get(call.fingerprint).ok_or_else(|| {
            ProviderError(format!(
                "stub has no script for fingerprint {}",
                call.fingerprint
            ))
        })?;
        if entry.responses.is_empty() {
            return Err(ProviderError(format!(
                "stub script for {} has no responses",
                call.fingerprint
            )));
        }
        let mut cursors = self.cursors.lock().expect("stub cursor poisoned");
        let cursor = cursors.entry(call.fingerprint.to_string()).or_insert(0);
        let index = (*cursor).min(entry.responses.len() - 1);
        *cursor += 1;
        Ok(render(&entry.responses[index]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, LlmRequest};
    use serde_json::json;
    use std::sync::Arc;

    #[test]
    fn file_format_accepts_values_and_strings() {
        let text = r#"{"version":1,"scripts":{"abc":{"responses":[{"a":1},"raw"]}}}"#;
        let script = StubScript::from_json(text).unwrap();
        let stub = StubProvider::new(script);
        let req = LlmRequest::new("s", "u", json!({}));
        let call = |attempt| ProviderCall {
            request: &req,
            fingerprint: "abc",
            attempt,
        };
        assert_eq!(stub.complete(&call(0)).unwrap(), r#"{"a":1}"#);
        assert_eq!(stub.complete(&call(1)).unwrap(), "raw");
        assert_eq!(stub.complete(&call(2)).unwrap(), "raw");
    }

    #[test]
    fn same_script_same_sequence_same_exchanges() {
        let schema =
            json!({"type": "object", "properties": {"n": {"type": "integer"}}, "required": ["n"]});
        let requests: Vec<LlmRequest> = (0..4)
            .map(|i| LlmRequest::new("count", format!("item {i}"), schema.clone()))
            .collect();
        let mut script = StubScript::default();
        for (i, req) in requests.iter().enumerate() {
            script.insert(
                &req.fingerprint(),
                vec!["garbage".into(), format!("{{\"n\":{i},\"x\":0}}")],
            );
        }
        let run = || {
            let gateway = Gateway::new();
            gateway
                .register_provider("stub", Arc::new(StubProvider::new(script.clone())))
                .unwrap();
            requests
                .iter()
                .map(|r| {
                    serde_json::to_string(&gateway.complete_structured(r.clone()).unwrap()).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
