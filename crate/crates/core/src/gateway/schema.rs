use jsonschema::JSONSchema;
use serde_json::{Map, Value};

/// Compiles a schema document, returning the compiler's message on failure.
pub fn compile(schema: &Value) -> Result<JSONSchema, String> {
    JSONSchema::compile(schema).map_err(|e| e.to_string())
}

/// Validation messages for `instance`; empty when valid.
pub fn violations(schema: &JSONSchema, instance: &Value) -> Vec<String> {
    match schema.validate(instance) {
        Ok(()) => Vec::new(),
        Err(errors) => errors
            .map(|e| format!("{}: {}", e.instance_path, e))
            .collect(),
    }
}

/// Removes object members the schema does not declare under `properties`,
/// recursing through `properties` and `items`. Objects whose schema allows
/// arbitrary members (`additionalProperties` true or a sub-schema) are left alone.
pub fn strip_undeclared(value: &mut Value, schema: &Value) {
    let Some(schema) = schema.as_object() else {
        return;
    };
    match value {
        Value::Object(members) => {
            let Some(Value::Object(props)) = schema.get("properties") else {
                return;
            };
            let open = matches!(
                schema.get("additionalProperties"),
                Some(Value::Bool(true)) | Some(Value::Object(_))
            );
            if !open {
                members.retain(|key, _| props.contains_key(key));
            }
            strip_members(members, props);
        }
        Value::Array(items) => {
            if let Some(item_schema) = schema.get("items") {
                for item in items {
                    strip_undeclared(item, item_schema);
                }
            }
        }
        _ => {}
    }
}

fn strip_members(members: &mut Map<String, Value>, props: &Map<String, Value>) {
    for (key, child) in members.iter_mut() {
        if let Some(child_schema) = props.get(key) {
            strip_undeclared(child, child_schema);
        }
    }
}

/// Parses model output as JSON, tolerating a surrounding markdown code fence.
pub fn parse_model_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    let body = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|rest| rest.trim_end().strip_suffix("```"))
        .unwrap_or(trimmed);
    serde_json::from_str(body.trim()).map_err(|e| e.to_string())
}
