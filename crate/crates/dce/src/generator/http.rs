//! Chat-completion adapter.

use serde_json::{json, Value};

use super::parse::{batch_schema, parse_structured};
use super::{Generation, GenerationRequest, Generator};
use crate::backend::{BackendError, JsonClient};

pub struct HttpGenerator {
    client: JsonClient,
    model: String,
}

impl HttpGenerator {
    pub fn new(client: JsonClient, model: impl Into<String>) -> Self {
        Self {
            client,
            model: model.into(),
        }
    }

    pub fn request_body(&self, req: &GenerationRequest<'_>) -> Value {
        use dce_core::SchemaMode;
        let user = json!({"role": "user", "content": req.prompt.text});
        match req.schema_mode {
            SchemaMode::NativeStructured => json!({
                "model": self.model,
                "messages": [user],
                "response_format": {
                    "type": "json_schema",
                    "json_schema": {"name": "idea_batch", "strict": true, "schema": batch_schema()}
                }
            }),
            SchemaMode::SchemaInSystemPrompt => {
                let system = format!(
                    "Respond with a single JSON object and nothing else. It must match this JSON schema:\n{}",
                    batch_schema()
                );
                json!({
                    "model": self.model,
                    "messages": [{"role": "system", "content": system}, user]
                })
            }
        }
    }
}

fn usage(v: &Value, key: &str) -> u64 {
    v.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0)
}

impl Generator for HttpGenerator {
    fn generate(&mut self, req: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        let reply = self.client.post(&self.request_body(req))?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Unparseable {
                reason: "no choices[0].message.content".into(),
                raw: reply.to_string(),
            })?;
        let outcome = parse_structured(content, req.batch_size, req.batch_index).map_err(|e| {
            BackendError::Unparseable {
                reason: e.to_string(),
                raw: content.to_string(),
            }
        })?;
        Ok(Generation {
            outcome,
            prompt_tokens: usage(&reply, "prompt_tokens"),
            completion_tokens: usage(&reply, "completion_tokens"),
        })
    }
}
