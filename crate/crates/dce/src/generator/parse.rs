//! Structured-output parsing with extraction from prose and code fences.

use serde_json::Value;

use dce_core::Idea;

/// An item the parser could not turn into an [`Idea`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParseRejection {
    pub slot: u32,
    pub name: String,
    pub description: String,
    pub category: String,
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub ideas: Vec<Idea>,
    pub rejections: Vec<ParseRejection>,
}

impl ParseOutcome {
    /// Items in the response, parsed or not.
    pub fn generated(&self) -> usize {
        self.ideas.len() + self.rejections.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no object with an \"ideas\" array in the response")]
pub struct NoConformingObject;

/// JSON schema for one batch, as sent to backends.
pub fn batch_schema() -> Value {
    serde_json::json!({
        "type": "object",
        "properties": {
            "ideas": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string"},
                        "description": {"type": "string"},
                        "category": {"type": "string"},
                        "probability": {"type": "number", "minimum": 0.0, "maximum": 1.0}
                    },
                    "required": ["name", "description", "category", "probability"],
                    "additionalProperties": false
                }
            }
        },
        "required": ["ideas"],
        "additionalProperties": false
    })
}

fn conforming(v: Value) -> Option<Vec<Value>> {
    match v {
        Value::Object(mut m) => match m.remove("ideas") {
            Some(Value::Array(items)) => Some(items),
            _ => None,
        },
        _ => None,
    }
}

/// Contents of each ``` fenced block, language tag stripped.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    out
}

/// First JSON object in `text` carrying an `ideas` array.
fn first_conforming(text: &str) -> Option<Vec<Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            if let Some(items) = conforming(v) {
                return Some(items);
            }
        }
    }
    None
}

fn extract(raw: &str) -> Option<Vec<Value>> {
    if let Ok(v) = serde_json::from_str::<Value>(raw.trim()) {
        if let Some(items) = conforming(v) {
            return Some(items);
        }
    }
    fenced_blocks(raw)
        .into_iter()
        .find_map(first_conforming)
        .or_else(|| first_conforming(raw))
}

fn text_field(item: &Value, key: &str) -> Result<String, String> {
    match item.get(key) {
        None | Some(Value::Null) => Err(format!("missing {key}")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("{key} is not a string")),
    }
}

fn loose_text(item: &Value, key: &str) -> String {
    item.get(key).and_then(Value::as_str).unwrap_or_default().to_string()
}

fn validate(item: &Value, batch_index: u32, slot: u32) -> Result<Idea, String> {
    if !item.is_object() {
        return Err("item is not an object".into());
    }
    let name = text_field(item, "name")?;
    let description = text_field(item, "description")?;
    let category = text_field(item, "category")?;
    let probability = match item.get("probability") {
        None | Some(Value::Null) => return Err("missing probability".into()),
        Some(Value::Number(n)) => n.as_f64().ok_or("probability is not a finite number")?,
        Some(_) => return Err("probability is not a number".into()),
    };
    Idea::new(name, description, category, probability, batch_index, slot).map_err(|e| e.to_string())
}

/// Parses a raw backend response. Item `i` of the `ideas` array gets slot
/// `i`; items past `expected_count` are rejected.
pub fn parse_structured(
    raw: &str,
    expected_count: usize,
    batch_index: u32,
) -> Result<ParseOutcome, NoConformingObject> {
    let items = extract(raw).ok_or(NoConformingObject)?;
    let mut out = ParseOutcome::default();
    for (i, item) in items.iter().enumerate() {
        let slot = i as u32;
        let verdict = if i >= expected_count {
            Err(format!("exceeds batch size {expected_count}"))
        } else {
            validate(item, batch_index, slot)
        };
        match verdict {
            Ok(idea) => out.ideas.push(idea),
            Err(reason) => out.rejections.push(ParseRejection {
                slot,
                name: loose_text(item, "name"),
                description: loose_text(item, "description"),
                category: loose_text(item, "category"),
                raw: item.to_string(),
                reason,
            }),
        }
    }
    Ok(out)
}

/// Serializes ideas in the batch schema.
pub fn render_batch(ideas: &[Idea]) -> String {
    let items: Vec<Value> = ideas
        .iter()
        .map(|i| {
            serde_json::json!({
                "name": i.name,
                "description": i.description,
                "category": i.category,
                "probability": i.probability,
            })
        })
        .collect();
    serde_json::json!({ "ideas": items }).to_string()
}
