//! Embedding backends.

use std::sync::Arc;

use serde_json::{json, Value};

use dce_core::sim::SimWorld;
use dce_core::vector::Embedding;

use crate::backend::{BackendError, JsonClient};
use crate::generator::rough_tokens;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub embedding: Embedding,
    pub tokens: u64,
}

pub trait Embedder {
    fn model_id(&self) -> &str;

    fn embed(&mut self, text: &str) -> Result<Embedded, BackendError>;
}

/// Wraps an embedder and fails fatally on a vector of the wrong length.
pub struct Checked<E> {
    inner: E,
    dimension: usize,
}

impl<E: Embedder> Checked<E> {
    pub fn new(inner: E, dimension: usize) -> Self {
        Self { inner, dimension }
    }
}

impl<E: Embedder> Embedder for Checked<E> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn embed(&mut self, text: &str) -> Result<Embedded, BackendError> {
        let e = self.inner.embed(text)?;
        let got = e.embedding.dimension();
        if got != self.dimension {
            return Err(BackendError::Fatal(format!(
                "embedding dimension {got} differs from configured {}",
                self.dimension
            )));
        }
        Ok(e)
    }
}

pub struct SimEmbedder {
    world: Arc<SimWorld>,
    model_id: String,
}

impl SimEmbedder {
    pub fn new(world: Arc<SimWorld>) -> Self {
        let model_id = format!("sim-{}d-{:x}", world.dimension, world.seed);
        Self { world, model_id }
    }
}

impl Embedder for SimEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&mut self, text: &str) -> Result<Embedded, BackendError> {
        let v = self.world.embed_text(text);
        let embedding =
            Embedding::new(v, self.model_id.clone()).map_err(|e| BackendError::Fatal(e.to_string()))?;
        Ok(Embedded {
            embedding,
            tokens: rough_tokens(text),
        })
    }
}

/// Embeddings endpoint in the common `{"model", "input"}` wire format.
pub struct HttpEmbedder {
    client: JsonClient,
    model: String,
}

impl HttpEmbedder {
    pub fn new(client: JsonClient, model: impl Into<String>) -> Self {
        Self {
            client,
            model: model.into(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed(&mut self, text: &str) -> Result<Embedded, BackendError> {
        let reply = self.client.post(&json!({"model": self.model, "input": text}))?;
        let arr = reply
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Unparseable {
                reason: "no data[0].embedding".into(),
                raw: reply.to_string(),
            })?;
        let v: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
        let v = v.ok_or_else(|| BackendError::Unparseable {
            reason: "non-numeric embedding component".into(),
            raw: reply.to_string(),
        })?;
        let embedding =
            Embedding::new(v, self.model.clone()).map_err(|e| BackendError::Fatal(e.to_string()))?;
        let tokens = reply
            .pointer("/usage/prompt_tokens")
            .or_else(|| reply.pointer("/usage/total_tokens"))
            .and_then(Value::as_u64)
            .unwrap_or(0);
        Ok(Embedded { embedding, tokens })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dce_core::config::SimParams;

    fn world() -> Arc<SimWorld> {
        Arc::new(SimWorld::new(&SimParams {
            concepts: 50,
            ..SimParams::default()
        }))
    }

    #[test]
    fn sim_embedding_is_deterministic_and_tag_aware() {
        let w = world();
        let mut e = SimEmbedder::new(w.clone());
        let text = format!("{}: whatever", w.idea_name(3, 0));
        let a = e.embed(&text).unwrap();
        assert_eq!(a, e.embed(&text).unwrap());
        assert_eq!(a.embedding.vector(), &w.concept_vectors[3][..]);
    }

    #[test]
    fn dimension_guard() {
        let w = world();
        let mut e = Checked::new(SimEmbedder::new(w), 10);
        assert!(matches!(e.embed("x"), Err(BackendError::Fatal(_))));
    }
}
