use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One generated candidate with its self-assessed probability of being an
/// obvious completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Idea {
    pub name: String,
    pub description: String,
    pub category: String,
    pub probability: f64,
    pub batch_index: u32,
    pub slot_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdeaError {
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(String),
    #[error("batch index must be at least 1")]
    ZeroBatch,
}

impl Idea {
    /// Builds an idea, rejecting empty names/descriptions and probabilities
    /// outside the unit interval.
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        category: impl Into<String>,
        probability: f64,
        batch_index: u32,
        slot_index: u32,
    ) -> Result<Self, IdeaError> {
        let idea = Self {
            name: name.into(),
            description: description.into(),
            category: category.into(),
            probability,
            batch_index,
            slot_index,
        };
        idea.validate()?;
        Ok(idea)
    }

    pub fn validate(&self) -> Result<(), IdeaError> {
        if self.name.trim().is_empty() {
            return Err(IdeaError::EmptyField("name"));
        }
        if self.description.trim().is_empty() {
            return Err(IdeaError::EmptyField("description"));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(IdeaError::ProbabilityOutOfRange(alloc::format!(
                "{}",
                self.probability
            )));
        }
        if self.batch_index == 0 {
            return Err(IdeaError::ZeroBatch);
        }
        Ok(())
    }

    /// Text handed to the embedder: `"name: description"`.
    pub fn embedding_text(&self) -> String {
        alloc::format!("{}: {}", self.name, self.description)
    }
}
