//! Idea generation backends.

mod http;
pub mod parse;

use std::sync::Arc;

use dce_core::config::SchemaMode;
use dce_core::sim::{sim_generate, SimState, SimStateSnapshot, SimWorld};
use dce_core::BuiltPrompt;

pub use self::http::HttpGenerator;
pub use self::parse::{parse_structured, NoConformingObject, ParseOutcome, ParseRejection};
pub use crate::backend::BackendError;

pub struct GenerationRequest<'a> {
    pub prompt: &'a BuiltPrompt,
    pub batch_size: usize,
    pub batch_index: u32,
    pub schema_mode: SchemaMode,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generation {
    pub outcome: ParseOutcome,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

pub trait Generator {
    fn generate(&mut self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError>;

    /// Internal state to carry across a checkpoint, if any.
    fn state(&self) -> Option<serde_json::Value> {
        None
    }

    fn restore_state(&mut self, _state: &serde_json::Value) -> Result<(), String> {
        Ok(())
    }
}

/// Whitespace-separated word count, used as a token estimate by the
/// simulated backends.
pub fn rough_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Simulated generator. Reads the structured prompt signals, samples from
/// the world, then renders and re-parses a schema response so the parser
/// sits on the same path as for a hosted backend.
pub struct SimGenerator {
    world: Arc<SimWorld>,
    state: SimState,
    compliance: f64,
}

impl SimGenerator {
    pub fn new(world: Arc<SimWorld>, seed: u64, compliance: f64) -> Self {
        Self {
            world,
            state: SimState::new(seed),
            compliance,
        }
    }

    pub fn world(&self) -> &Arc<SimWorld> {
        &self.world
    }
}

impl Generator for SimGenerator {
    fn generate(&mut self, req: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        let draws = sim_generate(
            &self.world,
            &req.prompt.signals,
            req.batch_size,
            req.batch_index,
            self.compliance,
            &mut self.state,
        );
        let ideas: Vec<_> = draws.into_iter().map(|d| d.idea).collect();
        let raw = parse::render_batch(&ideas);
        let outcome = parse_structured(&raw, req.batch_size, req.batch_index).map_err(|e| {
            BackendError::Unparseable {
                reason: e.to_string(),
                raw: raw.clone(),
            }
        })?;
        Ok(Generation {
            outcome,
            prompt_tokens: rough_tokens(&req.prompt.text),
            completion_tokens: rough_tokens(&raw),
        })
    }

    fn state(&self) -> Option<serde_json::Value> {
        serde_json::to_value(self.state.snapshot()).ok()
    }

    fn restore_state(&mut self, state: &serde_json::Value) -> Result<(), String> {
        let snap: SimStateSnapshot =
            serde_json::from_value(state.clone()).map_err(|e| e.to_string())?;
        self.state = SimState::restore(&snap);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dce_core::config::SimParams;
    use dce_core::PromptSignals;

    fn prompt() -> BuiltPrompt {
        BuiltPrompt {
            text: "Generate ideas".into(),
            signals: PromptSignals::default(),
        }
    }

    #[test]
    fn sim_probabilities_are_percentiles() {
        let world = Arc::new(SimWorld::new(&SimParams {
            concepts: 300,
            ..SimParams::default()
        }));
        let mut g = SimGenerator::new(world.clone(), 7, 0.9);
        let p = prompt();
        let req = GenerationRequest {
            prompt: &p,
            batch_size: 5,
            batch_index: 1,
            schema_mode: SchemaMode::NativeStructured,
        };
        let out = g.generate(&req).unwrap();
        assert_eq!(out.outcome.ideas.len(), 5);
        let mut reference = SimState::new(7);
        let draws = sim_generate(&world, &p.signals, 5, 1, 0.9, &mut reference);
        for (idea, d) in out.outcome.ideas.iter().zip(&draws) {
            assert_eq!(idea.probability, world.percentile(d.concept));
            assert_eq!(idea, &d.idea);
        }
        assert!(out.prompt_tokens > 0 && out.completion_tokens > 0);
    }

    #[test]
    fn sim_state_survives_snapshot() {
        let world = Arc::new(SimWorld::new(&SimParams {
            concepts: 100,
            ..SimParams::default()
        }));
        let p = prompt();
        let req = GenerationRequest {
            prompt: &p,
            batch_size: 5,
            batch_index: 1,
            schema_mode: SchemaMode::NativeStructured,
        };
        let mut a = SimGenerator::new(world.clone(), 1, 0.9);
        a.generate(&req).unwrap();
        let snap = a.state().unwrap();
        let mut b = SimGenerator::new(world, 99, 0.9);
        b.restore_state(&snap).unwrap();
        assert_eq!(a.generate(&req).unwrap(), b.generate(&req).unwrap());
    }
}
