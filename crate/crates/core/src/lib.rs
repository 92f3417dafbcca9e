//! Core algorithms for diversity-aware batch generation.
//!
//! This crate needs only `alloc`. File formats, network backends and the
//! command line live in the `dce` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod config;
pub mod hdbscan;
pub mod idea;
pub mod memory;
pub mod metrics;
pub mod prompt;
pub mod replay;
pub mod runlog;
pub mod sim;
pub mod vector;
pub mod vts;

pub use config::{Arm, BackendKind, CampaignConfig, ConfigError, SchemaMode, SimParams};
pub use idea::{Idea, IdeaError};
pub use memory::{DedupVerdict, MemoryEntry, MemoryError, SemanticIndex};
pub use prompt::{build_prompt, BuiltPrompt, Phase, PromptSignals, PromptTemplates, StrategyKind};
pub use runlog::{BatchFailure, BatchRecord, CandidateRecord, Decision};
pub use vector::{Embedding, VectorError};
pub use vts::VtsVerdict;
