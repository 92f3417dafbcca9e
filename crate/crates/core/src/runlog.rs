//! Record types written by a campaign and read back by analysis.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prompt::{Phase, StrategyKind};

pub const RUNLOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    VtsRejected,
    DedupRejected,
    ParseRejected,
}

/// One candidate returned by the generator, with every verdict it received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub batch: u32,
    pub slot: u32,
    pub name: String,
    pub description: String,
    pub category: String,
    /// Absent only for candidates that could not be parsed.
    pub probability: Option<f64>,
    pub strategy: Option<StrategyKind>,
    pub phase: Option<Phase>,
    /// `None` when tail sampling was disabled or never reached.
    pub vts_accepted: Option<bool>,
    /// Highest cosine similarity to memory at check time; absent if the
    /// candidate was never embedded.
    pub max_similarity: Option<f64>,
    pub nearest: Option<u64>,
    pub decision: Decision,
    pub reject_reason: Option<String>,
    /// Position in the memory store, for accepted candidates.
    pub accept_order: Option<u64>,
    /// Tokens reported by the embedding call for this candidate.
    pub embedding_tokens: u64,
}

/// Per-batch accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: u32,
    pub strategy: Option<StrategyKind>,
    pub phase: Option<Phase>,
    pub prompt_sha256: String,
    pub attempts: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub embedding_tokens: u64,
    pub generated: u32,
    /// Requested minus generated, when the backend under-produced.
    pub shortfall: u32,
    pub accepted: u32,
    pub vts_rejected: u32,
    pub dedup_rejected: u32,
    pub parse_rejected: u32,
    /// Set when every attempt failed and the batch produced nothing.
    pub failure: Option<BatchFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub reason: String,
    /// Last raw response, when one was received.
    pub raw: Option<String>,
}

impl BatchRecord {
    pub fn conserved(&self) -> bool {
        self.generated == self.accepted + self.vts_rejected + self.dedup_rejected + self.parse_rejected
    }
}

/// Tallies decisions of `records` belonging to `batch`.
pub fn tally(records: &[CandidateRecord], batch: u32) -> [u32; 4] {
    let mut t = [0u32; 4];
    for r in records.iter().filter(|r| r.batch == batch) {
        let i = match r.decision {
            Decision::Accepted => 0,
            Decision::VtsRejected => 1,
            Decision::DedupRejected => 2,
            Decision::ParseRejected => 3,
        };
        t[i] += 1;
    }
    t
}

/// An accepted idea joined with its stored vector.
#[derive(Debug, Clone, Copy)]
pub struct AcceptedView<'a> {
    pub batch: u32,
    pub probability: f64,
    pub category: &'a str,
    pub vector: &'a [f64],
}

/// Joins accepted records with vectors indexed by accept order. Records whose
/// order has no vector are skipped and counted in the second value.
pub fn accepted_views<'a, V: AsRef<[f64]>>(
    records: &'a [CandidateRecord],
    vectors: &'a [V],
) -> (Vec<AcceptedView<'a>>, usize) {
    let mut missing = 0;
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.decision == Decision::Accepted) {
        match (r.accept_order.and_then(|o| vectors.get(o as usize)), r.probability) {
            (Some(v), Some(p)) => out.push(AcceptedView {
                batch: r.batch,
                probability: p,
                category: &r.category,
                vector: v.as_ref(),
            }),
            _ => missing += 1,
        }
    }
    (out, missing)
}
