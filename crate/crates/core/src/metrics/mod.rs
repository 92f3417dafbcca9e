//! Measurements over a finished campaign.
//!
//! Everything here is a pure function of accepted ideas and their vectors.
//! Batches are 1-based. Per-batch values that cannot be computed (a batch
//! with no accepted ideas) are `None` and treated as gaps downstream.

mod baseline;
mod coherence;
mod collapse;
mod confusion;
mod correlation;
mod edv;
mod novelty;
mod series;
mod strategy;

pub use baseline::{seed_rotation_baseline, PooledIdea, RotationOutcome};
pub use coherence::{category_coherence, Coherence};
pub use collapse::{collapse_rate, Collapse, DEFAULT_COLLAPSE_THRESHOLD, DEFAULT_COLLAPSE_WINDOW};
pub use confusion::{confusion_matrix, ConfusionMatrix2x2};
pub use correlation::{
    average_ranks, permutation_p_value, spearman, typicality_correlation, Typicality,
    DEFAULT_PERMUTATIONS,
};
pub use edv::{breadth, edv_batch, edv_series, edv_terms, EdvFormulation, EdvTerms};
pub use novelty::{batch_novelty, novelty_series};
pub use series::{edv_retention, rolling, MetricSeries, Retention, ROLLING_WINDOW};
pub use strategy::{per_strategy_stats, BatchStat, GroupStats, StrategyTable};

use alloc::vec::Vec;

use crate::hdbscan;
use crate::vector;

pub const CLUSTER_MILESTONES: [u32; 3] = [50, 100, 200];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("need at least {needed} batches, have {got}")]
    TooFewBatches { needed: u32, got: u32 },
    #[error("need at least {needed} ideas, have {got}")]
    TooFewIdeas { needed: usize, got: usize },
    #[error("no batch has a value")]
    NoData,
    #[error("first-batch value is zero")]
    ZeroBaseline,
    #[error("need at least two logs")]
    TooFewLogs,
}

/// Cosine similarity where a zero vector is orthogonal to everything.
pub(crate) fn sim(a: &[f64], b: &[f64]) -> f64 {
    vector::cosine(a, b).unwrap_or(0.0)
}

/// Cluster counts over all ideas accepted up to each milestone batch.
/// Milestones past the end of the run are skipped.
pub fn cluster_milestones(
    ideas: &[(u32, &[f64])],
    total_batches: u32,
    milestones: &[u32],
    min_cluster_size: usize,
) -> Vec<(u32, usize)> {
    milestones
        .iter()
        .filter(|&&m| m <= total_batches)
        .map(|&m| {
            let pts: Vec<&[f64]> = ideas
                .iter()
                .filter(|(b, _)| *b <= m)
                .map(|(_, v)| *v)
                .collect();
            (m, hdbscan::cluster_count(&pts, min_cluster_size))
        })
        .collect()
}

/// Splits `(batch, item)` pairs into per-batch groups `1..=total_batches`.
pub(crate) fn by_batch<T: Copy>(items: &[(u32, T)], total_batches: u32) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..total_batches).map(|_| Vec::new()).collect();
    for &(b, x) in items {
        if b >= 1 && b <= total_batches {
            out[(b - 1) as usize].push(x);
        }
    }
    out
}
