use alloc::vec::Vec;

use super::{sim, MetricError};
use crate::runlog::AcceptedView;

pub type PooledIdea<'a> = AcceptedView<'a>;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationOutcome {
    /// `(log, index within log)` in pooled order.
    pub order: Vec<(usize, usize)>,
    /// Parallel to `order`.
    pub kept: Vec<bool>,
    pub max_similarity: Vec<f64>,
}

impl RotationOutcome {
    pub fn pooled(&self) -> usize {
        self.order.len()
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }

    /// Surviving ideas in pooled order, keeping their original batch.
    pub fn survivors<'a>(&self, logs: &[Vec<PooledIdea<'a>>]) -> Vec<PooledIdea<'a>> {
        self.order
            .iter()
            .zip(&self.kept)
            .filter(|(_, k)| **k)
            .map(|(&(l, i), _)| logs[l][i])
            .collect()
    }
}

/// Interleaves the logs batch by batch (every idea of log 0 batch 1, then
/// log 1 batch 1, ...) and keeps an idea only if its similarity to every
/// idea kept so far is below `delta`.
pub fn seed_rotation_baseline(
    logs: &[Vec<PooledIdea<'_>>],
    delta: f64,
) -> Result<RotationOutcome, MetricError> {
    if logs.len() < 2 {
        return Err(MetricError::TooFewLogs);
    }
    let last = logs
        .iter()
        .flat_map(|l| l.iter().map(|i| i.batch))
        .max()
        .unwrap_or(0);
    let mut order = Vec::new();
    for b in 1..=last {
        for (l, log) in logs.iter().enumerate() {
            order.extend(
                log.iter()
                    .enumerate()
                    .filter(|(_, i)| i.batch == b)
                    .map(|(i, _)| (l, i)),
            );
        }
    }
    let mut kept_vectors: Vec<&[f64]> = Vec::new();
    let mut kept = Vec::with_capacity(order.len());
    let mut max_similarity = Vec::with_capacity(order.len());
    for &(l, i) in &order {
        let v = logs[l][i].vector;
        let m = kept_vectors
            .iter()
            .map(|k| sim(v, k))
            .fold(0.0f64, f64::max);
        let keep = m < delta;
        if keep {
            kept_vectors.push(v);
        }
        kept.push(keep);
        max_similarity.push(m);
    }
    Ok(RotationOutcome {
        order,
        kept,
        max_similarity,
    })
}
