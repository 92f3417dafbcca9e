use alloc::vec::Vec;

use super::{by_batch, edv::breadth};

/// Mean over `batch` of the minimum cosine distance to `prior`. An empty
/// prior gives 1.0; an empty batch gives `None`.
pub fn batch_novelty<B: AsRef<[f64]>, P: AsRef<[f64]>>(batch: &[B], prior: &[P]) -> Option<f64> {
    if batch.is_empty() {
        return None;
    }
    let total: f64 = batch.iter().map(|v| breadth(v.as_ref(), prior)).sum();
    Some(total / batch.len() as f64)
}

/// Novelty of each batch against every idea accepted in earlier batches.
pub fn novelty_series(ideas: &[(u32, &[f64])], total_batches: u32) -> Vec<Option<f64>> {
    let mut prior: Vec<&[f64]> = Vec::new();
    by_batch(ideas, total_batches)
        .into_iter()
        .map(|g| {
            let n = batch_novelty(&g, &prior);
            prior.extend(g);
            n
        })
        .collect()
}
