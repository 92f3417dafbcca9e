use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{sim, MetricError};

pub const DEFAULT_COLLAPSE_WINDOW: u32 = 50;
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub threshold: f64,
    pub window: u32,
    pub late_ideas: usize,
    pub collapsed: usize,
    /// Zero when the late window holds no ideas.
    pub percent: f64,
}

/// Share of ideas from the last `window` batches whose similarity to some
/// idea of the first `window` batches is strictly above `threshold`.
pub fn collapse_rate(
    ideas: &[(u32, &[f64])],
    total_batches: u32,
    threshold: f64,
    window: u32,
) -> Result<Collapse, MetricError> {
    let needed = window.saturating_mul(2).max(2);
    if total_batches < needed {
        return Err(MetricError::TooFewBatches {
            needed,
            got: total_batches,
        });
    }
    let late_start = total_batches - window + 1;
    let early: Vec<&[f64]> = ideas
        .iter()
        .filter(|(b, _)| *b >= 1 && *b <= window)
        .map(|(_, v)| *v)
        .collect();
    let late: Vec<&[f64]> = ideas
        .iter()
        .filter(|(b, _)| *b >= late_start && *b <= total_batches)
        .map(|(_, v)| *v)
        .collect();
    let collapsed = late
        .iter()
        .filter(|l| early.iter().any(|e| sim(l, e) > threshold))
        .count();
    let percent = if late.is_empty() {
        0.0
    } else {
        100.0 * collapsed as f64 / late.len() as f64
    };
    Ok(Collapse {
        threshold,
        window,
        late_ideas: late.len(),
        collapsed,
        percent,
    })
}
