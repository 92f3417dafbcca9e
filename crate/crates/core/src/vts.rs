//! Verbalized tail sampling: keep only candidates whose self-assessed
//! probability falls below the threshold.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::idea::Idea;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtsVerdict {
    pub accepted: bool,
    pub probability: f64,
    pub tau: f64,
}

impl VtsVerdict {
    /// `probability >= tau` is rejected.
    pub fn judge(probability: f64, tau: f64) -> Self {
        Self {
            accepted: probability < tau,
            probability,
            tau,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtsPartition {
    pub accepted: Vec<Idea>,
    pub rejected: Vec<(Idea, VtsVerdict)>,
}

/// Stable partition of `candidates` by [`VtsVerdict::judge`].
pub fn filter(candidates: impl IntoIterator<Item = Idea>, tau: f64) -> VtsPartition {
    let mut out = VtsPartition::default();
    for idea in candidates {
        let verdict = VtsVerdict::judge(idea.probability, tau);
        if verdict.accepted {
            out.accepted.push(idea);
        } else {
            out.rejected.push((idea, verdict));
        }
    }
    out
}
