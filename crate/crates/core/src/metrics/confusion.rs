use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sim;

/// Counterfactual verdicts of the two filters over an unfiltered stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix2x2 {
    pub vts_accept_dedup_accept: usize,
    pub vts_accept_dedup_reject: usize,
    pub vts_reject_dedup_accept: usize,
    pub vts_reject_dedup_reject: usize,
}

impl ConfusionMatrix2x2 {
    pub fn total(&self) -> usize {
        self.vts_accept_dedup_accept
            + self.vts_accept_dedup_reject
            + self.vts_reject_dedup_accept
            + self.vts_reject_dedup_reject
    }
}

/// Replays `(probability, vector)` in acceptance order. Tail sampling rejects
/// at `p >= tau`; dedup rejects when similarity to any earlier idea of the
/// stream exceeds `delta`, whatever verdicts that earlier idea received.
pub fn confusion_matrix(stream: &[(f64, &[f64])], tau: f64, delta: f64) -> ConfusionMatrix2x2 {
    let mut m = ConfusionMatrix2x2::default();
    let mut seen: Vec<&[f64]> = Vec::with_capacity(stream.len());
    for &(p, v) in stream {
        let vts_reject = p >= tau;
        let dedup_reject = seen.iter().any(|s| sim(v, s) > delta);
        match (vts_reject, dedup_reject) {
            (false, false) => m.vts_accept_dedup_accept += 1,
            (false, true) => m.vts_accept_dedup_reject += 1,
            (true, false) => m.vts_reject_dedup_accept += 1,
            (true, true) => m.vts_reject_dedup_reject += 1,
        }
        seen.push(v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_and_certain_tail() {
        let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s: Vec<(f64, &[f64])> = e.iter().map(|v| (0.0, &v[..])).collect();
        let m = confusion_matrix(&s, 0.1, 0.85);
        assert_eq!(m.vts_accept_dedup_accept, 3);
        assert_eq!(m.total(), 3);
    }

    #[test]
    fn rejected_ideas_still_anchor() {
        let a = [1.0, 0.0];
        let s = [(0.9, &a[..]), (0.01, &a[..])];
        let m = confusion_matrix(&s, 0.1, 0.85);
        assert_eq!(m.vts_reject_dedup_accept, 1);
        assert_eq!(m.vts_accept_dedup_reject, 1);
    }
}
