//! Re-judging a recorded candidate stream under different thresholds.

use alloc::vec::Vec;

use crate::vector::cosine;

/// Applies tail filtering at `tau` (reject `p >= tau`) and then sequential
/// deduplication at `delta` (reject `sim >= delta` against everything kept
/// so far), in stream order. `None` disables a filter. Returns, per
/// candidate, whether it would have been kept.
pub fn replay_stream(stream: &[(f64, &[f64])], tau: Option<f64>, delta: Option<f64>) -> Vec<bool> {
    let mut kept: Vec<&[f64]> = Vec::new();
    stream
        .iter()
        .map(|&(p, v)| {
            if tau.is_some_and(|t| p >= t) {
                return false;
            }
            if let Some(d) = delta {
                if kept.iter().any(|k| cosine(v, k).unwrap_or(0.0) >= d) {
                    return false;
                }
            }
            kept.push(v);
            true
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn filters_compose_in_order() {
        let a = [1.0, 0.0];
        let b = [0.99, 0.141];
        let c = [0.0, 1.0];
        let stream: Vec<(f64, &[f64])> = vec![(0.3, &a), (0.01, &a), (0.02, &b), (0.05, &c)];
        assert_eq!(replay_stream(&stream, None, None), vec![true; 4]);
        assert_eq!(replay_stream(&stream, Some(0.1), None), vec![false, true, true, true]);
        assert_eq!(replay_stream(&stream, Some(0.1), Some(0.9)), vec![false, true, false, true]);
        assert_eq!(replay_stream(&stream, None, Some(0.9)), vec![true, false, false, true]);
    }
}
