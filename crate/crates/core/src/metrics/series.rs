use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricError;

pub const ROLLING_WINDOW: usize = 10;

/// Per-batch values, index 0 being batch 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub edv: Vec<Option<f64>>,
    pub accepted: Vec<usize>,
    pub novelty: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn batches(&self) -> usize {
        self.edv.len()
    }

    pub fn rolling_edv(&self) -> Vec<Option<f64>> {
        rolling(&self.edv, ROLLING_WINDOW)
    }

    pub fn rolling_novelty(&self) -> Vec<Option<f64>> {
        rolling(&self.novelty, ROLLING_WINDOW)
    }
}

/// Mean of the present values among the last `window` entries ending at
/// each position.
pub fn rolling(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            let present: Vec<f64> = values[lo..=i].iter().flatten().copied().collect();
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retention {
    pub percent: f64,
    /// Batches actually used as endpoints (1-based).
    pub first_batch: u32,
    pub last_batch: u32,
    /// Set when either endpoint had to fall back to a neighbour.
    pub fallback: bool,
}

/// Last-batch EDV over first-batch EDV, as a percentage.
pub fn edv_retention(edv: &[Option<f64>]) -> Result<Retention, MetricError> {
    let first = edv.iter().position(Option::is_some).ok_or(MetricError::NoData)?;
    let last = edv.iter().rposition(Option::is_some).ok_or(MetricError::NoData)?;
    let (a, b) = (edv[first].unwrap_or(0.0), edv[last].unwrap_or(0.0));
    if a == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    Ok(Retention {
        percent: 100.0 * b / a,
        first_batch: first as u32 + 1,
        last_batch: last as u32 + 1,
        fallback: first != 0 || last + 1 != edv.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rolling_skips_gaps() {
        let v = [Some(1.0), None, Some(3.0), Some(5.0)];
        let r = rolling(&v, 2);
        assert_eq!(r, vec![Some(1.0), Some(1.0), Some(3.0), Some(4.0)]);
        assert_eq!(rolling(&[None, None], 10), vec![None, None]);
    }

    #[test]
    fn rolling_window_ten() {
        let v: Vec<Option<f64>> = (1..=20).map(|i| Some(i as f64)).collect();
        let r = rolling(&v, ROLLING_WINDOW);
        assert_eq!(r[19], Some(15.5));
        assert_eq!(r[4], Some(3.0));
    }

    #[test]
    fn retention_examples() {
        let flat = vec![Some(0.4); 200];
        assert_eq!(edv_retention(&flat).unwrap().percent, 100.0);

        let mut s = vec![Some(0.3); 200];
        s[0] = Some(0.50);
        s[199] = Some(0.118);
        let r = edv_retention(&s).unwrap();
        assert!((r.percent - 23.6).abs() < 1e-9);
        assert!(!r.fallback);

        s[0] = None;
        s[1] = Some(0.59);
        let r = edv_retention(&s).unwrap();
        assert_eq!(r.first_batch, 2);
        assert!(r.fallback);
        assert!(matches!(edv_retention(&[None]), Err(MetricError::NoData)));
    }
}
