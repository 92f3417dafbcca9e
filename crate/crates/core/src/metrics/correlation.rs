use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sim, MetricError};
use crate::vector::mean_vector;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
/// Permuted statistics within this of the observed one count as ties.
const TIE_EPS: f64 = 1e-12;

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Spearman's rho; `None` when either input is constant or too short.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided permutation p-value for `rho`, shuffling the ranks of `x`
/// with a Fisher-Yates pass driven by a seeded ChaCha8 stream.
pub fn permutation_p_value(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Option<f64> {
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let observed = pearson(&rx, &ry)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = rx.clone();
    let mut hits = 0usize;
    for _ in 0..permutations {
        for i in (1..perm.len()).rev() {
            let j = rng.random_range(0..=i as u64) as usize;
            perm.swap(i, j);
        }
        if pearson(&perm, &ry).is_some_and(|r| r.abs() >= observed - TIE_EPS) {
            hits += 1;
        }
    }
    Some((hits + 1) as f64 / (permutations + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Typicality {
    pub n: usize,
    /// `None` when the probabilities are constant.
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

/// Rank correlation between self-assessed probability and cosine distance
/// to the arithmetic mean of all vectors.
pub fn typicality_correlation(
    ideas: &[(f64, &[f64])],
    permutations: usize,
    seed: u64,
) -> Result<Typicality, MetricError> {
    if ideas.len() < 10 {
        return Err(MetricError::TooFewIdeas {
            needed: 10,
            got: ideas.len(),
        });
    }
    let centroid = mean_vector(ideas.iter().map(|(_, v)| *v)).ok_or(MetricError::NoData)?;
    let p: Vec<f64> = ideas.iter().map(|(p, _)| *p).collect();
    let d: Vec<f64> = ideas.iter().map(|(_, v)| 1.0 - sim(v, &centroid)).collect();
    let rho = spearman(&p, &d);
    let p_value = rho.and_then(|_| permutation_p_value(&p, &d, permutations, seed));
    Ok(Typicality {
        n: ideas.len(),
        rho,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn monotone_and_anti_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.1, 0.4, 0.5, 0.9, 3.0];
        assert_eq!(spearman(&x, &y), Some(1.0));
        let z: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &z), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &x[..3]), None);
    }

    #[test]
    fn perfect_correlation_has_small_p() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let p = permutation_p_value(&x, &x, 2000, 9).unwrap();
        assert!(p < 0.01, "{p}");
        assert_eq!(p, permutation_p_value(&x, &x, 2000, 9).unwrap());
    }

    #[test]
    fn typicality_needs_ten() {
        let v = [1.0, 0.0];
        let ideas = vec![(0.1, &v[..]); 9];
        assert!(matches!(
            typicality_correlation(&ideas, 10, 1),
            Err(MetricError::TooFewIdeas { .. })
        ));
        let ideas = vec![(0.1, &v[..]); 10];
        assert_eq!(typicality_correlation(&ideas, 10, 1).unwrap().rho, None);
    }
}
