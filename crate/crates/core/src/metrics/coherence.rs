use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sim;
use crate::vector::mean_vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub unique_labels: usize,
    /// Entropy over ln(unique labels); 0 for a single label.
    pub normalized_entropy: Option<f64>,
    /// Pooled mean over all within-category pairs.
    pub mean_intra: Option<f64>,
    /// Mean over pairs of category centroids.
    pub mean_inter_centroid: Option<f64>,
}

pub fn category_coherence(ideas: &[(&str, &[f64])]) -> Coherence {
    let mut groups: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
    for &(c, v) in ideas {
        groups.entry(c).or_default().push(v);
    }
    let n = ideas.len() as f64;
    let normalized_entropy = match groups.len() {
        0 => None,
        1 => Some(0.0),
        k => {
            let h: f64 = groups
                .values()
                .map(|g| {
                    let p = g.len() as f64 / n;
                    -p * libm::log(p)
                })
                .sum();
            Some(h / libm::log(k as f64))
        }
    };

    let (mut intra_sum, mut intra_pairs) = (0.0, 0usize);
    for g in groups.values() {
        for i in 0..g.len() {
            for j in (i + 1)..g.len() {
                intra_sum += sim(g[i], g[j]);
                intra_pairs += 1;
            }
        }
    }

    let centroids: Vec<Vec<f64>> = groups
        .values()
        .filter_map(|g| mean_vector(g.iter().copied()))
        .collect();
    let (mut inter_sum, mut inter_pairs) = (0.0, 0usize);
    for i in 0..centroids.len() {
        for j in (i + 1)..centroids.len() {
            inter_sum += sim(&centroids[i], &centroids[j]);
            inter_pairs += 1;
        }
    }

    Coherence {
        unique_labels: groups.len(),
        normalized_entropy,
        mean_intra: (intra_pairs > 0).then(|| intra_sum / intra_pairs as f64),
        mean_inter_centroid: (inter_pairs > 0).then(|| inter_sum / inter_pairs as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_labels_have_unit_entropy() {
        let v = [1.0, 0.0];
        let ideas = [("a", &v[..]), ("b", &v[..]), ("c", &v[..])];
        let c = category_coherence(&ideas);
        assert!((c.normalized_entropy.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.mean_intra, None);
    }

    #[test]
    fn single_label() {
        let v = [1.0, 0.0];
        let c = category_coherence(&[("a", &v[..]), ("a", &v[..])]);
        assert_eq!(c.normalized_entropy, Some(0.0));
        assert_eq!(c.mean_inter_centroid, None);
        assert_eq!(c.mean_intra, Some(1.0));
    }

    #[test]
    fn identical_within_orthogonal_across() {
        let a = [1.0, 0.0];
        let b = [0.0, 2.0];
        let ideas = [("x", &a[..]), ("x", &a[..]), ("y", &b[..]), ("y", &b[..])];
        let c = category_coherence(&ideas);
        assert_eq!(c.mean_intra, Some(1.0));
        assert_eq!(c.mean_inter_centroid, Some(0.0));
    }
}
