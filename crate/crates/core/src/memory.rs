//! In-memory semantic index over accepted ideas.
//!
//! The index answers the dedup query (max cosine against every stored entry,
//! linear scan) and derives the three prompt-evolution signals: most recent
//! acceptances, the densest entries, and the per-category counts. Pairwise
//! similarities are cached as entries arrive so the density query does not
//! redo dot products.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::idea::Idea;
use crate::vector::{Embedding, VectorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub idea: Idea,
    pub embedding: Embedding,
    pub accept_order: u64,
    pub batch_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupVerdict {
    pub accepted: bool,
    pub max_similarity: f64,
    /// `accept_order` of the most similar stored entry.
    pub nearest: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MemoryError {
    #[error("accept order {got} does not follow {last}")]
    OrderNotIncreasing { last: u64, got: u64 },
    #[error("embedding dimension {got} differs from store dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("zero-norm embeddings cannot be stored")]
    ZeroNorm,
}

#[derive(Debug, Clone, Default)]
pub struct SemanticIndex {
    entries: Vec<MemoryEntry>,
    // sims[i][j] = cosine(entry i, entry j) for j < i.
    sims: Vec<Vec<f64>>,
    // top[i]: the TOP_CAP largest similarities of entry i to any other, descending.
    top: Vec<Vec<f64>>,
}

const TOP_CAP: usize = 32;

fn desc(a: &f64, b: &f64) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

fn push_top(list: &mut Vec<f64>, s: f64) {
    if list.len() == TOP_CAP && list.last().is_some_and(|&l| s <= l) {
        return;
    }
    let at = list.partition_point(|&x| x >= s);
    list.insert(at, s);
    list.truncate(TOP_CAP);
}

fn by_density(a: &(f64, u64), b: &(f64, u64)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

impl SemanticIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn dimension(&self) -> Option<usize> {
        self.entries.first().map(|e| e.embedding.dimension())
    }

    /// One past the newest order, 0 when empty. Campaigns assign orders
    /// contiguously from 0, so an order doubles as the entry's position.
    pub fn next_accept_order(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.accept_order + 1)
    }

    /// Rejects when the best match reaches `delta` (inclusive).
    pub fn check_duplicate(
        &self,
        candidate: &Embedding,
        delta: f64,
    ) -> Result<DedupVerdict, VectorError> {
        let mut best: Option<(f64, u64)> = None;
        for entry in &self.entries {
            let s = candidate.cosine(&entry.embedding)?;
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, entry.accept_order));
            }
        }
        Ok(match best {
            None => DedupVerdict {
                accepted: true,
                max_similarity: 0.0,
                nearest: None,
            },
            Some((s, order)) => DedupVerdict {
                accepted: s < delta,
                max_similarity: s,
                nearest: Some(order),
            },
        })
    }

    pub fn insert(&mut self, entry: MemoryEntry) -> Result<u64, MemoryError> {
        if let Some(last) = self.entries.last() {
            if entry.accept_order <= last.accept_order {
                return Err(MemoryError::OrderNotIncreasing {
                    last: last.accept_order,
                    got: entry.accept_order,
                });
            }
            let expected = last.embedding.dimension();
            if entry.embedding.dimension() != expected {
                return Err(MemoryError::Dimension {
                    expected,
                    got: entry.embedding.dimension(),
                });
            }
        }
        if entry.embedding.norm() == 0.0 {
            return Err(MemoryError::ZeroNorm);
        }
        let row = self
            .entries
            .iter()
            .map(|e| {
                entry
                    .embedding
                    .cosine(&e.embedding)
                    .expect("dimension and norm checked above")
            })
            .collect::<Vec<f64>>();
        for (i, &s) in row.iter().enumerate() {
            push_top(&mut self.top[i], s);
        }
        let mut own = row.clone();
        own.sort_unstable_by(desc);
        own.truncate(TOP_CAP);
        self.top.push(own);
        self.sims.push(row);
        let order = entry.accept_order;
        self.entries.push(entry);
        Ok(order)
    }

    /// Drops every entry past the first `len`.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.entries.len() {
            return;
        }
        self.entries.truncate(len);
        self.sims.truncate(len);
        self.top = (0..len)
            .map(|i| {
                let mut row: Vec<f64> = (0..len).filter(|&j| j != i).map(|j| self.similarity(i, j)).collect();
                row.sort_unstable_by(desc);
                row.truncate(TOP_CAP);
                row
            })
            .collect();
    }

    fn similarity(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            Ordering::Greater => self.sims[i][j],
            Ordering::Less => self.sims[j][i],
            Ordering::Equal => 1.0,
        }
    }

    /// Newest first.
    pub fn recent(&self, k: usize) -> Vec<&Idea> {
        self.entries.iter().rev().take(k).map(|e| &e.idea).collect()
    }

    /// Local density of every entry: mean cosine to its `m` most similar
    /// neighbours (`m` capped at `len - 1`). Returned in insertion order.
    pub fn densities(&self, m: usize) -> Vec<f64> {
        let n = self.entries.len();
        if n < 2 || m == 0 {
            return Vec::new();
        }
        let m = m.min(n - 1);
        if m <= TOP_CAP {
            return self
                .top
                .iter()
                .map(|t| t[..m].iter().sum::<f64>() / m as f64)
                .collect();
        }
        let mut row = Vec::with_capacity(n - 1);
        (0..n)
            .map(|i| {
                row.clear();
                row.extend((0..n).filter(|&j| j != i).map(|j| self.similarity(i, j)));
                if m < row.len() {
                    row.select_nth_unstable_by(m - 1, desc);
                }
                let top = &mut row[..m];
                top.sort_unstable_by(desc);
                top.iter().sum::<f64>() / m as f64
            })
            .collect()
    }

    /// The `k` densest entries, ties broken by lower `accept_order`.
    pub fn dense_regions(&self, k: usize, m: usize) -> Vec<&Idea> {
        let dens = self.densities(m);
        let mut ranked: Vec<(f64, u64, usize)> = dens
            .iter()
            .zip(&self.entries)
            .enumerate()
            .map(|(i, (&d, e))| (d, e.accept_order, i))
            .collect();
        ranked.sort_by(|a, b| by_density(&(a.0, a.1), &(b.0, b.1)));
        ranked
            .into_iter()
            .take(k)
            .map(|(_, _, i)| &self.entries[i].idea)
            .collect()
    }

    /// Exact counts over raw labels.
    pub fn category_distribution(&self) -> BTreeMap<String, usize> {
        let mut map = BTreeMap::new();
        for e in &self.entries {
            *map.entry(e.idea.category.clone()).or_insert(0) += 1;
        }
        map
    }

    /// The `j` least-populated categories, ties broken lexicographically.
    pub fn underrepresented_categories(&self, j: usize) -> Vec<(String, usize)> {
        lowest_counts(&self.category_distribution(), j)
    }
}

pub fn lowest_counts(dist: &BTreeMap<String, usize>, j: usize) -> Vec<(String, usize)> {
    let mut counts: Vec<(String, usize)> = dist.iter().map(|(k, &v)| (k.clone(), v)).collect();
    // BTreeMap iteration is already label-sorted; a stable sort keeps that.
    counts.sort_by_key(|(_, c)| *c);
    counts.truncate(j);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn entry(order: u64, v: &[f64], cat: &str) -> MemoryEntry {
        MemoryEntry {
            idea: Idea::new(format!("idea {order}"), "d", cat, 0.05, 1, 0).unwrap(),
            embedding: Embedding::new(v.to_vec(), "t").unwrap(),
            accept_order: order,
            batch_index: 1,
        }
    }

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec(), "t").unwrap()
    }

    #[test]
    fn empty_memory_accepts_with_zero_similarity() {
        let idx = SemanticIndex::new();
        let v = idx.check_duplicate(&emb(&[1.0, 2.0]), 0.85).unwrap();
        assert!(v.accepted);
        assert_eq!(v.max_similarity, 0.0);
        assert_eq!(v.nearest, None);
    }

    #[test]
    fn near_duplicate_at_092_is_rejected() {
        let mut idx = SemanticIndex::new();
        idx.insert(entry(1, &[1.0, 0.0], "a")).unwrap();
        let s: f64 = 0.92;
        let cand = emb(&[s, libm::sqrt(1.0 - s * s)]);
        let v = idx.check_duplicate(&cand, 0.85).unwrap();
        assert!(!v.accepted);
        assert!((v.max_similarity - 0.92).abs() < 1e-12);
        assert_eq!(v.nearest, Some(1));
    }

    #[test]
    fn similarity_exactly_at_delta_is_rejected() {
        let mut idx = SemanticIndex::new();
        idx.insert(entry(1, &[1.0, 0.0], "a")).unwrap();
        // cos = 0.6 exactly: (0.6, 0.8) is a unit vector representable enough
        // that dot == 0.6 bit-for-bit.
        let cand = emb(&[0.6, 0.8]);
        let v = idx.check_duplicate(&cand, 0.6).unwrap();
        assert_eq!(v.max_similarity, 0.6);
        assert!(!v.accepted);
    }

    #[test]
    fn self_insert_rejects() {
        let mut idx = SemanticIndex::new();
        idx.insert(entry(1, &[0.2, 0.7, -0.1], "a")).unwrap();
        let v = idx.check_duplicate(&emb(&[0.2, 0.7, -0.1]), 0.85).unwrap();
        assert!(!v.accepted);
        assert!((v.max_similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accept_order_must_increase() {
        let mut idx = SemanticIndex::new();
        assert_eq!(idx.insert(entry(1, &[1.0], "a")).unwrap(), 1);
        assert_eq!(idx.insert(entry(2, &[1.0], "a")).unwrap(), 2);
        assert!(idx.insert(entry(2, &[1.0], "a")).is_err());
        assert_eq!(idx.next_accept_order(), 3);
    }

    #[test]
    fn recent_is_newest_first_and_bounded() {
        let mut idx = SemanticIndex::new();
        for i in 1..=15 {
            idx.insert(entry(i, &[1.0, i as f64], "a")).unwrap();
        }
        let names: Vec<_> = idx.recent(10).iter().map(|i| i.name.clone()).collect();
        let expected: Vec<_> = (6..=15).rev().map(|i| format!("idea {i}")).collect();
        assert_eq!(names, expected);
        assert!(idx.recent(0).is_empty());
        let mut small = SemanticIndex::new();
        for i in 1..=3 {
            small.insert(entry(i, &[1.0], "a")).unwrap();
        }
        assert_eq!(small.recent(10).len(), 3);
    }

    #[test]
    fn dense_regions_degenerate_and_tie_cases() {
        let mut one = SemanticIndex::new();
        one.insert(entry(1, &[1.0, 0.0], "a")).unwrap();
        assert!(one.dense_regions(5, 10).is_empty());

        let mut orth = SemanticIndex::new();
        for i in 0..4u64 {
            let mut v = vec![0.0; 4];
            v[i as usize] = 1.0;
            orth.insert(entry(i + 1, &v, "a")).unwrap();
        }
        let names: Vec<_> = orth.dense_regions(2, 10).iter().map(|i| i.name.clone()).collect();
        assert_eq!(names, vec!["idea 1", "idea 2"]);
    }

    #[test]
    fn dense_regions_picks_the_cluster() {
        let mut idx = SemanticIndex::new();
        idx.insert(entry(1, &[0.0, 0.0, 1.0], "far")).unwrap();
        idx.insert(entry(2, &[1.0, 0.01, 0.0], "c")).unwrap();
        idx.insert(entry(3, &[1.0, -0.01, 0.0], "c")).unwrap();
        idx.insert(entry(4, &[1.0, 0.0, 0.01], "c")).unwrap();
        let top = idx.dense_regions(1, 10);
        assert_ne!(top[0].name, "idea 1");
        // Brute force: the far vector's density is strictly the lowest.
        let d = idx.densities(10);
        assert!(d[0] < d[1] && d[0] < d[2] && d[0] < d[3]);
    }

    #[test]
    fn category_counts_and_gaps() {
        let mut idx = SemanticIndex::new();
        assert!(idx.category_distribution().is_empty());
        assert!(idx.underrepresented_categories(3).is_empty());
        for (i, c) in ["A", "A", "B"].iter().enumerate() {
            idx.insert(entry(i as u64 + 1, &[1.0], c)).unwrap();
        }
        let d = idx.category_distribution();
        assert_eq!(d.get("A"), Some(&2));
        assert_eq!(d.get("B"), Some(&1));
    }

    #[test]
    fn underrepresented_matches_gap_example() {
        let mut dist = BTreeMap::new();
        dist.insert("films".into(), 47);
        dist.insert("thermal".into(), 2);
        dist.insert("ocean".into(), 3);
        assert_eq!(
            lowest_counts(&dist, 2),
            vec![("thermal".into(), 2), ("ocean".into(), 3)]
        );
        assert_eq!(lowest_counts(&dist, 10).len(), 3);
        let mut equal = BTreeMap::new();
        for l in ["delta", "alpha", "charlie", "bravo"] {
            equal.insert(String::from(l), 1);
        }
        let got: Vec<_> = lowest_counts(&equal, 2).into_iter().map(|(l, _)| l).collect();
        assert_eq!(got, vec!["alpha", "bravo"]);
    }

    fn brute_densities(idx: &SemanticIndex, m: usize) -> Vec<f64> {
        let e = idx.entries();
        let m = m.min(e.len() - 1);
        (0..e.len())
            .map(|i| {
                let mut row: Vec<f64> = (0..e.len())
                    .filter(|&j| j != i)
                    .map(|j| e[i].embedding.cosine(&e[j].embedding).unwrap())
                    .collect();
                row.sort_by(|a, b| b.partial_cmp(a).unwrap());
                row[..m].iter().sum::<f64>() / m as f64
            })
            .collect()
    }

    proptest::proptest! {
        #[test]
        fn cached_densities_match_full_scan(
            stored in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 2..60),
            m in 1usize..50,
            keep in 2usize..60,
        ) {
            let mut idx = SemanticIndex::new();
            for v in &stored {
                let e = entry(idx.next_accept_order() + 1, v, "a");
                if e.embedding.norm() > 1e-6 {
                    idx.insert(e).unwrap();
                }
            }
            proptest::prop_assume!(idx.len() >= 2);
            proptest::prop_assert_eq!(idx.densities(m), brute_densities(&idx, m));
            idx.truncate(keep.min(idx.len()).max(2));
            proptest::prop_assert_eq!(idx.densities(m), brute_densities(&idx, m));
        }

        #[test]
        fn rejection_is_monotone_in_delta(
            stored in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 1..12),
            cand in proptest::collection::vec(-1.0f64..1.0, 4),
            d1 in 0.01f64..=1.0,
            d2 in 0.01f64..=1.0,
        ) {
            let mut idx = SemanticIndex::new();
            for (i, v) in stored.iter().enumerate() {
                let e = entry(i as u64 + 1, v, "a");
                proptest::prop_assume!(e.embedding.norm() > 1e-6);
                idx.insert(e).unwrap();
            }
            let c = emb(&cand);
            proptest::prop_assume!(c.norm() > 1e-6);
            let (hi, lo) = if d1 >= d2 { (d1, d2) } else { (d2, d1) };
            if !idx.check_duplicate(&c, hi).unwrap().accepted {
                proptest::prop_assert!(!idx.check_duplicate(&c, lo).unwrap().accepted);
            }
            // Any stored vector is rejected against itself.
            let own = idx.entries()[0].embedding.clone();
            proptest::prop_assert!(!idx.check_duplicate(&own, hi).unwrap().accepted);
        }
    }
}
