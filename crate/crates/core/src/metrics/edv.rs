use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{by_batch, sim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdvFormulation {
    Multiplicative,
    Additive,
    Geometric,
}

impl EdvFormulation {
    pub const ALL: [EdvFormulation; 3] = [
        EdvFormulation::Multiplicative,
        EdvFormulation::Additive,
        EdvFormulation::Geometric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdvFormulation::Multiplicative => "multiplicative",
            EdvFormulation::Additive => "additive",
            EdvFormulation::Geometric => "geometric",
        }
    }
}

/// Per-idea components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdvTerms {
    pub depth: f64,
    pub breadth: f64,
    pub multiplicative: f64,
    pub additive: f64,
    pub geometric: f64,
}

impl EdvTerms {
    pub fn get(&self, f: EdvFormulation) -> f64 {
        match f {
            EdvFormulation::Multiplicative => self.multiplicative,
            EdvFormulation::Additive => self.additive,
            EdvFormulation::Geometric => self.geometric,
        }
    }
}

pub fn edv_terms(probability: f64, breadth: f64) -> EdvTerms {
    let depth = 1.0 - probability;
    let m = depth * breadth;
    EdvTerms {
        depth,
        breadth,
        multiplicative: m,
        additive: (depth + breadth) / 2.0,
        geometric: libm::sqrt(m.max(0.0)),
    }
}

/// Minimum cosine distance from `v` to `memory`; 1 for an empty memory.
pub fn breadth<M: AsRef<[f64]>>(v: &[f64], memory: &[M]) -> f64 {
    memory
        .iter()
        .map(|m| 1.0 - sim(v, m.as_ref()))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
        .unwrap_or(1.0)
}

/// Mean term over `accepted` against the memory as it stood before the batch.
pub fn edv_batch<M: AsRef<[f64]>>(
    accepted: &[(f64, &[f64])],
    memory_before: &[M],
    formulation: EdvFormulation,
) -> Option<f64> {
    if accepted.is_empty() {
        return None;
    }
    let total: f64 = accepted
        .iter()
        .map(|(p, v)| edv_terms(*p, breadth(v, memory_before)).get(formulation))
        .sum();
    Some(total / accepted.len() as f64)
}

/// EDV for each batch `1..=total_batches`; memory before batch `b` is every
/// idea accepted in batches `< b`.
pub fn edv_series(
    ideas: &[(u32, f64, &[f64])],
    total_batches: u32,
    formulation: EdvFormulation,
) -> Vec<Option<f64>> {
    let pairs: Vec<(u32, (f64, &[f64]))> = ideas.iter().map(|&(b, p, v)| (b, (p, v))).collect();
    let groups = by_batch(&pairs, total_batches);
    let mut memory: Vec<&[f64]> = Vec::new();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        out.push(edv_batch(&g, &memory, formulation));
        memory.extend(g.iter().map(|(_, v)| *v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn quadrant_example() {
        let t = edv_terms(0.03, 1.0 - 0.31);
        assert!((t.multiplicative - 0.6693).abs() < 1e-12);
    }

    #[test]
    fn certain_idea_contributes_nothing() {
        for b in [0.0, 0.5, 1.0] {
            assert_eq!(edv_terms(1.0, b).multiplicative, 0.0);
        }
    }

    #[test]
    fn empty_memory_identity() {
        let v = [1.0, 0.0];
        let mem: Vec<Vec<f64>> = vec![];
        for f in EdvFormulation::ALL {
            assert_eq!(edv_batch(&[(0.0, &v[..])], &mem, f), Some(1.0));
        }
        assert_eq!(edv_batch::<Vec<f64>>(&[], &mem, EdvFormulation::Additive), None);
    }

    #[test]
    fn series_excludes_same_batch_siblings() {
        let a = [1.0, 0.0];
        let ideas = [(1, 0.0, &a[..]), (1, 0.0, &a[..]), (3, 0.0, &a[..])];
        let s = edv_series(&ideas, 3, EdvFormulation::Multiplicative);
        assert_eq!(s, vec![Some(1.0), None, Some(0.0)]);
    }

    proptest! {
        #[test]
        fn term_relations(p in 0.0f64..=1.0, b in 0.0f64..=2.0) {
            let t = edv_terms(p, b);
            let cap = t.additive.min(1.0);
            if b <= 1.0 {
                prop_assert!(t.multiplicative <= cap + 1e-15);
            }
            prop_assert!((t.geometric * t.geometric - t.depth * t.breadth).abs() < 1e-12);
        }
    }
}
