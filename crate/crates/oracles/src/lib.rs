//! Slow reference implementations, written without reference to `dce-core`
//! and used only by tests. Every function favours the most literal
//! computation over speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cosine similarity; identical vectors give exactly 1 and a zero vector
/// gives 0.
pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    if a == b && a.iter().any(|x| *x != 0.0) {
        return 1.0;
    }
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

/// An accepted idea in a fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub batch: u32,
    pub probability: f64,
    pub category: String,
    pub vector: Vec<f64>,
}

/// Random small log: vectors drawn around a few anchors so that
/// similarities span the interesting thresholds, some batches left empty.
pub fn random_fixture(seed: u64, max_items: usize, batches: u32) -> Vec<Item> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..6usize);
    let anchors: Vec<Vec<f64>> = (0..rng.random_range(1..5usize))
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let n = rng.random_range(1..=max_items);
    let mut items: Vec<Item> = (0..n)
        .map(|_| {
            let a = &anchors[rng.random_range(0..anchors.len())];
            let spread = [0.0, 0.05, 0.3, 1.0][rng.random_range(0..4usize)];
            let vector = a
                .iter()
                .map(|x| x + spread * rng.random_range(-1.0..1.0))
                .collect();
            let probability = if rng.random_bool(0.2) {
                [0.0, 0.1, 0.5, 1.0][rng.random_range(0..4usize)]
            } else {
                rng.random_range(0.0..1.0)
            };
            Item {
                batch: rng.random_range(1..=batches),
                probability,
                category: format!("cat{}", rng.random_range(0..4u32)),
                vector,
            }
        })
        .collect();
    items.sort_by_key(|i| i.batch);
    items
}

/// Per-batch EDV with memory formed by strictly earlier batches.
/// `kind` is 0 multiplicative, 1 additive, 2 geometric.
pub fn edv(items: &[Item], batches: u32, kind: u8) -> Vec<Option<f64>> {
    let mut out = Vec::new();
    for b in 1..=batches {
        let mut terms = Vec::new();
        for it in items.iter().filter(|i| i.batch == b) {
            let mut breadth = 1.0f64;
            let mut any = false;
            for m in items.iter().filter(|i| i.batch < b) {
                let d = 1.0 - cos(&it.vector, &m.vector);
                breadth = if any { breadth.min(d) } else { d };
                any = true;
            }
            let depth = 1.0 - it.probability;
            terms.push(match kind {
                0 => depth * breadth,
                1 => 0.5 * depth + 0.5 * breadth,
                _ => (depth * breadth).sqrt(),
            });
        }
        out.push(if terms.is_empty() {
            None
        } else {
            Some(terms.iter().sum::<f64>() / terms.len() as f64)
        });
    }
    out
}

pub fn novelty(items: &[Item], batches: u32) -> Vec<Option<f64>> {
    (1..=batches)
        .map(|b| {
            let cur: Vec<&Item> = items.iter().filter(|i| i.batch == b).collect();
            if cur.is_empty() {
                return None;
            }
            let prior: Vec<&Item> = items.iter().filter(|i| i.batch < b).collect();
            let mut total = 0.0;
            for c in &cur {
                total += if prior.is_empty() {
                    1.0
                } else {
                    prior
                        .iter()
                        .map(|p| 1.0 - cos(&c.vector, &p.vector))
                        .fold(f64::INFINITY, f64::min)
                };
            }
            Some(total / cur.len() as f64)
        })
        .collect()
}

/// Collapse percentage, strict threshold.
pub fn collapse(items: &[Item], batches: u32, threshold: f64, window: u32) -> f64 {
    let early: Vec<&Item> = items.iter().filter(|i| i.batch <= window).collect();
    let late: Vec<&Item> = items
        .iter()
        .filter(|i| i.batch > batches - window)
        .collect();
    if late.is_empty() {
        return 0.0;
    }
    let mut hit = 0;
    for l in &late {
        let mut best = f64::NEG_INFINITY;
        for e in &early {
            best = best.max(cos(&l.vector, &e.vector));
        }
        if best > threshold {
            hit += 1;
        }
    }
    hit as f64 * 100.0 / late.len() as f64
}

/// Cells in the order accept/accept, accept/reject, reject/accept,
/// reject/reject (tail verdict first).
pub fn confusion(items: &[Item], tau: f64, delta: f64) -> [usize; 4] {
    let mut cells = [0; 4];
    for (k, it) in items.iter().enumerate() {
        let tail = usize::from(it.probability >= tau);
        let dup = usize::from((0..k).any(|j| cos(&it.vector, &items[j].vector) > delta));
        cells[tail * 2 + dup] += 1;
    }
    cells
}

/// Rank of each value: count of smaller values plus the midpoint of the
/// run of equal values.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|y| *y < v).count() as f64;
            let equal = x.iter().filter(|y| *y == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    let var_a = saa - sa * sa / n;
    let var_b = sbb - sb * sb / n;
    if var_a <= 1e-12 * saa.max(1.0) || var_b <= 1e-12 * sbb.max(1.0) {
        return None;
    }
    Some(((sab - sa * sb / n) / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    correlation(&ranks(x), &ranks(y))
}

/// Permutation p-value with the same seeded shuffle sequence as the
/// library: ChaCha8 from `seed`, Fisher-Yates from the top, indices drawn
/// as `u64` in `0..=i`.
pub fn permutation_p(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Option<f64> {
    let rx = ranks(x);
    let ry = ranks(y);
    let obs = correlation(&rx, &ry)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = rx.clone();
    let mut count = 0;
    for _ in 0..permutations {
        let mut i = p.len();
        while i > 1 {
            i -= 1;
            let j = rng.random_range(0..=i as u64) as usize;
            p.swap(i, j);
        }
        if let Some(r) = correlation(&p, &ry) {
            if r.abs() >= obs - 1e-12 {
                count += 1;
            }
        }
    }
    Some((count as f64 + 1.0) / (permutations as f64 + 1.0))
}

/// Distance from each vector to the arithmetic centroid.
pub fn centroid_distances(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut c = vec![0.0; dim];
    for v in vectors {
        for d in 0..dim {
            c[d] += v[d] / vectors.len() as f64;
        }
    }
    vectors.iter().map(|v| 1.0 - cos(v, &c)).collect()
}

/// (unique labels, normalized entropy, mean intra, mean inter-centroid)
pub fn coherence(items: &[Item]) -> (usize, Option<f64>, Option<f64>, Option<f64>) {
    let mut labels: Vec<&str> = items.iter().map(|i| i.category.as_str()).collect();
    labels.sort();
    labels.dedup();
    let n = items.len() as f64;
    let entropy = match labels.len() {
        0 => None,
        1 => Some(0.0),
        k => {
            let mut h = 0.0;
            for l in &labels {
                let p = items.iter().filter(|i| i.category == *l).count() as f64 / n;
                h -= p * p.ln();
            }
            Some(h / (k as f64).ln())
        }
    };
    let mut intra = Vec::new();
    for a in 0..items.len() {
        for b in (a + 1)..items.len() {
            if items[a].category == items[b].category {
                intra.push(cos(&items[a].vector, &items[b].vector));
            }
        }
    }
    let centroids: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            let members: Vec<&Item> = items.iter().filter(|i| i.category == *l).collect();
            let dim = members[0].vector.len();
            (0..dim)
                .map(|d| members.iter().map(|m| m.vector[d]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect();
    let mut inter = Vec::new();
    for a in 0..centroids.len() {
        for b in (a + 1)..centroids.len() {
            inter.push(cos(&centroids[a], &centroids[b]));
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    (labels.len(), entropy, mean(&intra), mean(&inter))
}

/// Number of vectors a first-come greedy pass keeps when anything at
/// similarity `>= delta` to a kept vector is dropped.
pub fn greedy_keep(vectors: &[&[f64]], delta: f64) -> Vec<bool> {
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let dup = kept.iter().any(|&k| cos(v, vectors[k]) >= delta);
        if !dup {
            kept.push(i);
        }
        out.push(!dup);
    }
    out
}

/// Largest similarity over all pairs; `None` for fewer than two vectors.
pub fn max_pairwise(vectors: &[&[f64]]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for a in 0..vectors.len() {
        for b in (a + 1)..vectors.len() {
            let s = cos(vectors[a], vectors[b]);
            best = Some(best.map_or(s, |x: f64| x.max(s)));
        }
    }
    best
}

/// Pearson chi-square statistic of `observed` counts against probabilities.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let psum: f64 = expected.iter().sum();
    observed
        .iter()
        .zip(expected)
        .filter(|(_, p)| **p > 0.0)
        .map(|(&o, &p)| {
            let e = total as f64 * p / psum;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// Loose upper acceptance bound for a chi-square statistic with `df`
/// degrees of freedom: mean plus `z` standard deviations.
pub fn chi_square_bound(df: usize, z: f64) -> f64 {
    df as f64 + z * (2.0 * df as f64).sqrt()
}

pub mod hdbscan {
    //! Cluster counting straight from the level-set definition: the cluster
    //! tree is found by repeatedly asking which points stay connected once
    //! every edge at the current level is removed.

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    fn mutual_reachability(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        let n = points.len();
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| euclid(&points[i], &points[j])).collect())
            .collect();
        let core: Vec<f64> = d
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.sort_by(|a, b| a.partial_cmp(b).unwrap());
                r[k.min(n) - 1]
            })
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { d[i][j].max(core[i]).max(core[j]) })
                    .collect()
            })
            .collect()
    }

    /// Components of `set` using edges strictly lighter than `level`.
    fn components(mr: &[Vec<f64>], set: &[usize], level: f64) -> Vec<Vec<usize>> {
        let mut seen = vec![false; set.len()];
        let mut out = Vec::new();
        for s in 0..set.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![set[s]];
            let mut frontier = vec![s];
            while let Some(a) = frontier.pop() {
                for b in 0..set.len() {
                    if !seen[b] && mr[set[a]][set[b]] < level {
                        seen[b] = true;
                        comp.push(set[b]);
                        frontier.push(b);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Smallest level at which `set` is connected (bottleneck of its
    /// minimum spanning tree), searched over every candidate weight.
    fn join_level(mr: &[Vec<f64>], set: &[usize]) -> f64 {
        let mut levels: Vec<f64> = Vec::new();
        for &a in set {
            for &b in set {
                if a < b {
                    levels.push(mr[a][b]);
                }
            }
        }
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        // Connectivity using edges <= l is monotone in l.
        let (mut lo, mut hi) = (0, levels.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if components(mr, set, next_up(levels[mid])).len() == 1 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        levels[lo]
    }

    fn next_up(x: f64) -> f64 {
        if x == f64::INFINITY {
            x
        } else if x == 0.0 {
            f64::from_bits(1)
        } else {
            f64::from_bits(x.to_bits() + 1)
        }
    }

    fn lam(d: f64) -> f64 {
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    }

    fn gain(leave: f64, birth: f64, n: usize) -> f64 {
        if leave == birth {
            0.0
        } else {
            (leave - birth) * n as f64
        }
    }

    struct Tree {
        stability: f64,
        children: Vec<Tree>,
    }

    fn grow(mr: &[Vec<f64>], mut set: Vec<usize>, birth: f64, mcs: usize) -> Tree {
        let mut stability = 0.0;
        loop {
            let level = join_level(mr, &set);
            let l = lam(level);
            let parts = components(mr, &set, level);
            let big: Vec<Vec<usize>> = parts.into_iter().filter(|p| p.len() >= mcs).collect();
            match big.len() {
                0 => {
                    stability += gain(l, birth, set.len());
                    return Tree {
                        stability,
                        children: vec![],
                    };
                }
                1 => {
                    let keep = big.into_iter().next().unwrap();
                    stability += gain(l, birth, set.len() - keep.len());
                    set = keep;
                }
                _ => {
                    stability += gain(l, birth, set.len());
                    let children = big.into_iter().map(|c| grow(mr, c, l, mcs)).collect();
                    return Tree {
                        stability,
                        children,
                    };
                }
            }
        }
    }

    /// (best achievable stability, number of clusters selected)
    fn best(t: &Tree) -> (f64, usize) {
        if t.children.is_empty() {
            return (t.stability, 1);
        }
        let kids: Vec<(f64, usize)> = t.children.iter().map(best).collect();
        let sum: f64 = kids.iter().map(|k| k.0).sum();
        if t.stability >= sum {
            (t.stability, 1)
        } else {
            (sum, kids.iter().map(|k| k.1).sum())
        }
    }

    pub fn cluster_count(points: &[Vec<f64>], min_cluster_size: usize) -> usize {
        let mcs = min_cluster_size.max(2);
        if points.len() < mcs {
            return 0;
        }
        let mr = mutual_reachability(points, mcs);
        let all: Vec<usize> = (0..points.len()).collect();
        let root = grow(&mr, all, 0.0, mcs);
        root.children.iter().map(|c| best(c).1).sum()
    }
}
