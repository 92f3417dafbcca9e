//! Density-based hierarchical clustering (HDBSCAN) reduced to what the
//! metrics need: the number of clusters selected by excess of mass.
//!
//! Conventions follow the reference Python implementation: Euclidean
//! distance, `min_samples = min_cluster_size`, core distance counts the point
//! itself, the root cluster is never selected, and a parent wins ties
//! against the summed stability of its descendants.
//!
//! Edges of equal mutual-reachability weight are merged in one step, so a
//! cluster can split into more than two children at the same density level.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::vector::euclidean;

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => {
                self.parent[ra] = rb;
                rb
            }
            Ordering::Greater => {
                self.parent[rb] = ra;
                ra
            }
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
                ra
            }
        }
    }
}

/// Node of the merge tree. Leaves are points; internal nodes record the
/// distance at which their children joined.
struct Node {
    children: Vec<usize>,
    distance: f64,
    size: usize,
}

fn lambda(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// Stability contributed by `count` points leaving at `leave` from a cluster
/// born at `birth`.
fn excess(leave: f64, birth: f64, count: usize) -> f64 {
    let gap = if leave == birth { 0.0 } else { leave - birth };
    gap * count as f64
}

pub fn core_distances(dist: &[f64], n: usize, min_samples: usize) -> Vec<f64> {
    let k = min_samples.clamp(1, n);
    let mut row = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            row.clear();
            row.extend_from_slice(&dist[i * n..(i + 1) * n]);
            row.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            row[k - 1]
        })
        .collect()
}

/// Prim's algorithm on the dense mutual-reachability graph.
fn minimum_spanning_tree(mr: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = mr[current * n + j];
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if best[j] < next_w || next == usize::MAX {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges
}

fn merge_tree(n: usize, mut edges: Vec<(usize, usize, f64)>) -> (Vec<Node>, usize) {
    edges.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal));
    let mut nodes: Vec<Node> = (0..n)
        .map(|_| Node {
            children: Vec::new(),
            distance: 0.0,
            size: 1,
        })
        .collect();
    let mut uf = UnionFind::new(n);
    let mut comp_node: Vec<usize> = (0..n).collect();
    let mut i = 0;
    while i < edges.len() {
        let w = edges[i].2;
        let mut j = i;
        while j < edges.len() && edges[j].2 == w {
            j += 1;
        }
        // Node ids of each component touched at this level, keyed by root.
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b, _) in &edges[i..j] {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                continue;
            }
            let ma = members.remove(&ra).unwrap_or_else(|| vec![comp_node[ra]]);
            let mb = members.remove(&rb).unwrap_or_else(|| vec![comp_node[rb]]);
            let r = uf.union(ra, rb);
            let mut m = ma;
            m.extend(mb);
            members.insert(r, m);
        }
        for (root, children) in members {
            let size = children.iter().map(|&c| nodes[c].size).sum();
            nodes.push(Node {
                children,
                distance: w,
                size,
            });
            comp_node[root] = nodes.len() - 1;
        }
        i = j;
    }
    let root = nodes.len() - 1;
    (nodes, root)
}

struct Cluster {
    parent: Option<usize>,
    birth: f64,
    stability: f64,
}

fn condense(nodes: &[Node], root: usize, min_cluster_size: usize) -> Vec<Cluster> {
    let mut clusters = vec![Cluster {
        parent: None,
        birth: 0.0,
        stability: 0.0,
    }];
    // (cluster id, node the cluster currently occupies)
    let mut stack = vec![(0usize, root)];
    while let Some((cid, mut node)) = stack.pop() {
        loop {
            let nd = &nodes[node];
            if nd.children.is_empty() {
                // A single point cannot be a cluster of size >= 2; unreachable
                // for valid sizes but closes the cluster cleanly.
                let birth = clusters[cid].birth;
                clusters[cid].stability += excess(f64::INFINITY, birth, nd.size);
                break;
            }
            let lam = lambda(nd.distance);
            let birth = clusters[cid].birth;
            let big: Vec<usize> = nd
                .children
                .iter()
                .copied()
                .filter(|&c| nodes[c].size >= min_cluster_size)
                .collect();
            match big.len() {
                0 => {
                    clusters[cid].stability += excess(lam, birth, nd.size);
                    break;
                }
                1 => {
                    let keep = big[0];
                    let falling = nd.size - nodes[keep].size;
                    clusters[cid].stability += excess(lam, birth, falling);
                    node = keep;
                }
                _ => {
                    clusters[cid].stability += excess(lam, birth, nd.size);
                    for child in big {
                        clusters.push(Cluster {
                            parent: Some(cid),
                            birth: lam,
                            stability: 0.0,
                        });
                        stack.push((clusters.len() - 1, child));
                    }
                    break;
                }
            }
        }
    }
    clusters
}

/// Excess-of-mass selection. Returns a flag per cluster.
fn select(clusters: &[Cluster]) -> Vec<bool> {
    let n = clusters.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in clusters.iter().enumerate() {
        if let Some(p) = c.parent {
            children[p].push(i);
        }
    }
    let mut subtree = vec![0.0f64; n];
    let mut selected = vec![false; n];
    // Children always have larger ids than their parent.
    for i in (1..n).rev() {
        let sum: f64 = children[i].iter().map(|&c| subtree[c]).sum();
        if children[i].is_empty() || clusters[i].stability >= sum {
            selected[i] = true;
            subtree[i] = clusters[i].stability;
            let mut stack = children[i].clone();
            while let Some(c) = stack.pop() {
                selected[c] = false;
                stack.extend_from_slice(&children[c]);
            }
        } else {
            subtree[i] = sum;
        }
    }
    selected
}

/// Number of clusters HDBSCAN selects. Fewer points than
/// `min_cluster_size` yields zero.
pub fn cluster_count<V: AsRef<[f64]>>(points: &[V], min_cluster_size: usize) -> usize {
    let n = points.len();
    let mcs = min_cluster_size.max(2);
    if n < mcs {
        return 0;
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(points[i].as_ref(), points[j].as_ref());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let core = core_distances(&dist, n, mcs);
    let mut mr = dist;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = mr[i * n + j].max(core[i]).max(core[j]);
                mr[i * n + j] = v;
            }
        }
    }
    let edges = minimum_spanning_tree(&mr, n);
    let (nodes, root) = merge_tree(n, edges);
    let clusters = condense(&nodes, root, mcs);
    select(&clusters).iter().filter(|s| **s).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(rng: &mut ChaCha8Rng, c: [f64; 2], spread: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                vec![
                    c[0] + spread * (rng.random::<f64>() - 0.5),
                    c[1] + spread * (rng.random::<f64>() - 0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn two_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = blob(&mut rng, [0.0, 0.0], 0.5, 10);
        pts.extend(blob(&mut rng, [20.0, 20.0], 0.5, 10));
        assert_eq!(cluster_count(&pts, 5), 2);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(cluster_count(&pts, 5), 0);
    }

    #[test]
    fn sparse_uniform_noise_has_no_clusters() {
        // Fewer than 2 * min_cluster_size points can never split into two.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..9)
            .map(|_| vec![rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0])
            .collect();
        assert_eq!(cluster_count(&pts, 5), 0);
    }

    #[test]
    fn three_blobs_merging_at_one_level() {
        // Equilateral arrangement: all three blobs join at the same distance.
        let mut pts = Vec::new();
        for c in [[0.0, 0.0], [10.0, 0.0], [5.0, 8.660_254_037_844_386]] {
            for d in [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1]] {
                pts.push(vec![c[0] + d[0], c[1] + d[1]]);
            }
        }
        assert_eq!(cluster_count(&pts, 3), 3);
    }
}
