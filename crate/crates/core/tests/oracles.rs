use dce_core::metrics::{self, EdvFormulation};
use dce_core::{hdbscan, vector};
use dce_oracles::{self as oracle, Item};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d <= 1e-9 * a.abs().max(b.abs()) || d < 1e-12
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y),
        (None, None) => true,
        _ => false,
    }
}

fn triples(items: &[Item]) -> Vec<(u32, f64, &[f64])> {
    items.iter().map(|i| (i.batch, i.probability, &i.vector[..])).collect()
}

fn pairs(items: &[Item]) -> Vec<(u32, &[f64])> {
    items.iter().map(|i| (i.batch, &i.vector[..])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edv_matches(seed in any::<u64>()) {
        let items = oracle::random_fixture(seed, 40, 6);
        for (k, f) in EdvFormulation::ALL.iter().enumerate() {
            let got = metrics::edv_series(&triples(&items), 6, *f);
            let want = oracle::edv(&items, 6, k as u8);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!(close_opt(*g, *w), "{f:?} {g:?} {w:?}");
            }
        }
    }

    #[test]
    fn novelty_matches(seed in any::<u64>()) {
        let items = oracle::random_fixture(seed, 40, 6);
        let got = metrics::novelty_series(&pairs(&items), 6);
        let want = oracle::novelty(&items, 6);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(close_opt(*g, *w));
        }
    }

    #[test]
    fn collapse_matches(seed in any::<u64>(), t in 0.5f64..1.0) {
        let items = oracle::random_fixture(seed, 40, 8);
        let got = metrics::collapse_rate(&pairs(&items), 8, t, 3).unwrap();
        prop_assert!(close(got.percent, oracle::collapse(&items, 8, t, 3)));
    }

    #[test]
    fn confusion_matches(seed in any::<u64>(), tau in 0.0f64..1.0, delta in 0.5f64..1.0) {
        let items = oracle::random_fixture(seed, 40, 5);
        let stream: Vec<(f64, &[f64])> = items.iter().map(|i| (i.probability, &i.vector[..])).collect();
        let m = metrics::confusion_matrix(&stream, tau, delta);
        let want = oracle::confusion(&items, tau, delta);
        prop_assert_eq!(
            [m.vts_accept_dedup_accept, m.vts_accept_dedup_reject, m.vts_reject_dedup_accept, m.vts_reject_dedup_reject],
            want
        );
        prop_assert_eq!(m.total(), items.len());
    }

    #[test]
    fn spearman_matches(seed in any::<u64>()) {
        let items = oracle::random_fixture(seed, 40, 5);
        let p: Vec<f64> = items.iter().map(|i| i.probability).collect();
        let d: Vec<f64> = items.iter().map(|i| i.vector[0]).collect();
        prop_assert!(close_opt(metrics::spearman(&p, &d), oracle::spearman(&p, &d)));
        let a = metrics::permutation_p_value(&p, &d, 500, seed);
        let b = oracle::permutation_p(&p, &d, 500, seed);
        match (a, b) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-6),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn coherence_matches(seed in any::<u64>()) {
        let items = oracle::random_fixture(seed, 40, 5);
        let v: Vec<(&str, &[f64])> = items.iter().map(|i| (i.category.as_str(), &i.vector[..])).collect();
        let c = metrics::category_coherence(&v);
        let (u, h, intra, inter) = oracle::coherence(&items);
        prop_assert_eq!(c.unique_labels, u);
        prop_assert!(close_opt(c.normalized_entropy, h));
        prop_assert!(close_opt(c.mean_intra, intra));
        prop_assert!(close_opt(c.mean_inter_centroid, inter));
    }

    #[test]
    fn greedy_baseline_matches(seed in any::<u64>(), delta in 0.5f64..1.0) {
        let items = oracle::random_fixture(seed, 30, 4);
        let views: Vec<dce_core::runlog::AcceptedView> = items
            .iter()
            .map(|i| dce_core::runlog::AcceptedView {
                batch: i.batch,
                probability: i.probability,
                category: &i.category,
                vector: &i.vector,
            })
            .collect();
        let logs = vec![views.clone(), views];
        let out = metrics::seed_rotation_baseline(&logs, delta).unwrap();
        let ordered: Vec<&[f64]> = out.order.iter().map(|&(l, i)| logs[l][i].vector).collect();
        prop_assert_eq!(out.kept, oracle::greedy_keep(&ordered, delta));
    }

    #[test]
    fn cosine_is_bounded(a in proptest::collection::vec(-5.0f64..5.0, 4), b in proptest::collection::vec(-5.0f64..5.0, 4)) {
        if let Ok(c) = vector::cosine(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - oracle::cos(&a, &b)).abs() < 1e-12);
        }
    }
}

fn blobs(seed: u64, centres: &[(f64, f64, f64, usize)]) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    for &(x, y, r, n) in centres {
        for _ in 0..n {
            pts.push(vec![x + r * rng.random_range(-1.0..1.0), y + r * rng.random_range(-1.0..1.0)]);
        }
    }
    pts
}

#[test]
fn hdbscan_matches_reference_on_geometries() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut cases: Vec<Vec<Vec<f64>>> = Vec::new();
    for s in 0..6 {
        cases.push(blobs(s, &[(0.0, 0.0, 0.5, 15), (10.0, 0.0, 0.5, 15), (5.0, 9.0, 0.8, 20)]));
        cases.push(blobs(s, &[(0.0, 0.0, 50.0, 40)]));
        cases.push(blobs(s, &[(0.0, 0.0, 5.0, 30), (0.0, 0.0, 0.3, 15), (3.0, 3.0, 0.3, 15)]));
        let k = rng.random_range(1..6);
        let centres: Vec<(f64, f64, f64, usize)> = (0..k)
            .map(|_| (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.1..4.0), rng.random_range(3..30)))
            .collect();
        cases.push(blobs(s + 100, &centres));
    }
    for (i, pts) in cases.iter().enumerate() {
        for mcs in [3, 5, 7, 10] {
            assert_eq!(
                hdbscan::cluster_count(pts, mcs),
                oracle::hdbscan::cluster_count(pts, mcs),
                "case {i} mcs {mcs}"
            );
        }
    }
}

#[test]
fn hdbscan_handles_duplicate_points() {
    let mut pts = vec![vec![0.0, 0.0]; 6];
    pts.extend(vec![vec![5.0, 5.0]; 6]);
    pts.push(vec![2.0, 9.0]);
    for mcs in [2, 3, 5] {
        assert_eq!(hdbscan::cluster_count(&pts, mcs), oracle::hdbscan::cluster_count(&pts, mcs));
    }
    assert_eq!(hdbscan::cluster_count(&pts, 5), 2);
}
