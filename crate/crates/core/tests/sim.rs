use std::collections::BTreeMap;

use dce_core::prompt::IdeaRef;
use dce_core::sim::{parse_tag, sim_generate, SimState, SimWorld, EXCLUSION_FACTOR};
use dce_core::{PromptSignals, SimParams};
use dce_oracles as oracle;

fn world(concepts: usize) -> SimWorld {
    SimWorld::new(&SimParams {
        concepts,
        ..SimParams::default()
    })
}

fn draw_counts(w: &SimWorld, signals: &PromptSignals, draws: usize, seed: u64) -> Vec<u64> {
    let mut state = SimState::new(seed);
    let mut counts = vec![0u64; w.concept_count()];
    for b in 0..draws / 5 {
        for d in sim_generate(w, signals, 5, b as u32 + 1, 0.9, &mut state) {
            counts[d.concept] += 1;
        }
    }
    counts
}

#[test]
fn seed_7_probabilities_are_popularity_percentiles() {
    let w = world(5000);
    let mut state = SimState::new(7);
    let draws = sim_generate(&w, &PromptSignals::default(), 5, 1, 0.9, &mut state);
    assert_eq!(draws.len(), 5);
    for d in &draws {
        let k = d.concept;
        let less = w.popularity.iter().filter(|p| **p < w.popularity[k]).count();
        assert_eq!(d.idea.probability, less as f64 / 5000.0);
        assert_eq!(parse_tag(&d.idea.name), Some((k, d.paraphrase)));
        assert_eq!(d.idea.category, w.category_of(k));
    }
}

#[test]
fn most_popular_concept_is_drawn_most() {
    let w = world(5000);
    let counts = draw_counts(&w, &PromptSignals::default(), 1000, 3);
    let top = (0..counts.len()).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap();
    assert_eq!(top, 0, "concept 0 drawn {} times, {top} drawn {}", counts[0], counts[top]);
}

#[test]
fn excluding_everything_leaves_relative_weights_alone() {
    let w = world(200);
    let signals = PromptSignals {
        recent_exclusions: (0..w.concept_count())
            .map(|k| IdeaRef {
                name: w.idea_name(k, 0),
                description: String::new(),
            })
            .collect(),
        ..PromptSignals::default()
    };
    let weights = w.weights(&signals);
    for (k, wk) in weights.iter().enumerate() {
        assert_eq!(*wk, w.popularity[k] * EXCLUSION_FACTOR);
    }
    let counts = draw_counts(&w, &signals, 10_000, 11);
    let chi = oracle::chi_square(&counts, &w.popularity);
    let bound = oracle::chi_square_bound(w.concept_count() - 1, 4.0);
    assert!(chi < bound, "chi-square {chi} over {bound}");
}

#[test]
fn repeat_fraction_grows_with_draw_count() {
    // Pooled over seeds: share of draws whose concept already appeared, per
    // 50-batch window.
    let w = world(5000);
    let mut windows = [0u64; 4];
    for seed in 1..=8 {
        let mut state = SimState::new(seed);
        let mut seen = BTreeMap::new();
        for b in 0..200u32 {
            for d in sim_generate(&w, &PromptSignals::default(), 5, b + 1, 0.9, &mut state) {
                if seen.insert(d.concept, ()).is_some() {
                    windows[(b / 50) as usize] += 1;
                }
            }
        }
    }
    let fractions: Vec<f64> = windows.iter().map(|&r| r as f64 / (8.0 * 250.0)).collect();
    assert!(fractions.windows(2).all(|f| f[0] < f[1]), "{fractions:?}");
}
