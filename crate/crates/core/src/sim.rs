//! Deterministic stand-in for a hosted generator and embedder.
//!
//! A [`SimWorld`] is a fixed set of concepts with unit embedding vectors and
//! Zipf popularity. Sampling follows popularity, so an unprompted generator
//! keeps returning the same head concepts: the cross-batch collapse the
//! engine exists to prevent. Each time a concept is drawn again its paraphrase
//! counter advances, and the embedder perturbs the concept vector for that
//! paraphrase, which yields near-duplicates rather than exact copies.
//!
//! Idea names carry a `(c<concept>/p<paraphrase>)` tag; it is the one piece of
//! text the embedder decodes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SimParams;
use crate::idea::Idea;
use crate::prompt::PromptSignals;
use crate::vector::{cosine, dot, l2_norm};

/// Weight multiplier for concepts near an excluded one.
pub const EXCLUSION_FACTOR: f64 = 0.05;
/// Cosine radius around an excluded concept that is suppressed.
pub const EXCLUSION_RADIUS: f64 = 0.9;
/// Weight multiplier for concepts in a targeted category.
pub const TARGET_FACTOR: f64 = 4.0;
/// Range of the orthogonal perturbation size `s` drawn per paraphrase. A
/// paraphrase has cosine `1 / sqrt(1 + s^2)` to its concept, so between
/// about 0.935 and 0.995.
pub const PARAPHRASE_SCALE: (f64, f64) = (0.1, 0.38);

const MATERIALS: [&str; 16] = [
    "Kelp", "Mycelium", "Hemp", "Bagasse", "Chitosan", "Cork", "Bamboo", "Wool",
    "Clay", "Shellac", "Coffee-ground", "Rice-husk", "Beeswax", "Lignin", "Whey", "Slate",
];
const FORMS: [&str; 12] = [
    "crate", "wrap", "liner", "pouch", "tray", "sleeve", "capsule", "label",
    "foam", "shell", "insert", "tube",
];
const USES: [&str; 10] = [
    "fresh produce", "cold-chain medicine", "electronics", "bulk grains", "cosmetics",
    "take-away meals", "seedlings", "spare parts", "beverages", "textiles",
];
const CATEGORY_ADJ: [&str; 10] = [
    "Biodegradable", "Reusable", "Edible", "Water-soluble", "Compressed",
    "Thermal", "Ocean-safe", "Mineral", "Fermented", "Modular",
];
const CATEGORY_NOUN: [&str; 10] = [
    "films", "containers", "coatings", "composites", "fibres",
    "foams", "laminates", "inks", "closures", "cushioning",
];

/// A world of `N` concepts in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub dimension: usize,
    pub seed: u64,
    pub concept_vectors: Vec<Vec<f64>>,
    /// Zipf weights, rank-ordered (concept 0 is the most popular).
    pub popularity: Vec<f64>,
    pub concept_category: Vec<usize>,
    pub category_labels: Vec<String>,
    percentiles: Vec<f64>,
}

fn gaussian_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = l2_norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over a combined word.
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl SimWorld {
    pub fn new(params: &SimParams) -> Self {
        let n = params.concepts;
        let d = params.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(params.world_seed);
        let concept_vectors: Vec<Vec<f64>> = (0..n).map(|_| gaussian_unit(&mut rng, d)).collect();
        let popularity: Vec<f64> = (0..n)
            .map(|k| 1.0 / libm::pow((k + 1) as f64, params.zipf_exponent))
            .collect();
        let concept_category: Vec<usize> = (0..n)
            .map(|_| rng.random_range(0..params.categories))
            .collect();
        let category_labels = (0..params.categories)
            .map(|c| {
                let adj = CATEGORY_ADJ[c % CATEGORY_ADJ.len()];
                let noun = CATEGORY_NOUN[(c / CATEGORY_ADJ.len()) % CATEGORY_NOUN.len()];
                let round = c / (CATEGORY_ADJ.len() * CATEGORY_NOUN.len());
                if round == 0 {
                    format!("{adj} {noun}")
                } else {
                    format!("{adj} {noun} {}", round + 1)
                }
            })
            .collect();
        let percentiles = popularity_percentiles(&popularity);
        Self {
            dimension: d,
            seed: params.world_seed,
            concept_vectors,
            popularity,
            concept_category,
            category_labels,
            percentiles,
        }
    }

    pub fn concept_count(&self) -> usize {
        self.concept_vectors.len()
    }

    /// Fraction of concepts strictly less popular than concept `k`.
    pub fn percentile(&self, k: usize) -> f64 {
        self.percentiles[k]
    }

    pub fn category_of(&self, k: usize) -> &str {
        &self.category_labels[self.concept_category[k]]
    }

    pub fn idea_name(&self, k: usize, paraphrase: u32) -> String {
        let m = MATERIALS[k % MATERIALS.len()];
        let f = FORMS[(k / MATERIALS.len()) % FORMS.len()];
        format!("{m} {f} (c{k}/p{paraphrase})")
    }

    pub fn idea_description(&self, k: usize, paraphrase: u32) -> String {
        let f = FORMS[(k / MATERIALS.len()) % FORMS.len()];
        let m = MATERIALS[k % MATERIALS.len()].to_lowercase();
        let u = USES[(k / 7) % USES.len()];
        format!("A {f} made from {m} for {u}, design {k}, wording {paraphrase}.")
    }

    /// Embedding for concept `k` at paraphrase `j`: the concept vector itself
    /// for `j = 0`, otherwise the concept vector plus a seeded perturbation
    /// orthogonal to it.
    pub fn paraphrase_vector(&self, k: usize, j: u32) -> Vec<f64> {
        let base = &self.concept_vectors[k];
        if j == 0 {
            return base.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(self.seed, k as u64), u64::from(j)));
        let d = self.dimension;
        let scale = rng.random_range(PARAPHRASE_SCALE.0..PARAPHRASE_SCALE.1);
        loop {
            let mut u = gaussian_unit(&mut rng, d);
            let proj = dot(&u, base);
            for (ui, bi) in u.iter_mut().zip(base) {
                *ui -= proj * bi;
            }
            let n = l2_norm(&u);
            if n > 1e-6 {
                return base
                    .iter()
                    .zip(&u)
                    .map(|(b, x)| b + scale * x / n)
                    .collect();
            }
        }
    }

    /// Embeds idea text. Tagged text maps to its concept paraphrase; anything
    /// else gets a pseudo-random unit vector seeded by the text.
    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        match parse_tag(text) {
            Some((k, j)) if k < self.concept_count() => self.paraphrase_vector(k, j),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, fnv1a(text)));
                gaussian_unit(&mut rng, self.dimension)
            }
        }
    }

    /// Concepts within [`EXCLUSION_RADIUS`] of `k`, including `k`.
    pub fn neighbourhood(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let v = &self.concept_vectors[k];
        self.concept_vectors
            .iter()
            .enumerate()
            .filter(move |(i, w)| *i == k || dot(v, w) >= EXCLUSION_RADIUS)
            .map(|(i, _)| i)
    }

    /// Sampling weights after applying the prompt signals.
    pub fn weights(&self, signals: &PromptSignals) -> Vec<f64> {
        self.weights_cached(signals, &mut BTreeMap::new())
    }

    /// [`SimWorld::weights`] reusing neighbourhoods already found.
    pub fn weights_cached(
        &self,
        signals: &PromptSignals,
        cache: &mut BTreeMap<usize, Vec<usize>>,
    ) -> Vec<f64> {
        let mut w = self.popularity.clone();
        let mut excluded = alloc::vec![false; self.concept_count()];
        for r in signals
            .recent_exclusions
            .iter()
            .chain(signals.dense_flags.iter())
        {
            if let Some((k, _)) = parse_tag(&r.name) {
                if k < self.concept_count() && !excluded[k] {
                    let hood = cache
                        .entry(k)
                        .or_insert_with(|| self.neighbourhood(k).collect());
                    for &i in hood.iter() {
                        excluded[i] = true;
                    }
                }
            }
        }
        let targeted: Vec<usize> = self
            .category_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| signals.targeted_categories.iter().any(|t| t == *l))
            .map(|(i, _)| i)
            .collect();
        for (k, wk) in w.iter_mut().enumerate() {
            if excluded[k] {
                *wk *= EXCLUSION_FACTOR;
            }
            if targeted.contains(&self.concept_category[k]) {
                *wk *= TARGET_FACTOR;
            }
        }
        w
    }
}

fn popularity_percentiles(pop: &[f64]) -> Vec<f64> {
    let n = pop.len();
    let mut sorted: Vec<f64> = pop.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    pop.iter()
        .map(|p| sorted.partition_point(|x| x < p) as f64 / n as f64)
        .collect()
}

/// Decodes the trailing `(c<k>/p<j>)` tag of a simulated idea name.
pub fn parse_tag(text: &str) -> Option<(usize, u32)> {
    let start = text.rfind("(c")?;
    let rest = &text[start + 2..];
    let end = rest.find(')')?;
    let (k, j) = rest[..end].split_once("/p")?;
    Some((k.parse().ok()?, j.parse().ok()?))
}

/// Mutable state of a simulated generator: its random stream and the
/// per-concept paraphrase counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub rng: ChaCha8Rng,
    pub paraphrases: BTreeMap<usize, u32>,
    /// Derived from the world alone; not part of a snapshot.
    neighbours: BTreeMap<usize, Vec<usize>>,
}

/// Serializable form of [`SimState`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStateSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
    pub paraphrases: BTreeMap<usize, u32>,
}

impl SimState {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            paraphrases: BTreeMap::new(),
            neighbours: BTreeMap::new(),
        }
    }

    pub fn snapshot(&self) -> SimStateSnapshot {
        SimStateSnapshot {
            seed: self.rng.get_seed(),
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
            paraphrases: self.paraphrases.clone(),
        }
    }

    pub fn restore(s: &SimStateSnapshot) -> Self {
        let mut rng = ChaCha8Rng::from_seed(s.seed);
        rng.set_stream(s.stream);
        rng.set_word_pos(s.word_pos);
        Self {
            rng,
            paraphrases: s.paraphrases.clone(),
            neighbours: BTreeMap::new(),
        }
    }
}

/// One simulated draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub idea: Idea,
    pub concept: usize,
    pub paraphrase: u32,
}

fn pick(cumulative: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total = *cumulative.last()?;
    if total <= 0.0 {
        return None;
    }
    let x = rng.random::<f64>() * total;
    Some(cumulative.partition_point(|c| *c <= x).min(cumulative.len() - 1))
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Samples `n` ideas for batch `batch_index`.
///
/// Concepts are drawn with replacement in proportion to [`SimWorld::weights`].
/// When the signals carry a tail threshold, each slot is, with probability
/// `vts_compliance`, drawn only from concepts whose percentile lies below it.
pub fn sim_generate(
    world: &SimWorld,
    signals: &PromptSignals,
    n: usize,
    batch_index: u32,
    vts_compliance: f64,
    state: &mut SimState,
) -> Vec<SimDraw> {
    if n == 0 {
        return Vec::new();
    }
    let weights = world.weights_cached(signals, &mut state.neighbours);
    let full = cumulative(weights.iter().copied());
    let tail = signals.tail_threshold.map(|t| {
        cumulative(
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| if world.percentile(k) < t { *w } else { 0.0 }),
        )
    });
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        let comply = tail.is_some() && state.rng.random::<f64>() < vts_compliance;
        let k = match (&tail, comply) {
            (Some(t), true) => pick(t, &mut state.rng).or_else(|| pick(&full, &mut state.rng)),
            _ => pick(&full, &mut state.rng),
        };
        let Some(k) = k else { break };
        let counter = state.paraphrases.entry(k).or_insert(0);
        let j = *counter;
        *counter += 1;
        let idea = Idea {
            name: world.idea_name(k, j),
            description: world.idea_description(k, j),
            category: world.category_of(k).into(),
            probability: world.percentile(k),
            batch_index,
            slot_index: slot as u32,
        };
        out.push(SimDraw {
            idea,
            concept: k,
            paraphrase: j,
        });
    }
    out
}

/// Cosine between two paraphrases of the same or different concepts.
pub fn paraphrase_similarity(world: &SimWorld, a: (usize, u32), b: (usize, u32)) -> f64 {
    let va = world.paraphrase_vector(a.0, a.1);
    let vb = world.paraphrase_vector(b.0, b.1);
    cosine(&va, &vb).unwrap_or(0.0)
}
