//! Per-batch prompt reconstruction from memory state, the rotating diversity
//! strategy and the campaign phase.

mod assumptions;
mod templates;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use rand::seq::index;
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use self::assumptions::{extract as extract_assumptions, AssumptionPattern, PATTERNS};
pub use self::templates::{fill, tidy, PromptTemplates, TEMPLATE_FILES};
use crate::config::CampaignConfig;
use crate::idea::Idea;
use crate::memory::SemanticIndex;

pub const DEFAULT_INDUSTRIES: [&str; 20] = [
    "hospitality",
    "aerospace engineering",
    "marine engineering",
    "veterinary medicine",
    "textile manufacturing",
    "urban planning",
    "theatre production",
    "beekeeping",
    "mining",
    "pharmaceutical logistics",
    "competitive cycling",
    "glassblowing",
    "deep-sea fishing",
    "video game design",
    "polar research",
    "professional kitchens",
    "orthopedic surgery",
    "railway maintenance",
    "perfumery",
    "circus arts",
];

pub const DEFAULT_CONSTRAINTS: [&str; 12] = [
    "must cost nothing to produce",
    "must work without electricity",
    "must be reusable 100 times",
    "must weigh less than 10 grams",
    "must be made by hand in under a minute",
    "must use exactly one material",
    "must be fully edible",
    "must survive a month underwater",
    "must be assembled without tools or adhesives",
    "must disappear completely within a week",
    "must be produced within 10 km of where it is used",
    "must be operable by a five-year-old",
];

/// How many industries the cross-industry block samples.
pub const INDUSTRIES_PER_BATCH: usize = 3;
/// How many inverted assumptions the inversion block lists at most.
pub const MAX_ASSUMPTIONS: usize = 3;
/// Category-distribution lines rendered before the rest are summarised.
pub const MAX_DISTRIBUTION_LINES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    GapTargeting,
    AssumptionInversion,
    CrossIndustry,
    ConstraintVariation,
}

impl StrategyKind {
    /// Rotation position `batch_index mod 4` → strategy. Gap targeting sits
    /// at position 0 so batch 100 is a gap-targeting batch.
    pub const DEFAULT_ORDER: [StrategyKind; 4] = [
        StrategyKind::GapTargeting,
        StrategyKind::AssumptionInversion,
        StrategyKind::CrossIndustry,
        StrategyKind::ConstraintVariation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::GapTargeting => "gap_targeting",
            StrategyKind::AssumptionInversion => "assumption_inversion",
            StrategyKind::CrossIndustry => "cross_industry",
            StrategyKind::ConstraintVariation => "constraint_variation",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::DEFAULT_ORDER
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

impl core::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyPayload {
    GapTargeting { categories: Vec<(String, usize)> },
    /// Gap targeting with nothing in memory yet.
    Breadth,
    AssumptionInversion { pairs: Vec<(String, String)> },
    CrossIndustry { industries: Vec<String> },
    ConstraintVariation { index: usize, constraint: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub payload: StrategyPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploration,
    Exploitation,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Exploration => "exploration",
            Phase::Exploitation => "exploitation",
        }
    }
}

impl core::fmt::Display for Phase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Name and description of an idea shown to the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaRef {
    pub name: String,
    pub description: String,
}

impl From<&Idea> for IdeaRef {
    fn from(i: &Idea) -> Self {
        Self {
            name: i.name.clone(),
            description: i.description.clone(),
        }
    }
}

/// Structured account of what went into a prompt. Logged with each batch and
/// read by the simulated generator in place of the prompt text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptSignals {
    /// Newest first.
    pub recent_exclusions: Vec<IdeaRef>,
    pub dense_flags: Vec<IdeaRef>,
    pub category_counts: BTreeMap<String, usize>,
    pub targeted_categories: Vec<String>,
    pub strategy: Option<Strategy>,
    pub phase: Option<Phase>,
    /// Threshold quoted in the tail-sampling instruction, when present.
    pub tail_threshold: Option<f64>,
}

/// The memory queries prompt construction needs.
pub trait MemoryQueries {
    fn recent(&self, k: usize) -> Vec<&Idea>;
    fn dense_regions(&self, k: usize, m: usize) -> Vec<&Idea>;
    fn category_distribution(&self) -> BTreeMap<String, usize>;

    fn underrepresented_categories(&self, j: usize) -> Vec<(String, usize)> {
        crate::memory::lowest_counts(&self.category_distribution(), j)
    }
}

impl MemoryQueries for SemanticIndex {
    fn recent(&self, k: usize) -> Vec<&Idea> {
        SemanticIndex::recent(self, k)
    }
    fn dense_regions(&self, k: usize, m: usize) -> Vec<&Idea> {
        SemanticIndex::dense_regions(self, k, m)
    }
    fn category_distribution(&self) -> BTreeMap<String, usize> {
        SemanticIndex::category_distribution(self)
    }
}

pub fn strategy_for_batch(order: &[StrategyKind; 4], batch_index: u32) -> StrategyKind {
    order[(batch_index % 4) as usize]
}

pub fn phase_for_batch(config: &CampaignConfig, batch_index: u32) -> Phase {
    if batch_index <= config.exploration_batches() {
        Phase::Exploration
    } else {
        Phase::Exploitation
    }
}

/// How many batches in `1..=batch_index` use rotation position `position`.
pub fn invocation_count(position: u32, batch_index: u32) -> u32 {
    if position == 0 {
        batch_index / 4
    } else if batch_index >= position {
        (batch_index - position) / 4 + 1
    } else {
        0
    }
}

fn render_lines<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for it in items {
        let _ = writeln!(out, "  - {it}");
    }
    out.trim_end_matches('\n').into()
}

fn render_categories(cats: &[(String, usize)]) -> String {
    cats.iter()
        .map(|(l, c)| format!("{l} ({c} {})", if *c == 1 { "idea" } else { "ideas" }))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Resolves the strategy for this batch and renders its instruction block.
///
/// `invocation` is the 1-based count of batches so far that used this
/// strategy; constraint variation walks its roster with it.
pub fn strategy_block<M: MemoryQueries + ?Sized, R: RngCore + ?Sized>(
    kind: StrategyKind,
    config: &CampaignConfig,
    memory: &M,
    invocation: u32,
    rng: &mut R,
    templates: &PromptTemplates,
) -> (Strategy, String) {
    match kind {
        StrategyKind::GapTargeting => {
            let cats = memory.underrepresented_categories(config.gap_categories);
            if cats.is_empty() {
                (
                    Strategy {
                        kind,
                        payload: StrategyPayload::Breadth,
                    },
                    templates.gap_breadth.clone(),
                )
            } else {
                let text = fill(
                    &templates.gap_targeting,
                    &[("categories", &render_categories(&cats))],
                );
                (
                    Strategy {
                        kind,
                        payload: StrategyPayload::GapTargeting { categories: cats },
                    },
                    text,
                )
            }
        }
        StrategyKind::AssumptionInversion => {
            let recent = memory.recent(config.recent_k);
            let pairs = extract_assumptions(&recent, MAX_ASSUMPTIONS);
            let text = fill(
                &templates.assumption_inversion,
                &[
                    ("assumptions", &render_lines(pairs.iter().map(|p| p.0.as_str()))),
                    ("inversions", &render_lines(pairs.iter().map(|p| p.1.as_str()))),
                ],
            );
            (
                Strategy {
                    kind,
                    payload: StrategyPayload::AssumptionInversion { pairs },
                },
                text,
            )
        }
        StrategyKind::CrossIndustry => {
            let picks = index::sample(rng, config.industries.len(), INDUSTRIES_PER_BATCH);
            let industries: Vec<String> = picks
                .iter()
                .map(|i| config.industries[i].clone())
                .collect();
            let questions = industries
                .iter()
                .map(|ind| {
                    format!(
                        "What would {} look like if designed by someone from {}?",
                        config.domain, ind
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            let text = fill(&templates.cross_industry, &[("questions", &questions)]);
            (
                Strategy {
                    kind,
                    payload: StrategyPayload::CrossIndustry { industries },
                },
                text,
            )
        }
        StrategyKind::ConstraintVariation => {
            let idx = (invocation.max(1) as usize - 1) % config.constraints.len();
            let constraint = config.constraints[idx].clone();
            let text = fill(
                &templates.constraint_variation,
                &[("constraint", &constraint)],
            );
            (
                Strategy {
                    kind,
                    payload: StrategyPayload::ConstraintVariation {
                        index: idx,
                        constraint,
                    },
                },
                text,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltPrompt {
    pub text: String,
    pub signals: PromptSignals,
}

fn format_tau(tau: f64) -> String {
    let s = format!("{tau:.2}");
    // Keep extra precision for thresholds like 0.005.
    if (s.parse::<f64>().unwrap_or(tau) - tau).abs() > 1e-12 {
        tau.to_string()
    } else {
        s
    }
}

fn render_distribution(dist: &BTreeMap<String, usize>) -> String {
    if dist.is_empty() {
        return "none yet".into();
    }
    let mut rows: Vec<(&String, &usize)> = dist.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let mut out = String::new();
    for (label, count) in rows.iter().take(MAX_DISTRIBUTION_LINES) {
        let _ = writeln!(out, "  {label}: {count}");
    }
    if rows.len() > MAX_DISTRIBUTION_LINES {
        let _ = writeln!(
            out,
            "  (+ {} more categories)",
            rows.len() - MAX_DISTRIBUTION_LINES
        );
    }
    out.trim_end_matches('\n').into()
}

fn render_ideas(ideas: &[IdeaRef], with_description: bool) -> String {
    if ideas.is_empty() {
        return "none yet".into();
    }
    let mut out = String::new();
    for i in ideas {
        if with_description {
            let _ = writeln!(out, "  - {}: {}", i.name, i.description);
        } else {
            let _ = writeln!(out, "  - {} (dense cluster)", i.name);
        }
    }
    out.trim_end_matches('\n').into()
}

/// Assembles the prompt for `batch_index` (1-based).
///
/// With prompt evolution disabled the static template is used and the
/// signals carry only the tail threshold.
pub fn build_prompt<M: MemoryQueries + ?Sized, R: RngCore + ?Sized>(
    config: &CampaignConfig,
    memory: &M,
    batch_index: u32,
    rng: &mut R,
    templates: &PromptTemplates,
) -> BuiltPrompt {
    let batch_size = config.batch_size.to_string();
    let tau = format_tau(config.tau);
    let vts = if config.enable_vts {
        fill(&templates.vts, &[("tau", &tau)])
    } else {
        String::new()
    };
    let tail_threshold = config.enable_vts.then_some(config.tau);

    if !config.enable_prompt_evolution {
        let text = fill(
            &templates.static_prompt,
            &[
                ("persona", &config.persona),
                ("batch_size", &batch_size),
                ("domain", &config.domain),
                ("vts_instruction", &vts),
            ],
        );
        return BuiltPrompt {
            text: tidy(&text),
            signals: PromptSignals {
                tail_threshold,
                ..PromptSignals::default()
            },
        };
    }

    let phase = phase_for_batch(config, batch_index);
    let kind = strategy_for_batch(&config.strategy_order, batch_index);
    let position = batch_index % 4;
    let invocation = invocation_count(position, batch_index);
    let (strategy, strategy_text) =
        strategy_block(kind, config, memory, invocation, rng, templates);

    let recent: Vec<IdeaRef> = memory
        .recent(config.recent_k)
        .into_iter()
        .map(IdeaRef::from)
        .collect();
    let dense: Vec<IdeaRef> = memory
        .dense_regions(config.dense_k, config.density_neighbors)
        .into_iter()
        .map(IdeaRef::from)
        .collect();
    let dist = memory.category_distribution();
    let targeted = match &strategy.payload {
        StrategyPayload::GapTargeting { categories } => {
            categories.iter().map(|(l, _)| l.clone()).collect()
        }
        _ => Vec::new(),
    };
    let phase_text = match phase {
        Phase::Exploration => &templates.phase_exploration,
        Phase::Exploitation => &templates.phase_exploitation,
    };

    let text = fill(
        &templates.base,
        &[
            ("persona", &config.persona),
            ("batch_size", &batch_size),
            ("domain", &config.domain),
            ("vts_instruction", &vts),
            ("strategy_instruction", &strategy_text),
            ("phase_instruction", phase_text),
            ("recent_ideas", &render_ideas(&recent, true)),
            ("near_duplicates", &render_ideas(&dense, false)),
            ("category_distribution", &render_distribution(&dist)),
        ],
    );

    BuiltPrompt {
        text: tidy(&text),
        signals: PromptSignals {
            recent_exclusions: recent,
            dense_flags: dense,
            category_counts: dist,
            targeted_categories: targeted,
            strategy: Some(strategy),
            phase: Some(phase),
            tail_threshold,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryEntry;
    use crate::vector::Embedding;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct FakeMemory {
        ideas: Vec<Idea>,
        dist: BTreeMap<String, usize>,
    }

    impl MemoryQueries for FakeMemory {
        fn recent(&self, k: usize) -> Vec<&Idea> {
            self.ideas.iter().rev().take(k).collect()
        }
        fn dense_regions(&self, k: usize, _m: usize) -> Vec<&Idea> {
            self.ideas.iter().take(k).collect()
        }
        fn category_distribution(&self) -> BTreeMap<String, usize> {
            self.dist.clone()
        }
    }

    fn gap_memory() -> FakeMemory {
        let mut dist = BTreeMap::new();
        dist.insert("Thermal regulation".into(), 2);
        dist.insert("Ocean-degradable materials".into(), 3);
        dist.insert("Agricultural waste reuse".into(), 4);
        dist.insert("Biodegradable films".into(), 47);
        FakeMemory {
            ideas: vec![Idea::new("Kelp-fiber panels", "Insulation", "Thermal regulation", 0.03, 1, 0).unwrap()],
            dist,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn first_batch_with_empty_memory() {
        let cfg = CampaignConfig::default();
        let p = build_prompt(&cfg, &SemanticIndex::new(), 1, &mut rng(), &PromptTemplates::default());
        assert!(p.text.starts_with("You are an inventive packaging engineer. Generate exactly 5 novel sustainable packaging ideas."));
        assert!(p.text.contains("aim for ideas with probability below 0.10"));
        assert_eq!(p.text.matches("none yet").count(), 3);
        assert_eq!(p.signals.tail_threshold, Some(0.10));
        assert!(p.signals.recent_exclusions.is_empty());
    }

    #[test]
    fn batch_100_is_gap_targeting_in_exploitation() {
        let cfg = CampaignConfig::default();
        let p = build_prompt(&cfg, &gap_memory(), 100, &mut rng(), &PromptTemplates::default());
        assert_eq!(p.signals.phase, Some(Phase::Exploitation));
        let s = p.signals.strategy.as_ref().unwrap();
        assert_eq!(s.kind, StrategyKind::GapTargeting);
        assert!(p.text.contains("Thermal regulation (2 ideas)"));
        assert_eq!(
            p.signals.targeted_categories,
            vec!["Thermal regulation", "Ocean-degradable materials", "Agricultural waste reuse"]
        );
    }

    #[test]
    fn batch_10_is_exploration() {
        let cfg = CampaignConfig::default();
        let p = build_prompt(&cfg, &gap_memory(), 10, &mut rng(), &PromptTemplates::default());
        assert_eq!(p.signals.phase, Some(Phase::Exploration));
        assert!(p.text.contains("PHASE: Exploration."));
    }

    #[test]
    fn gap_block_lists_three_lowest() {
        let cfg = CampaignConfig::default();
        let (s, text) = strategy_block(
            StrategyKind::GapTargeting,
            &cfg,
            &gap_memory(),
            1,
            &mut rng(),
            &PromptTemplates::default(),
        );
        assert!(text.contains("Thermal regulation (2 ideas); Ocean-degradable materials (3 ideas); Agricultural waste reuse (4 ideas)"));
        assert!(text.contains("At least half of your ideas MUST target these."));
        assert!(matches!(s.payload, StrategyPayload::GapTargeting { ref categories } if categories.len() == 3));
    }

    #[test]
    fn gap_block_falls_back_to_breadth() {
        let cfg = CampaignConfig::default();
        let (s, _) = strategy_block(
            StrategyKind::GapTargeting,
            &cfg,
            &SemanticIndex::new(),
            1,
            &mut rng(),
            &PromptTemplates::default(),
        );
        assert_eq!(s.payload, StrategyPayload::Breadth);
    }

    #[test]
    fn cross_industry_replays_with_same_seed() {
        let cfg = CampaignConfig::default();
        let t = PromptTemplates::default();
        let run = || {
            let mut r = rng();
            strategy_block(StrategyKind::CrossIndustry, &cfg, &SemanticIndex::new(), 1, &mut r, &t)
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        match a.payload {
            StrategyPayload::CrossIndustry { industries } => {
                assert_eq!(industries.len(), 3);
                let mut u = industries.clone();
                u.sort();
                u.dedup();
                assert_eq!(u.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constraint_rotation() {
        let cfg = CampaignConfig::default();
        let (s, text) = strategy_block(
            StrategyKind::ConstraintVariation,
            &cfg,
            &SemanticIndex::new(),
            4,
            &mut rng(),
            &PromptTemplates::default(),
        );
        assert!(text.contains(DEFAULT_CONSTRAINTS[3]));
        assert!(matches!(s.payload, StrategyPayload::ConstraintVariation { index: 3, .. }));
        // Batch 3 is the first constraint batch under the default order.
        assert_eq!(invocation_count(3, 3), 1);
        assert_eq!(invocation_count(3, 15), 4);
        assert_eq!(invocation_count(0, 3), 0);
        assert_eq!(invocation_count(0, 100), 25);
    }

    #[test]
    fn rotation_counts_over_200_batches() {
        let cfg = CampaignConfig::default();
        let mut counts = BTreeMap::new();
        let mut phases = BTreeMap::new();
        for b in 1..=200 {
            *counts.entry(strategy_for_batch(&cfg.strategy_order, b)).or_insert(0) += 1;
            *phases.entry(phase_for_batch(&cfg, b)).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c == 50));
        assert_eq!(phases[&Phase::Exploration], 80);
        assert_eq!(phases[&Phase::Exploitation], 120);
        assert_eq!(phase_for_batch(&cfg, 80), Phase::Exploration);
        assert_eq!(phase_for_batch(&cfg, 81), Phase::Exploitation);
    }

    #[test]
    fn static_prompt_without_evolution() {
        let cfg = CampaignConfig {
            enable_prompt_evolution: false,
            enable_vts: false,
            ..CampaignConfig::default()
        };
        let p = build_prompt(&cfg, &gap_memory(), 7, &mut rng(), &PromptTemplates::default());
        assert!(!p.text.contains("STRATEGY"));
        assert!(!p.text.contains("IMPORTANT"));
        assert_eq!(p.signals, PromptSignals::default());
    }

    #[test]
    fn real_index_feeds_signals_newest_first() {
        let mut idx = SemanticIndex::new();
        for i in 1..=12u64 {
            idx.insert(MemoryEntry {
                idea: Idea::new(format!("idea {i}"), "d", "c", 0.01, 1, 0).unwrap(),
                embedding: Embedding::new(vec![1.0, i as f64], "t").unwrap(),
                accept_order: i,
                batch_index: 1,
            })
            .unwrap();
        }
        let p = build_prompt(&CampaignConfig::default(), &idx, 5, &mut rng(), &PromptTemplates::default());
        assert_eq!(p.signals.recent_exclusions.len(), 10);
        assert_eq!(p.signals.recent_exclusions[0].name, "idea 12");
        assert_eq!(p.signals.dense_flags.len(), 5);
    }

    #[test]
    fn distribution_rendering_truncates() {
        let mut dist = BTreeMap::new();
        for i in 0..30 {
            dist.insert(format!("cat{i:02}"), i + 1);
        }
        let r = render_distribution(&dist);
        assert!(r.starts_with("  cat29: 30"));
        assert!(r.ends_with("(+ 5 more categories)"));
    }
}
