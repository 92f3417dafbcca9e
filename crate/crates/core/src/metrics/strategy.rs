use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prompt::{Phase, StrategyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStat {
    pub batch: u32,
    pub strategy: Option<StrategyKind>,
    pub phase: Option<Phase>,
    pub generated: u32,
    pub accepted: u32,
    pub edv: Option<f64>,
    pub novelty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    pub batches: usize,
    pub generated: u64,
    pub accepted: u64,
    /// Pooled over the group's candidates.
    pub acceptance_percent: Option<f64>,
    /// Means over batches with a value.
    pub mean_edv: Option<f64>,
    pub mean_novelty: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub strategies: Vec<GroupStats>,
    pub phases: Vec<GroupStats>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn group<'a>(label: &str, rows: impl Iterator<Item = &'a BatchStat> + Clone) -> GroupStats {
    let generated: u64 = rows.clone().map(|r| r.generated as u64).sum();
    let accepted: u64 = rows.clone().map(|r| r.accepted as u64).sum();
    GroupStats {
        label: label.to_string(),
        batches: rows.clone().count(),
        generated,
        accepted,
        acceptance_percent: (generated > 0).then(|| 100.0 * accepted as f64 / generated as f64),
        mean_edv: mean(rows.clone().filter_map(|r| r.edv)),
        mean_novelty: mean(rows.filter_map(|r| r.novelty)),
    }
}

/// One row per strategy present (in default rotation order) and per phase.
pub fn per_strategy_stats(batches: &[BatchStat]) -> StrategyTable {
    let strategies = StrategyKind::DEFAULT_ORDER
        .iter()
        .filter(|k| batches.iter().any(|b| b.strategy == Some(**k)))
        .map(|&k| group(k.name(), batches.iter().filter(move |b| b.strategy == Some(k))))
        .collect();
    let phases = [Phase::Exploration, Phase::Exploitation]
        .iter()
        .filter(|p| batches.iter().any(|b| b.phase == Some(**p)))
        .map(|&p| group(p.name(), batches.iter().filter(move |b| b.phase == Some(p))))
        .collect();
    StrategyTable { strategies, phases }
}
