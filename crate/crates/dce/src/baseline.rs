//! Pooled seed-rotation baseline over several naive runs.

use std::fmt::Write as _;

use dce_core::metrics::{
    collapse_rate, edv_retention, edv_series, seed_rotation_baseline, EdvFormulation, PooledIdea,
    DEFAULT_COLLAPSE_THRESHOLD, DEFAULT_COLLAPSE_WINDOW,
};
use dce_core::Arm;

use crate::analysis::{fmt_opt, RunData};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSummary {
    pub logs: usize,
    pub pooled: usize,
    pub kept: usize,
    pub rejected_percent: f64,
    pub collapse_percent: Option<f64>,
    pub retention_percent: Option<f64>,
}

/// Checks the runs are naive and share a batch structure, then pools and
/// deduplicates them.
pub fn seed_rotation(runs: &[RunData], delta: f64) -> Result<(BaselineSummary, String), String> {
    if runs.len() < 2 {
        return Err("seed rotation needs at least two run directories".into());
    }
    let first = &runs[0].config;
    for r in runs {
        if r.arm() != Some(Arm::Naive) {
            return Err(format!("{} is not a naive run", r.dir.display()));
        }
        let c = &r.config;
        if c.batches != first.batches || c.batch_size != first.batch_size || c.domain != first.domain {
            return Err(format!("{} differs in domain or batch structure", r.dir.display()));
        }
    }
    let logs: Vec<Vec<PooledIdea<'_>>> = runs.iter().map(RunData::accepted).collect();
    let outcome = seed_rotation_baseline(&logs, delta).map_err(|e| e.to_string())?;
    let survivors = outcome.survivors(&logs);
    let b = first.batches;
    let pairs: Vec<(u32, &[f64])> = survivors.iter().map(|s| (s.batch, s.vector)).collect();
    let window = DEFAULT_COLLAPSE_WINDOW.min(b / 2).max(1);
    let collapse_percent = collapse_rate(&pairs, b, DEFAULT_COLLAPSE_THRESHOLD, window)
        .ok()
        .map(|c| c.percent);
    let triples: Vec<(u32, f64, &[f64])> =
        survivors.iter().map(|s| (s.batch, s.probability, s.vector)).collect();
    let retention_percent = edv_retention(&edv_series(&triples, b, EdvFormulation::Multiplicative))
        .ok()
        .map(|r| r.percent);
    let pooled = outcome.pooled();
    let kept = outcome.kept_count();
    let summary = BaselineSummary {
        logs: runs.len(),
        pooled,
        kept,
        rejected_percent: if pooled == 0 {
            0.0
        } else {
            100.0 * (pooled - kept) as f64 / pooled as f64
        },
        collapse_percent,
        retention_percent,
    };
    let mut stream = String::from("position\tlog\tbatch\tcategory\tprobability\tmax_similarity\tkept\n");
    for (i, &(log, idx)) in outcome.order.iter().enumerate() {
        let idea = &logs[log][idx];
        let _ = writeln!(
            stream,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            runs[log].dir.display(),
            idea.batch,
            idea.category.replace('\t', " "),
            idea.probability,
            outcome.max_similarity[i],
            outcome.kept[i]
        );
    }
    Ok((summary, stream))
}

pub fn summary_table(s: &BaselineSummary, delta: f64) -> String {
    let mut out = String::from("metric\tvalue\n");
    let _ = writeln!(out, "logs\t{}", s.logs);
    let _ = writeln!(out, "delta\t{delta}");
    let _ = writeln!(out, "pooled\t{}", s.pooled);
    let _ = writeln!(out, "kept\t{}", s.kept);
    let _ = writeln!(out, "rejected_percent\t{}", s.rejected_percent);
    let _ = writeln!(out, "collapse_percent\t{}", fmt_opt(s.collapse_percent));
    let _ = writeln!(out, "edv_retention_percent\t{}", fmt_opt(s.retention_percent));
    out
}
