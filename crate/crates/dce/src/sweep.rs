//! One campaign per parameter value, plus a comparison table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dce_core::metrics::{collapse_rate, edv_retention, EdvFormulation, DEFAULT_COLLAPSE_THRESHOLD, DEFAULT_COLLAPSE_WINDOW};
use dce_core::replay::replay_stream;
use dce_core::{Arm, CampaignConfig, PromptTemplates};

use crate::analysis::{fmt_opt, series, RunData};
use crate::pipeline::{run_campaign, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Delta,
    PhaseSplit,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Delta => "delta",
            SweepParam::PhaseSplit => "phase_split",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tau" => Ok(SweepParam::Tau),
            "delta" => Ok(SweepParam::Delta),
            "phase_split" => Ok(SweepParam::PhaseSplit),
            _ => Err(format!("unknown sweep parameter `{s}`; expected tau, delta or phase_split")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: CampaignConfig,
}

impl SweepSpec {
    /// The base config with `value` applied, validated.
    pub fn config_for(&self, value: f64) -> Result<CampaignConfig, String> {
        let mut c = self.base.clone();
        c.set(self.param.key(), &value.to_string()).map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        for &v in &self.values {
            self.config_for(v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub dir: PathBuf,
    pub error: Option<String>,
    pub generated: u64,
    pub accepted: u64,
    pub retention: Option<f64>,
    pub collapse: Option<f64>,
    /// Survivors when the reference candidate stream is re-judged at this
    /// value; absent for phase_split.
    pub replayed_accepted: Option<usize>,
}

fn summarize(run: &RunData) -> (u64, u64, Option<f64>, Option<f64>) {
    let generated = run.batches.iter().map(|b| u64::from(b.generated)).sum();
    let accepted = run.batches.iter().map(|b| u64::from(b.accepted)).sum();
    let s = series(run);
    let retention = s
        .edv
        .iter()
        .find(|(f, _)| *f == EdvFormulation::Multiplicative)
        .and_then(|(_, e)| edv_retention(e).ok())
        .map(|r| r.percent);
    let views = run.accepted();
    let pairs: Vec<(u32, &[f64])> = views.iter().map(|v| (v.batch, v.vector)).collect();
    let window = DEFAULT_COLLAPSE_WINDOW.min(run.batch_count() / 2).max(1);
    let collapse = collapse_rate(&pairs, run.batch_count(), DEFAULT_COLLAPSE_THRESHOLD, window)
        .ok()
        .map(|c| c.percent);
    (generated, accepted, retention, collapse)
}

fn dir_name(param: SweepParam, v: f64) -> String {
    format!("{}-{}", param.key(), v)
}

/// Runs every value (same seed), continuing past failures. For τ and δ a
/// naive reference campaign supplies one fixed candidate stream that is
/// re-judged at each value.
pub fn run_sweep(
    spec: &SweepSpec,
    templates: &PromptTemplates,
    out_root: &Path,
    opts: &RunOptions,
) -> Result<Vec<SweepRow>, String> {
    spec.validate()?;
    std::fs::create_dir_all(out_root).map_err(|e| e.to_string())?;
    let reference = match spec.param {
        SweepParam::PhaseSplit => None,
        _ => {
            let dir = out_root.join("reference-naive");
            let cfg = spec.base.clone().with_arm(Arm::Naive);
            match run_or_load(cfg, templates, &dir, opts) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("reference stream unavailable: {e}");
                    None
                }
            }
        }
    };
    let mut rows = Vec::new();
    for &v in &spec.values {
        let dir = out_root.join(dir_name(spec.param, v));
        let replayed_accepted = reference.as_ref().map(|r| {
            let views = r.accepted();
            let stream: Vec<(f64, &[f64])> = views.iter().map(|x| (x.probability, x.vector)).collect();
            let c = &spec.base;
            let (tau, delta) = match spec.param {
                SweepParam::Tau => (v, c.delta),
                _ => (c.tau, v),
            };
            replay_stream(&stream, c.enable_vts.then_some(tau), c.enable_dedup.then_some(delta))
                .into_iter()
                .filter(|k| *k)
                .count()
        });
        let mut row = SweepRow {
            value: v,
            dir: dir.clone(),
            error: None,
            generated: 0,
            accepted: 0,
            retention: None,
            collapse: None,
            replayed_accepted,
        };
        let outcome = spec
            .config_for(v)
            .and_then(|cfg| run_or_load(cfg, templates, &dir, opts));
        match outcome {
            Ok(run) => {
                let (g, a, r, c) = summarize(&run);
                row.generated = g;
                row.accepted = a;
                row.retention = r;
                row.collapse = c;
            }
            Err(e) => {
                log::error!("{} = {v}: {e}", spec.param.key());
                row.error = Some(e);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn run_or_load(
    cfg: CampaignConfig,
    templates: &PromptTemplates,
    dir: &Path,
    opts: &RunOptions,
) -> Result<RunData, String> {
    let resume = dir.join(crate::rundir::CHECKPOINT_FILE).exists();
    let c = run_campaign(cfg, templates.clone(), dir, resume, opts.clone(), &mut |_| {})
        .map_err(|e| e.to_string())?;
    c.close().map_err(|e| e.to_string())?;
    RunData::load(dir).map_err(|e| e.to_string())
}

pub fn comparison_table(param: SweepParam, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{}\tstatus\tgenerated\taccepted\tedv_retention_percent\tcollapse_percent\treplayed_accepted\n",
        param.key()
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.value,
            r.error.as_deref().map_or("ok".to_string(), |e| format!("failed: {}", e.replace('\t', " "))),
            r.generated,
            r.accepted,
            fmt_opt(r.retention),
            fmt_opt(r.collapse),
            r.replayed_accepted.map_or("NA".into(), |n| n.to_string())
        );
    }
    out
}
