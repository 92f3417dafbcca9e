//! Reading finished (or partial) run directories and computing reports.
//!
//! Nothing here writes into a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dce_core::metrics::{
    self, category_coherence, cluster_milestones, collapse_rate, confusion_matrix, edv_retention,
    edv_series, novelty_series, per_strategy_stats, rolling, typicality_correlation, BatchStat,
    EdvFormulation, GroupStats, CLUSTER_MILESTONES, DEFAULT_COLLAPSE_THRESHOLD,
    DEFAULT_COLLAPSE_WINDOW, DEFAULT_PERMUTATIONS, ROLLING_WINDOW,
};
use dce_core::runlog::{accepted_views, AcceptedView};
use dce_core::{Arm, BatchRecord, CampaignConfig, CandidateRecord};

use crate::pipeline::checkpoint::Checkpoint;
use crate::pipeline::jsonl::{read_jsonl, JsonlError};
use crate::rundir::RunDir;
use crate::settings::{load_config, SettingsError};
use crate::store::{self, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("{0} is not a run directory (no config.cfg)")]
    NotARun(PathBuf),
    #[error(transparent)]
    Config(#[from] SettingsError),
    #[error(transparent)]
    Log(#[from] JsonlError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl AnalysisError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AnalysisError::NotARun(_) | AnalysisError::Log(_) | AnalysisError::Store(_) => 4,
            AnalysisError::Config(_) | AnalysisError::Invalid(_) => 2,
            AnalysisError::Io(_) => 1,
        }
    }
}

/// Everything analysis needs from one run directory.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub config: CampaignConfig,
    pub records: Vec<CandidateRecord>,
    pub batches: Vec<BatchRecord>,
    /// Memory vectors, indexed by accept order.
    pub vectors: Vec<Vec<f64>>,
    pub checkpoint: Option<Checkpoint>,
    /// Reasons the run cannot be treated as complete.
    pub gaps: Vec<String>,
}

impl RunData {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, AnalysisError> {
        let rd = RunDir::new(dir.as_ref());
        if !rd.config().exists() {
            return Err(AnalysisError::NotARun(rd.root().to_path_buf()));
        }
        let config = load_config(Some(&rd.config()), &[])?;
        let mut gaps = Vec::new();
        let log = read_jsonl::<CandidateRecord>(&rd.runlog(), 1)?;
        if log.torn_tail {
            gaps.push("runlog ends in a partial record".into());
        }
        let batches = read_jsonl::<BatchRecord>(&rd.batches(), 0)?;
        if batches.torn_tail {
            gaps.push("batch log ends in a partial record".into());
        }
        let checkpoint = match Checkpoint::read(&rd.checkpoint()) {
            Ok(c) => Some(c),
            Err(e) => {
                gaps.push(format!("checkpoint unreadable: {e}"));
                None
            }
        };
        let index = store::load(&rd.memory())?;
        let vectors: Vec<Vec<f64>> = index
            .entries()
            .iter()
            .map(|e| e.embedding.vector().to_vec())
            .collect();

        let mut records = log.values;
        let mut batches = batches.values;
        // Anything past the checkpoint belongs to an interrupted batch.
        if let Some(cp) = &checkpoint {
            if records.len() as u64 > cp.candidate_records || batches.len() as u64 > cp.batch_records
            {
                gaps.push("records past the last checkpoint were ignored".into());
                records.truncate(cp.candidate_records as usize);
                batches.truncate(cp.batch_records as usize);
            }
        }
        if (batches.len() as u32) < config.batches {
            gaps.push(format!(
                "{} of {} batches logged",
                batches.len(),
                config.batches
            ));
        }
        let (_, missing) = accepted_views(&records, &vectors);
        if missing > 0 {
            gaps.push(format!("{missing} accepted records have no stored vector"));
        }
        Ok(Self {
            dir: rd.root().to_path_buf(),
            config,
            records,
            batches,
            vectors,
            checkpoint,
            gaps,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn arm(&self) -> Option<Arm> {
        self.config.arm()
    }

    /// Accepted ideas in accept order.
    pub fn accepted(&self) -> Vec<AcceptedView<'_>> {
        accepted_views(&self.records, &self.vectors).0
    }

    /// Batches actually covered: the configured count, or fewer if the log
    /// stops early.
    pub fn batch_count(&self) -> u32 {
        self.config.batches.min(self.batches.len() as u32).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub collapse_thresholds: Vec<f64>,
    pub collapse_window: u32,
    pub confusion: bool,
    /// Overrides for the replayed confusion thresholds; the run's own τ and
    /// δ otherwise.
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub min_cluster_sizes: Vec<usize>,
    pub permutations: usize,
    pub permutation_seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            collapse_thresholds: vec![DEFAULT_COLLAPSE_THRESHOLD],
            collapse_window: DEFAULT_COLLAPSE_WINDOW,
            confusion: false,
            tau: None,
            delta: None,
            min_cluster_sizes: vec![5],
            permutations: DEFAULT_PERMUTATIONS,
            permutation_seed: 0,
        }
    }
}

/// Named TSV tables plus the warnings met while producing them.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    pub fn write(&self, out: &Path) -> std::io::Result<()> {
        fs::create_dir_all(out)?;
        for (name, body) in &self.tables {
            fs::write(out.join(name), body)?;
        }
        if !self.warnings.is_empty() {
            let mut w = self.warnings.join("\n");
            w.push('\n');
            fs::write(out.join("warnings.txt"), w)?;
        }
        Ok(())
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Per-batch series under every EDV formulation, plus novelty.
pub struct Series {
    pub edv: Vec<(EdvFormulation, Vec<Option<f64>>)>,
    pub novelty: Vec<Option<f64>>,
    pub accepted: Vec<usize>,
}

pub fn series(run: &RunData) -> Series {
    let b = run.batch_count();
    let views = run.accepted();
    let triples: Vec<(u32, f64, &[f64])> = views.iter().map(|v| (v.batch, v.probability, v.vector)).collect();
    let pairs: Vec<(u32, &[f64])> = views.iter().map(|v| (v.batch, v.vector)).collect();
    let mut accepted = vec![0usize; b as usize];
    for v in &views {
        if (1..=b).contains(&v.batch) {
            accepted[v.batch as usize - 1] += 1;
        }
    }
    Series {
        edv: EdvFormulation::ALL
            .iter()
            .map(|&f| (f, edv_series(&triples, b, f)))
            .collect(),
        novelty: novelty_series(&pairs, b),
        accepted,
    }
}

fn series_table(s: &Series) -> String {
    let edv = &s.edv[0].1;
    let acc: Vec<Option<f64>> = s.accepted.iter().map(|&a| Some(a as f64)).collect();
    let (re, ra, rn) = (
        rolling(edv, ROLLING_WINDOW),
        rolling(&acc, ROLLING_WINDOW),
        rolling(&s.novelty, ROLLING_WINDOW),
    );
    let mut out = String::from("batch\tedv\tedv_rolling\taccepted\taccepted_rolling\tnovelty\tnovelty_rolling\n");
    for i in 0..edv.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            fmt_opt(edv[i]),
            fmt_opt(re[i]),
            s.accepted[i],
            fmt_opt(ra[i]),
            fmt_opt(s.novelty[i]),
            fmt_opt(rn[i])
        );
    }
    out
}

fn edv_table(s: &Series) -> String {
    let mut out = String::from("batch");
    let rolled: Vec<Vec<Option<f64>>> = s.edv.iter().map(|(_, v)| rolling(v, ROLLING_WINDOW)).collect();
    for (f, _) in &s.edv {
        let _ = write!(out, "\t{0}\t{0}_rolling", f.name());
    }
    out.push('\n');
    for i in 0..s.edv[0].1.len() {
        let _ = write!(out, "{}", i + 1);
        for (k, (_, v)) in s.edv.iter().enumerate() {
            let _ = write!(out, "\t{}\t{}", fmt_opt(v[i]), fmt_opt(rolled[k][i]));
        }
        out.push('\n');
    }
    out
}

/// Embeddings with batch labels, for external projection tools.
pub fn embeddings_table(run: &RunData) -> String {
    let mut out = String::from("accept_order\tbatch\tcategory\tprobability\tvector\n");
    for r in &run.records {
        let (Some(order), Some(p)) = (r.accept_order, r.probability) else {
            continue;
        };
        let Some(v) = run.vectors.get(order as usize) else {
            continue;
        };
        let joined: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            out,
            "{order}\t{}\t{}\t{p}\t{}",
            r.batch,
            clean(&r.category),
            joined.join(",")
        );
    }
    out
}

fn group_rows(out: &mut String, kind: &str, rows: &[GroupStats]) {
    for g in rows {
        let _ = writeln!(
            out,
            "{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            g.label,
            g.batches,
            g.generated,
            g.accepted,
            fmt_opt(g.acceptance_percent),
            fmt_opt(g.mean_edv),
            fmt_opt(g.mean_novelty)
        );
    }
}

/// Plot-ready per-batch series and the embedding export.
pub fn plot_data(run: &RunData) -> Report {
    let s = series(run);
    Report {
        tables: vec![
            ("series.tsv".into(), series_table(&s)),
            ("edv_formulations.tsv".into(), edv_table(&s)),
            ("embeddings.tsv".into(), embeddings_table(run)),
        ],
        warnings: run.gaps.clone(),
    }
}

pub fn analyze(run: &RunData, opts: &AnalyzeOptions) -> Report {
    let mut warnings = run.gaps.clone();
    let mut tables = Vec::new();
    let b = run.batch_count();
    let views = run.accepted();
    let s = series(run);
    let mut summary = String::from("metric\tvalue\tnote\n");
    let mut line = |k: &str, v: String, note: &str| {
        let _ = writeln!(summary, "{k}\t{v}\t{note}");
    };

    let arm = run.arm().map_or("custom", Arm::name);
    line("arm", arm.into(), "");
    line("batches_logged", run.batches.len().to_string(), "");
    let sum = |f: fn(&BatchRecord) -> u32| run.batches.iter().map(|r| u64::from(f(r))).sum::<u64>();
    line("generated", sum(|r| r.generated).to_string(), "");
    line("accepted", sum(|r| r.accepted).to_string(), "");
    line("vts_rejected", sum(|r| r.vts_rejected).to_string(), "");
    line("dedup_rejected", sum(|r| r.dedup_rejected).to_string(), "");
    line("parse_rejected", sum(|r| r.parse_rejected).to_string(), "");
    line("failed_batches", run.batches.iter().filter(|r| r.failure.is_some()).count().to_string(), "");
    let tok = |f: fn(&BatchRecord) -> u64| run.batches.iter().map(f).sum::<u64>();
    line("prompt_tokens", tok(|r| r.prompt_tokens).to_string(), "");
    line("completion_tokens", tok(|r| r.completion_tokens).to_string(), "");
    line("embedding_tokens", tok(|r| r.embedding_tokens).to_string(), "");

    for (f, edv) in &s.edv {
        let key = format!("edv_retention_{}", f.name());
        match edv_retention(edv) {
            Ok(r) => {
                let note = if r.fallback {
                    format!("endpoints moved to batches {} and {}", r.first_batch, r.last_batch)
                } else {
                    String::new()
                };
                line(&key, r.percent.to_string(), &note);
            }
            Err(e) => {
                line(&key, "NA".into(), &e.to_string());
                warnings.push(format!("{key}: {e}"));
            }
        }
    }

    let pairs: Vec<(u32, &[f64])> = views.iter().map(|v| (v.batch, v.vector)).collect();
    let mut collapse = String::from("threshold\twindow\tlate_ideas\tcollapsed\tpercent\n");
    for &t in &opts.collapse_thresholds {
        match collapse_rate(&pairs, b, t, opts.collapse_window) {
            Ok(c) => {
                let _ = writeln!(
                    collapse,
                    "{}\t{}\t{}\t{}\t{}",
                    c.threshold, c.window, c.late_ideas, c.collapsed, c.percent
                );
                line(&format!("collapse_rate@{t}"), c.percent.to_string(), "");
            }
            Err(e) => {
                warnings.push(format!("collapse at {t}: {e}"));
                line(&format!("collapse_rate@{t}"), "NA".into(), &e.to_string());
            }
        }
    }
    tables.push(("collapse.tsv".into(), collapse));

    let mut milestones: Vec<u32> = CLUSTER_MILESTONES.iter().copied().filter(|&m| m <= b).collect();
    if milestones.last() != Some(&b) {
        milestones.push(b);
    }
    let mut clusters = String::from("batch\tmin_cluster_size\tclusters\n");
    for &mcs in &opts.min_cluster_sizes {
        for (m, n) in cluster_milestones(&pairs, b, &milestones, mcs) {
            let _ = writeln!(clusters, "{m}\t{mcs}\t{n}");
        }
    }
    tables.push(("clusters.tsv".into(), clusters));

    let by_cat: Vec<(&str, &[f64])> = views.iter().map(|v| (v.category, v.vector)).collect();
    let coh = category_coherence(&by_cat);
    let mut c = String::from("metric\tvalue\n");
    let _ = writeln!(c, "unique_labels\t{}", coh.unique_labels);
    let _ = writeln!(c, "normalized_entropy\t{}", fmt_opt(coh.normalized_entropy));
    let _ = writeln!(c, "mean_intra_similarity\t{}", fmt_opt(coh.mean_intra));
    let _ = writeln!(c, "mean_inter_centroid_similarity\t{}", fmt_opt(coh.mean_inter_centroid));
    tables.push(("coherence.tsv".into(), c));
    line("unique_labels", coh.unique_labels.to_string(), "");

    let pv: Vec<(f64, &[f64])> = views.iter().map(|v| (v.probability, v.vector)).collect();
    match typicality_correlation(&pv, opts.permutations, opts.permutation_seed) {
        Ok(t) => {
            line("typicality_rho", fmt_opt(t.rho), if t.rho.is_none() { "constant input" } else { "" });
            line("typicality_p", fmt_opt(t.p_value), &format!("{} permutations", opts.permutations));
        }
        Err(e) => warnings.push(format!("typicality: {e}")),
    }

    let stats: Vec<BatchStat> = run
        .batches
        .iter()
        .map(|r| {
            let i = r.batch as usize - 1;
            BatchStat {
                batch: r.batch,
                strategy: r.strategy,
                phase: r.phase,
                generated: r.generated,
                accepted: r.accepted,
                edv: s.edv[0].1.get(i).copied().flatten(),
                novelty: s.novelty.get(i).copied().flatten(),
            }
        })
        .collect();
    let table = per_strategy_stats(&stats);
    let mut st = String::from("group\tlabel\tbatches\tgenerated\taccepted\tacceptance_percent\tmean_edv\tmean_novelty\n");
    group_rows(&mut st, "strategy", &table.strategies);
    group_rows(&mut st, "phase", &table.phases);
    tables.push(("strategy.tsv".into(), st));

    if opts.confusion {
        if run.config.enable_vts || run.config.enable_dedup {
            warnings.push("confusion matrix skipped: the run filtered candidates during generation".into());
        } else {
            let tau = opts.tau.unwrap_or(run.config.tau);
            let delta = opts.delta.unwrap_or(run.config.delta);
            let m = confusion_matrix(&pv, tau, delta);
            let mut t = String::from("vts\tdedup_accept\tdedup_reject\n");
            let _ = writeln!(t, "accept\t{}\t{}", m.vts_accept_dedup_accept, m.vts_accept_dedup_reject);
            let _ = writeln!(t, "reject\t{}\t{}", m.vts_reject_dedup_accept, m.vts_reject_dedup_reject);
            let _ = writeln!(t, "# tau={tau} delta={delta} total={}", m.total());
            tables.push(("confusion.tsv".into(), t));
        }
    }

    tables.insert(0, ("summary.tsv".into(), summary));
    tables.push(("series.tsv".into(), series_table(&s)));
    tables.push(("edv_formulations.tsv".into(), edv_table(&s)));
    Report { tables, warnings }
}

/// Parses a comma-separated list such as `0.80,0.85,0.90`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| format!("bad list item `{x}`")))
        .collect()
}

pub use metrics::MetricError;
