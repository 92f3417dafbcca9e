//! The `dce` command line.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use dce_core::{Arm, CampaignConfig};

use crate::analysis::{analyze, parse_list, plot_data, AnalyzeOptions, RunData};
use crate::pipeline::{run_campaign, RunOptions};
use crate::rundir::RunDir;
use crate::settings::{load_config, load_templates};
use crate::sweep::{comparison_table, run_sweep, SweepParam, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_INCOMPLETE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dce", version, about = "Diversity-aware batch generation campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ablation arm; overrides the three enable_* keys.
    #[arg(long)]
    pub arm: Option<Arm>,
    /// `key=value` override, repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Skip fsync after each batch.
    #[arg(long)]
    pub no_sync: bool,
    /// Base delay between backend retries, in milliseconds.
    #[arg(long, default_value_t = 500)]
    pub retry_delay_ms: u64,
}

impl ConfigArgs {
    fn load(&self, fallback_file: Option<&Path>) -> Result<CampaignConfig, String> {
        let path = self.config.as_deref().or(fallback_file);
        let mut overrides = self.set.clone();
        if let Some(arm) = self.arm {
            let (v, d, e) = arm.flags();
            overrides.push(format!("enable_vts={v}"));
            overrides.push(format!("enable_dedup={d}"));
            overrides.push(format!("enable_prompt_evolution={e}"));
        }
        load_config(path, &overrides).map_err(|e| e.to_string())
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            retry_base_delay: Duration::from_millis(self.retry_delay_ms),
            sync: !self.no_sync,
            ..RunOptions::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a campaign, or continue one with --resume.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory to create.
        #[arg(long, conflicts_with = "resume")]
        out: Option<PathBuf>,
        /// Run directory to continue from its checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many batches (the campaign stays resumable).
        #[arg(long)]
        max_batches: Option<u32>,
        /// No per-batch progress lines
        #[arg(long, short)]
        quiet: bool,
    },
    /// Compute metric tables for a run directory.
    Analyze {
        run_dir: PathBuf,
        /// Output directory; defaults to `<RUN_DIR>.analysis`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the replayed VTS-versus-dedup table (unfiltered runs only).
        #[arg(long)]
        confusion: bool,
        /// Comma-separated similarity thresholds for the collapse table
        #[arg(long, value_name = "LIST", default_value = "0.85")]
        collapse_thresholds: String,
        /// Batches in each of the early and late collapse windows
        #[arg(long, default_value_t = 50)]
        collapse_window: u32,
        /// Comma-separated minimum cluster sizes for the cluster counts
        #[arg(long, value_name = "LIST", default_value = "5")]
        min_cluster_sizes: String,
        /// Threshold for the confusion replay; defaults to the run's tau
        #[arg(long)]
        tau: Option<f64>,
        /// Threshold for the confusion replay; defaults to the run's delta
        #[arg(long)]
        delta: Option<f64>,
        /// Permutations for the correlation p-value
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
    },
    /// One campaign per value of a parameter, then a comparison table.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// tau, delta or phase_split
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values
        #[arg(long, value_name = "LIST")]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool naive runs round-robin and deduplicate greedily.
    BaselineSeedRotation {
        #[arg(required = true, num_args = 1..)]
        run_dirs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.85)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-ready series and the embedding export.
    ExportPlotData {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_out(run_dir: &Path, suffix: &str) -> PathBuf {
    let mut s = run_dir.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            cfg,
            out,
            resume,
            max_batches,
            quiet,
        } => cmd_run(&cfg, out, resume, max_batches, quiet),
        Command::Analyze {
            run_dir,
            out,
            confusion,
            collapse_thresholds,
            collapse_window,
            min_cluster_sizes,
            tau,
            delta,
            permutations,
        } => {
            let thresholds = match parse_list::<f64>(&collapse_thresholds) {
                Ok(v) if !v.is_empty() => v,
                Ok(_) => return fail(EXIT_CONFIG, "empty --collapse-thresholds"),
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let sizes = match parse_list::<usize>(&min_cluster_sizes) {
                Ok(v) if v.iter().all(|&m| m >= 2) && !v.is_empty() => v,
                Ok(_) => return fail(EXIT_CONFIG, "min cluster sizes must be at least 2"),
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let opts = AnalyzeOptions {
                collapse_thresholds: thresholds,
                collapse_window,
                confusion,
                tau,
                delta,
                min_cluster_sizes: sizes,
                permutations,
                permutation_seed: 0,
            };
            cmd_analyze(&run_dir, out, &opts)
        }
        Command::Sweep { cfg, param, values, out } => cmd_sweep(&cfg, param, &values, &out),
        Command::BaselineSeedRotation { run_dirs, delta, out } => cmd_baseline(&run_dirs, delta, &out),
        Command::ExportPlotData { run_dir, out } => {
            let run = match RunData::load(&run_dir) {
                Ok(r) => r,
                Err(e) => return fail(e.exit_code(), e),
            };
            let out = out.unwrap_or_else(|| default_out(&run_dir, ".plot"));
            finish_report(&run, &plot_data(&run), &out)
        }
    }
}

fn cmd_run(
    cfg: &ConfigArgs,
    out: Option<PathBuf>,
    resume: Option<PathBuf>,
    max_batches: Option<u32>,
    quiet: bool,
) -> i32 {
    let (dir, resuming) = match (out, resume) {
        (Some(o), None) => (o, false),
        (None, Some(r)) => (r, true),
        _ => return fail(EXIT_CONFIG, "pass exactly one of --out or --resume"),
    };
    let fallback = resuming.then(|| RunDir::new(&dir).config());
    let config = match cfg.load(fallback.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let templates = match load_templates(&config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let total = config.batches;
    let mut progress = |r: &dce_core::BatchRecord| {
        if !quiet {
            let status = r.failure.as_ref().map_or(String::new(), |f| format!(" FAILED: {}", f.reason));
            println!(
                "batch {:>4}/{total}  generated {}  accepted {}  vts_rejected {}  dedup_rejected {}  parse_rejected {}{status}",
                r.batch, r.generated, r.accepted, r.vts_rejected, r.dedup_rejected, r.parse_rejected
            );
        }
    };
    let opts = cfg.options();
    let result = if let Some(limit) = max_batches {
        use crate::pipeline::{Backends, Campaign};
        let backends = Backends::from_config(&config, &opts);
        let c = if resuming {
            Campaign::resume(config, templates, &dir, backends, opts)
        } else {
            Campaign::create(config, templates, &dir, backends, opts)
        };
        c.and_then(|mut c| c.run(Some(limit), &mut progress).map(|_| c))
    } else {
        run_campaign(config, templates, &dir, resuming, opts, &mut progress)
    };
    match result {
        Ok(c) => {
            let finished = c.is_finished();
            let t = c.tokens();
            if let Err(e) = c.close() {
                return fail(e.exit_code(), e);
            }
            if !quiet {
                println!(
                    "{} {}  tokens: prompt {} completion {} embedding {}",
                    if finished { "finished" } else { "paused" },
                    dir.display(),
                    t.prompt,
                    t.completion,
                    t.embedding
                );
            }
            EXIT_OK
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            if code == EXIT_BACKEND {
                eprintln!("the campaign is resumable: dce run --resume {}", dir.display());
            }
            code
        }
    }
}

fn finish_report(run: &RunData, report: &crate::analysis::Report, out: &Path) -> i32 {
    if let Err(e) = report.write(out) {
        return fail(EXIT_OTHER, e);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", out.display());
    if run.is_complete() {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    }
}

fn cmd_analyze(run_dir: &Path, out: Option<PathBuf>, opts: &AnalyzeOptions) -> i32 {
    let run = match RunData::load(run_dir) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code(), e),
    };
    let mut opts = opts.clone();
    opts.permutation_seed = run.config.seed;
    let report = analyze(&run, &opts);
    if let Some(s) = report.table("summary.tsv") {
        print!("{s}");
    }
    let out = out.unwrap_or_else(|| default_out(run_dir, ".analysis"));
    finish_report(&run, &report, &out)
}

fn cmd_sweep(cfg: &ConfigArgs, param: SweepParam, values: &str, out: &Path) -> i32 {
    let values = match parse_list::<f64>(values) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let base = match cfg.load(None) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let templates = match load_templates(&base) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let spec = SweepSpec { param, values, base };
    if let Err(e) = spec.validate() {
        return fail(EXIT_CONFIG, e);
    }
    match run_sweep(&spec, &templates, out, &cfg.options()) {
        Ok(rows) => {
            let table = comparison_table(param, &rows);
            print!("{table}");
            if let Err(e) = std::fs::write(out.join("comparison.tsv"), &table) {
                return fail(EXIT_OTHER, e);
            }
            if rows.iter().any(|r| r.error.is_some()) {
                EXIT_BACKEND
            } else {
                EXIT_OK
            }
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn cmd_baseline(run_dirs: &[PathBuf], delta: f64, out: &Path) -> i32 {
    if run_dirs.len() < 2 {
        return fail(EXIT_CONFIG, "seed rotation needs at least two run directories");
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return fail(EXIT_CONFIG, format!("delta must lie in (0, 1], got {delta}"));
    }
    let mut runs = Vec::new();
    for d in run_dirs {
        match RunData::load(d) {
            Ok(r) => runs.push(r),
            Err(e) => return fail(e.exit_code(), e),
        }
    }
    let (summary, stream) = match crate::baseline::seed_rotation(&runs, delta) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let table = crate::baseline::summary_table(&summary, delta);
    print!("{table}");
    let written = std::fs::create_dir_all(out)
        .and_then(|_| std::fs::write(out.join("summary.tsv"), &table))
        .and_then(|_| std::fs::write(out.join("stream.tsv"), &stream));
    if let Err(e) = written {
        return fail(EXIT_OTHER, e);
    }
    if runs.iter().all(RunData::is_complete) {
        EXIT_OK
    } else {
        EXIT_INCOMPLETE
    }
}
