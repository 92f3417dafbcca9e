//! The campaign loop: prompt, generate, filter, deduplicate, log, checkpoint.

pub mod checkpoint;
pub mod jsonl;

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dce_core::prompt::PromptTemplates;
use dce_core::runlog::RUNLOG_SCHEMA_VERSION;
use dce_core::sim::SimWorld;
use dce_core::{
    build_prompt, BackendKind, BatchFailure, BatchRecord, CampaignConfig, CandidateRecord,
    Decision, Idea, MemoryEntry, VtsVerdict,
};

use self::checkpoint::{Checkpoint, CheckpointError, RngSnapshot, TokenTotals, CHECKPOINT_VERSION};
use self::jsonl::{truncate_lines, JsonlWriter};
use crate::backend::{api_key_from_env, with_retry, BackendError, JsonClient, RetryPolicy, RetryResult};
use crate::embedder::{Checked, Embedder, HttpEmbedder, SimEmbedder};
use crate::generator::{Generation, GenerationRequest, Generator, HttpGenerator, SimGenerator};
use crate::rundir::{sha256_hex, RunDir, RUNLOG_SCHEMA};
use crate::store::{MemoryStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("{0} already holds a campaign; pass --resume to continue it")]
    Exists(String),
    #[error("config differs from the one the campaign in {0} was started with")]
    ConfigMismatch(String),
    #[error("cannot resume {dir}: {reason}")]
    Resume { dir: String, reason: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("batch {batch}: {error}")]
    Backend { batch: u32, error: BackendError },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("run directory I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Exists(_) | RunError::ConfigMismatch(_) => 2,
            RunError::Backend { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub retry_base_delay: Duration,
    /// fsync logs, checkpoint and memory after each batch.
    pub sync: bool,
    pub http_timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            retry_base_delay: RetryPolicy::default().base_delay,
            sync: true,
            http_timeout: Duration::from_secs(120),
        }
    }
}

pub struct Backends {
    pub generator: Box<dyn Generator>,
    pub embedder: Box<dyn Embedder>,
}

impl Backends {
    /// Backends named by the config. Simulated ends share one world.
    pub fn from_config(cfg: &CampaignConfig, opts: &RunOptions) -> Self {
        let world = (cfg.generator == BackendKind::Sim || cfg.embedder == BackendKind::Sim)
            .then(|| Arc::new(SimWorld::new(&cfg.sim)));
        let generator: Box<dyn Generator> = match cfg.generator {
            BackendKind::Sim => Box::new(SimGenerator::new(
                world.clone().expect("world built for sim"),
                cfg.seed,
                cfg.sim.vts_compliance,
            )),
            BackendKind::Http => {
                let key = api_key_from_env(&cfg.generator_api_key_env);
                if key.is_none() {
                    log::warn!("{} is not set; sending no credentials", cfg.generator_api_key_env);
                }
                let client = JsonClient::new(&cfg.generator_url, key, opts.http_timeout);
                Box::new(HttpGenerator::new(client, &cfg.generator_model))
            }
        };
        let embedder: Box<dyn Embedder> = match cfg.embedder {
            BackendKind::Sim => {
                let w = world.expect("world built for sim");
                let dim = w.dimension;
                Box::new(Checked::new(SimEmbedder::new(w), dim))
            }
            BackendKind::Http => {
                let key = api_key_from_env(&cfg.embedder_api_key_env);
                if key.is_none() {
                    log::warn!("{} is not set; sending no credentials", cfg.embedder_api_key_env);
                }
                let client = JsonClient::new(&cfg.embedder_url, key, opts.http_timeout);
                Box::new(Checked::new(
                    HttpEmbedder::new(client, &cfg.embedder_model),
                    cfg.embedding_dimension,
                ))
            }
        };
        Self { generator, embedder }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunlogHeader {
    pub schema: String,
    pub version: u32,
}

/// Wall-clock timings, kept apart from the deterministic logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    pub batch: u32,
    pub generation_ms: f64,
    pub embedding_ms: f64,
    pub total_ms: f64,
    pub unix_ms: u128,
}

pub fn config_hash(cfg: &CampaignConfig) -> String {
    sha256_hex(cfg.to_text().as_bytes())
}

fn campaign_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// A campaign bound to its run directory.
pub struct Campaign {
    cfg: CampaignConfig,
    templates: PromptTemplates,
    dir: RunDir,
    opts: RunOptions,
    backends: Backends,
    store: MemoryStore,
    rng: ChaCha8Rng,
    next_batch: u32,
    tokens: TokenTotals,
    runlog: JsonlWriter,
    batches: JsonlWriter,
    timings: JsonlWriter,
}

impl Campaign {
    /// Starts a new campaign in `dir`, which must be absent or empty.
    pub fn create(
        cfg: CampaignConfig,
        templates: PromptTemplates,
        dir: impl AsRef<Path>,
        backends: Backends,
        opts: RunOptions,
    ) -> Result<Self, RunError> {
        cfg.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let dir = RunDir::new(dir.as_ref());
        if dir.root().exists() && fs::read_dir(dir.root())?.next().is_some() {
            return Err(RunError::Exists(dir.root().display().to_string()));
        }
        fs::create_dir_all(dir.root())?;
        fs::write(dir.config(), cfg.to_text())?;
        let mut runlog = JsonlWriter::append(&dir.runlog(), 0)?;
        runlog.write(&RunlogHeader {
            schema: RUNLOG_SCHEMA.into(),
            version: RUNLOG_SCHEMA_VERSION,
        })?;
        runlog.flush(opts.sync)?;
        let batches = JsonlWriter::append(&dir.batches(), 0)?;
        let timings = JsonlWriter::append(&dir.timings(), 0)?;
        let store = open_store(&dir, opts.sync)?;
        let rng = campaign_rng(cfg.seed);
        let c = Self {
            cfg,
            templates,
            dir,
            opts,
            backends,
            store,
            rng,
            next_batch: 1,
            tokens: TokenTotals::default(),
            runlog,
            batches,
            timings,
        };
        c.write_checkpoint()?;
        Ok(c)
    }

    /// Reopens a campaign at its last checkpoint, discarding anything
    /// written after it. `cfg` must hash to the recorded config.
    pub fn resume(
        cfg: CampaignConfig,
        templates: PromptTemplates,
        dir: impl AsRef<Path>,
        mut backends: Backends,
        opts: RunOptions,
    ) -> Result<Self, RunError> {
        let dir = RunDir::new(dir.as_ref());
        let shown = dir.root().display().to_string();
        let fail = |reason: String| RunError::Resume {
            dir: shown.clone(),
            reason,
        };
        if !dir.checkpoint().exists() {
            // Killed inside `create`: nothing was committed, so start over.
            let on_disk = fs::read_to_string(dir.config()).unwrap_or_default();
            if dir.config().exists() && cfg.to_text().starts_with(&on_disk) {
                discard_uncommitted(&dir)?;
                return Self::create(cfg, templates, dir.root(), backends, opts);
            }
            return Err(fail("no checkpoint".into()));
        }
        let cp = Checkpoint::read(&dir.checkpoint())?;
        if cp.config_sha256 != config_hash(&cfg) {
            return Err(RunError::ConfigMismatch(shown));
        }
        // One header line precedes the candidate records.
        truncate_lines(&dir.runlog(), cp.candidate_records + 1).map_err(|e| fail(e.to_string()))?;
        truncate_lines(&dir.batches(), cp.batch_records).map_err(|e| fail(e.to_string()))?;
        truncate_lines(&dir.timings(), cp.timing_records).map_err(|e| fail(e.to_string()))?;
        let mut store = open_store(&dir, opts.sync)?;
        let want = cp.memory_len as usize;
        if store.len() < want {
            return Err(fail(format!(
                "memory store has {} entries, checkpoint expects {want}",
                store.len()
            )));
        }
        store.truncate(want)?;
        if let Some(state) = &cp.generator_state {
            backends
                .generator
                .restore_state(state)
                .map_err(|e| fail(format!("generator state: {e}")))?;
        }
        Ok(Self {
            runlog: JsonlWriter::append(&dir.runlog(), cp.candidate_records + 1)?,
            batches: JsonlWriter::append(&dir.batches(), cp.batch_records)?,
            timings: JsonlWriter::append(&dir.timings(), cp.timing_records)?,
            cfg,
            templates,
            dir,
            opts,
            backends,
            store,
            rng: cp.rng.restore(),
            next_batch: cp.next_batch,
            tokens: cp.tokens,
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.cfg
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub fn next_batch(&self) -> u32 {
        self.next_batch
    }

    pub fn is_finished(&self) -> bool {
        self.next_batch > self.cfg.batches
    }

    pub fn tokens(&self) -> TokenTotals {
        self.tokens
    }

    /// The state a checkpoint written now would hold.
    pub fn snapshot(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_sha256: config_hash(&self.cfg),
            next_batch: self.next_batch,
            rotation_position: self.next_batch % 4,
            candidate_records: self.runlog.lines() - 1,
            batch_records: self.batches.lines(),
            timing_records: self.timings.lines(),
            memory_len: self.store.len() as u64,
            rng: RngSnapshot::of(&self.rng),
            generator_state: self.backends.generator.state(),
            tokens: self.tokens,
            checksum: String::new(),
        }
        .seal()
    }

    fn write_checkpoint(&self) -> Result<(), RunError> {
        self.snapshot().write(&self.dir.checkpoint(), self.opts.sync)?;
        Ok(())
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.cfg.max_attempts,
            base_delay: self.opts.retry_base_delay,
        }
    }

    /// Runs until finished or until `max_batches` more batches complete.
    pub fn run(
        &mut self,
        max_batches: Option<u32>,
        progress: &mut dyn FnMut(&BatchRecord),
    ) -> Result<(), RunError> {
        let mut done = 0;
        while !self.is_finished() && max_batches.is_none_or(|m| done < m) {
            let rec = self.run_batch()?;
            progress(&rec);
            done += 1;
        }
        Ok(())
    }

    /// Executes one batch and checkpoints after it.
    pub fn run_batch(&mut self) -> Result<BatchRecord, RunError> {
        let b = self.next_batch;
        let started = Instant::now();
        let prompt = build_prompt(&self.cfg, self.store.index(), b, &mut self.rng, &self.templates);
        let strategy = prompt.signals.strategy.as_ref().map(|s| s.kind);
        let phase = prompt.signals.phase;
        let mut rec = BatchRecord {
            batch: b,
            strategy,
            phase,
            prompt_sha256: sha256_hex(prompt.text.as_bytes()),
            attempts: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            embedding_tokens: 0,
            generated: 0,
            shortfall: 0,
            accepted: 0,
            vts_rejected: 0,
            dedup_rejected: 0,
            parse_rejected: 0,
            failure: None,
        };
        let req = GenerationRequest {
            prompt: &prompt,
            batch_size: self.cfg.batch_size as usize,
            batch_index: b,
            schema_mode: self.cfg.schema_mode,
        };
        let policy = self.retry_policy();
        let generator = &mut self.backends.generator;
        let generation = match with_retry(&policy, || generator.generate(&req)) {
            RetryResult::Done { value, attempts } => {
                rec.attempts = attempts;
                Some(value)
            }
            RetryResult::Exhausted(ex) => {
                log::warn!("batch {b} failed after {} attempts: {}", ex.attempts, ex.last);
                rec.attempts = ex.attempts;
                let raw = match &ex.last {
                    BackendError::Unparseable { raw, .. } => Some(raw.clone()),
                    _ => None,
                };
                rec.failure = Some(BatchFailure {
                    reason: ex.last.to_string(),
                    raw,
                });
                None
            }
            RetryResult::Fatal { error, .. } => return Err(RunError::Backend { batch: b, error }),
        };
        let gen_time = started.elapsed();
        let mut embed_time = Duration::ZERO;
        if let Some(g) = generation {
            embed_time = self.process(&mut rec, g, strategy, phase)?;
        }
        rec.shortfall = self.cfg.batch_size.saturating_sub(rec.generated);
        self.tokens.prompt += rec.prompt_tokens;
        self.tokens.completion += rec.completion_tokens;
        self.tokens.embedding += rec.embedding_tokens;
        debug_assert!(rec.conserved());

        self.batches.write(&rec)?;
        self.timings.write(&TimingRecord {
            batch: b,
            generation_ms: ms(gen_time),
            embedding_ms: ms(embed_time),
            total_ms: ms(started.elapsed()),
            unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_millis()),
        })?;
        self.runlog.flush(self.opts.sync)?;
        self.batches.flush(self.opts.sync)?;
        self.timings.flush(self.opts.sync)?;
        self.next_batch += 1;
        self.write_checkpoint()?;
        Ok(rec)
    }

    /// Judges every candidate of a generation in slot order and logs it.
    fn process(
        &mut self,
        rec: &mut BatchRecord,
        g: Generation,
        strategy: Option<dce_core::StrategyKind>,
        phase: Option<dce_core::Phase>,
    ) -> Result<Duration, RunError> {
        rec.prompt_tokens = g.prompt_tokens;
        rec.completion_tokens = g.completion_tokens;
        rec.generated = g.outcome.generated() as u32;
        let b = rec.batch;
        let blank = |slot: u32, name: String, description: String, category: String| CandidateRecord {
            batch: b,
            slot,
            name,
            description,
            category,
            probability: None,
            strategy,
            phase,
            vts_accepted: None,
            max_similarity: None,
            nearest: None,
            decision: Decision::ParseRejected,
            reject_reason: None,
            accept_order: None,
            embedding_tokens: 0,
        };

        enum Item {
            Idea(Idea),
            Rejected(crate::generator::ParseRejection),
        }
        let mut items: Vec<(u32, Item)> = g
            .outcome
            .ideas
            .into_iter()
            .map(|i| (i.slot_index, Item::Idea(i)))
            .chain(g.outcome.rejections.into_iter().map(|r| (r.slot, Item::Rejected(r))))
            .collect();
        items.sort_by_key(|(slot, _)| *slot);

        let policy = self.retry_policy();
        let mut embed_time = Duration::ZERO;
        for (slot, item) in items {
            let idea = match item {
                Item::Rejected(r) => {
                    let mut c = blank(slot, r.name, r.description, r.category);
                    c.reject_reason = Some(r.reason);
                    rec.parse_rejected += 1;
                    self.runlog.write(&c)?;
                    continue;
                }
                Item::Idea(i) => i,
            };
            let mut c = blank(slot, idea.name.clone(), idea.description.clone(), idea.category.clone());
            c.probability = Some(idea.probability);
            if self.cfg.enable_vts {
                let v = VtsVerdict::judge(idea.probability, self.cfg.tau);
                c.vts_accepted = Some(v.accepted);
                if !v.accepted {
                    c.decision = Decision::VtsRejected;
                    c.reject_reason = Some(format!("probability {} >= tau {}", idea.probability, self.cfg.tau));
                    rec.vts_rejected += 1;
                    self.runlog.write(&c)?;
                    continue;
                }
            }
            let t = Instant::now();
            let text = idea.embedding_text();
            let embedder = &mut self.backends.embedder;
            let embedded = match with_retry(&policy, || embedder.embed(&text)) {
                RetryResult::Done { value, .. } => value,
                RetryResult::Exhausted(ex) => {
                    return Err(RunError::Backend {
                        batch: b,
                        error: ex.last,
                    })
                }
                RetryResult::Fatal { error, .. } => return Err(RunError::Backend { batch: b, error }),
            };
            embed_time += t.elapsed();
            c.embedding_tokens = embedded.tokens;
            rec.embedding_tokens += embedded.tokens;
            let verdict = self
                .store
                .index()
                .check_duplicate(&embedded.embedding, self.cfg.delta)
                .map_err(|e| RunError::Backend {
                    batch: b,
                    error: BackendError::Fatal(format!("embedding: {e}")),
                })?;
            c.max_similarity = Some(verdict.max_similarity);
            c.nearest = verdict.nearest;
            if self.cfg.enable_dedup && !verdict.accepted {
                c.decision = Decision::DedupRejected;
                c.reject_reason = Some(format!(
                    "similarity {} >= delta {}",
                    verdict.max_similarity, self.cfg.delta
                ));
                rec.dedup_rejected += 1;
                self.runlog.write(&c)?;
                continue;
            }
            let order = self.store.index().next_accept_order();
            self.store.insert(MemoryEntry {
                idea,
                embedding: embedded.embedding,
                accept_order: order,
                batch_index: b,
            })?;
            c.decision = Decision::Accepted;
            c.accept_order = Some(order);
            rec.accepted += 1;
            self.runlog.write(&c)?;
        }
        Ok(embed_time)
    }

    pub fn close(self) -> Result<(), RunError> {
        self.store.close()?;
        Ok(())
    }
}

fn open_store(dir: &RunDir, sync: bool) -> Result<MemoryStore, StoreError> {
    let s = MemoryStore::open(dir.memory())?;
    Ok(if sync { s } else { s.without_sync() })
}

/// Starts or resumes a campaign with config-named backends and runs it to
/// the end.
fn discard_uncommitted(dir: &RunDir) -> std::io::Result<()> {
    for f in [dir.config(), dir.runlog(), dir.batches(), dir.timings()] {
        match fs::remove_file(&f) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e),
            _ => {}
        }
    }
    match fs::remove_dir_all(dir.memory()) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}

pub fn run_campaign(
    cfg: CampaignConfig,
    templates: PromptTemplates,
    dir: impl AsRef<Path>,
    resume: bool,
    opts: RunOptions,
    progress: &mut dyn FnMut(&BatchRecord),
) -> Result<Campaign, RunError> {
    let backends = Backends::from_config(&cfg, &opts);
    let mut c = if resume {
        Campaign::resume(cfg, templates, dir, backends, opts)?
    } else {
        Campaign::create(cfg, templates, dir, backends, opts)?
    };
    c.run(None, progress)?;
    Ok(c)
}
