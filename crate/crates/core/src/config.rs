//! Campaign hyperparameters and their flat `key = value` text form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{StrategyKind, DEFAULT_CONSTRAINTS, DEFAULT_INDUSTRIES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("{0}")]
    Constraint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Sim,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemaMode {
    /// Schema passed through the provider's structured-output parameter.
    NativeStructured,
    /// Schema appended to the system prompt, reply parsed from free text.
    SchemaInSystemPrompt,
}

/// The ablation arms: which of the three mechanisms are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Naive,
    Vts,
    VtsDedup,
    Dce,
    Dedup,
    PromptEvo,
    PromptEvoDedup,
}

impl Arm {
    pub const ALL: [Arm; 7] = [
        Arm::Naive,
        Arm::Vts,
        Arm::VtsDedup,
        Arm::Dce,
        Arm::Dedup,
        Arm::PromptEvo,
        Arm::PromptEvoDedup,
    ];

    /// `(vts, dedup, prompt_evolution)`
    pub fn flags(self) -> (bool, bool, bool) {
        match self {
            Arm::Naive => (false, false, false),
            Arm::Vts => (true, false, false),
            Arm::VtsDedup => (true, true, false),
            Arm::Dce => (true, true, true),
            Arm::Dedup => (false, true, false),
            Arm::PromptEvo => (false, false, true),
            Arm::PromptEvoDedup => (false, true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Naive => "naive",
            Arm::Vts => "vts",
            Arm::VtsDedup => "vts-dedup",
            Arm::Dce => "dce",
            Arm::Dedup => "dedup",
            Arm::PromptEvo => "prompt-evo",
            Arm::PromptEvoDedup => "prompt-evo-dedup",
        }
    }

    /// `None` for the one unnamed combination (vts + prompt evolution, no dedup).
    pub fn from_flags(vts: bool, dedup: bool, evo: bool) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.flags() == (vts, dedup, evo))
    }
}

impl FromStr for Arm {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ConfigError::InvalidValue {
                key: "arm".into(),
                value: s.into(),
                reason: "expected one of naive, vts, vts-dedup, dce, dedup, prompt-evo, prompt-evo-dedup".into(),
            })
    }
}

/// Parameters of the simulated generator world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub concepts: usize,
    pub dimension: usize,
    pub zipf_exponent: f64,
    pub categories: usize,
    pub world_seed: u64,
    /// Fraction of slots that honour the tail instruction when it is present.
    pub vts_compliance: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            concepts: 5000,
            dimension: 64,
            zipf_exponent: 1.0,
            categories: 60,
            world_seed: 0x5EED_D0CE,
            vts_compliance: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub domain: String,
    pub persona: String,
    pub batch_size: u32,
    pub batches: u32,
    pub tau: f64,
    pub delta: f64,
    pub phase_split: f64,
    pub seed: u64,
    pub generator: BackendKind,
    pub embedder: BackendKind,
    pub enable_vts: bool,
    pub enable_dedup: bool,
    pub enable_prompt_evolution: bool,
    pub schema_mode: SchemaMode,
    pub recent_k: usize,
    pub dense_k: usize,
    pub density_neighbors: usize,
    pub gap_categories: usize,
    pub strategy_order: [StrategyKind; 4],
    pub industries: Vec<String>,
    pub constraints: Vec<String>,
    pub max_attempts: u32,
    pub generator_url: String,
    pub generator_model: String,
    pub generator_api_key_env: String,
    pub embedder_url: String,
    pub embedder_model: String,
    pub embedder_api_key_env: String,
    pub embedding_dimension: usize,
    pub templates_dir: String,
    pub sim: SimParams,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            domain: "sustainable packaging".into(),
            persona: "an inventive packaging engineer".into(),
            batch_size: 5,
            batches: 200,
            tau: 0.10,
            delta: 0.85,
            phase_split: 0.40,
            seed: 42,
            generator: BackendKind::Sim,
            embedder: BackendKind::Sim,
            enable_vts: true,
            enable_dedup: true,
            enable_prompt_evolution: true,
            schema_mode: SchemaMode::NativeStructured,
            recent_k: 10,
            dense_k: 5,
            density_neighbors: 10,
            gap_categories: 3,
            strategy_order: StrategyKind::DEFAULT_ORDER,
            industries: DEFAULT_INDUSTRIES.iter().map(|s| s.to_string()).collect(),
            constraints: DEFAULT_CONSTRAINTS.iter().map(|s| s.to_string()).collect(),
            max_attempts: 3,
            generator_url: "https://api.openai.com/v1/chat/completions".into(),
            generator_model: "gpt-5-mini".into(),
            generator_api_key_env: "GENERATOR_API_KEY".into(),
            embedder_url: "https://api.openai.com/v1/embeddings".into(),
            embedder_model: "text-embedding-3-small".into(),
            embedder_api_key_env: "EMBEDDING_API_KEY".into(),
            embedding_dimension: 1536,
            templates_dir: String::new(),
            sim: SimParams::default(),
        }
    }
}

/// Every key accepted by [`CampaignConfig::set`], in canonical order.
pub const CONFIG_KEYS: &[&str] = &[
    "domain",
    "persona",
    "batch_size",
    "batches",
    "tau",
    "delta",
    "phase_split",
    "seed",
    "generator",
    "embedder",
    "enable_vts",
    "enable_dedup",
    "enable_prompt_evolution",
    "schema_mode",
    "recent_k",
    "dense_k",
    "density_neighbors",
    "gap_categories",
    "strategy_order",
    "industries",
    "constraints",
    "max_attempts",
    "generator_url",
    "generator_model",
    "generator_api_key_env",
    "embedder_url",
    "embedder_model",
    "embedder_api_key_env",
    "embedding_dimension",
    "templates_dir",
    "sim_concepts",
    "sim_dimension",
    "sim_zipf_exponent",
    "sim_categories",
    "sim_world_seed",
    "sim_vts_compliance",
];

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: core::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| invalid(key, value, e.to_string()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn parse_backend(key: &str, value: &str) -> Result<BackendKind, ConfigError> {
    match value {
        "sim" => Ok(BackendKind::Sim),
        "http" => Ok(BackendKind::Http),
        _ => Err(invalid(key, value, "expected sim or http")),
    }
}

fn backend_name(b: BackendKind) -> &'static str {
    match b {
        BackendKind::Sim => "sim",
        BackendKind::Http => "http",
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl CampaignConfig {
    pub fn with_arm(mut self, arm: Arm) -> Self {
        self.apply_arm(arm);
        self
    }

    pub fn apply_arm(&mut self, arm: Arm) {
        let (v, d, e) = arm.flags();
        self.enable_vts = v;
        self.enable_dedup = d;
        self.enable_prompt_evolution = e;
    }

    pub fn arm(&self) -> Option<Arm> {
        Arm::from_flags(self.enable_vts, self.enable_dedup, self.enable_prompt_evolution)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "domain" => self.domain = value.into(),
            "persona" => self.persona = value.into(),
            "batch_size" => self.batch_size = parse(key, value)?,
            "batches" => self.batches = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "phase_split" => self.phase_split = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "generator" => self.generator = parse_backend(key, value)?,
            "embedder" => self.embedder = parse_backend(key, value)?,
            "enable_vts" => self.enable_vts = parse_bool(key, value)?,
            "enable_dedup" => self.enable_dedup = parse_bool(key, value)?,
            "enable_prompt_evolution" => self.enable_prompt_evolution = parse_bool(key, value)?,
            "schema_mode" => {
                self.schema_mode = match value {
                    "native-structured" => SchemaMode::NativeStructured,
                    "schema-in-system-prompt" => SchemaMode::SchemaInSystemPrompt,
                    _ => {
                        return Err(invalid(
                            key,
                            value,
                            "expected native-structured or schema-in-system-prompt",
                        ))
                    }
                }
            }
            "recent_k" => self.recent_k = parse(key, value)?,
            "dense_k" => self.dense_k = parse(key, value)?,
            "density_neighbors" => self.density_neighbors = parse(key, value)?,
            "gap_categories" => self.gap_categories = parse(key, value)?,
            "strategy_order" => {
                let kinds = split_list(value)
                    .iter()
                    .map(|s| s.parse::<StrategyKind>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| invalid(key, value, e))?;
                let order: [StrategyKind; 4] = kinds
                    .try_into()
                    .map_err(|_| invalid(key, value, "expected four strategies"))?;
                for k in StrategyKind::DEFAULT_ORDER {
                    if !order.contains(&k) {
                        return Err(invalid(key, value, "each strategy must appear once"));
                    }
                }
                self.strategy_order = order;
            }
            "industries" => self.industries = split_list(value),
            "constraints" => self.constraints = split_list(value),
            "max_attempts" => self.max_attempts = parse(key, value)?,
            "generator_url" => self.generator_url = value.into(),
            "generator_model" => self.generator_model = value.into(),
            "generator_api_key_env" => self.generator_api_key_env = value.into(),
            "embedder_url" => self.embedder_url = value.into(),
            "embedder_model" => self.embedder_model = value.into(),
            "embedder_api_key_env" => self.embedder_api_key_env = value.into(),
            "embedding_dimension" => self.embedding_dimension = parse(key, value)?,
            "templates_dir" => self.templates_dir = value.into(),
            "sim_concepts" => self.sim.concepts = parse(key, value)?,
            "sim_dimension" => self.sim.dimension = parse(key, value)?,
            "sim_zipf_exponent" => self.sim.zipf_exponent = parse(key, value)?,
            "sim_categories" => self.sim.categories = parse(key, value)?,
            "sim_world_seed" => self.sim.world_seed = parse(key, value)?,
            "sim_vts_compliance" => self.sim.vts_compliance = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Value of `key` in its text form; inverse of [`CampaignConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let b = |v: bool| String::from(if v { "true" } else { "false" });
        Some(match key {
            "domain" => self.domain.clone(),
            "persona" => self.persona.clone(),
            "batch_size" => self.batch_size.to_string(),
            "batches" => self.batches.to_string(),
            "tau" => self.tau.to_string(),
            "delta" => self.delta.to_string(),
            "phase_split" => self.phase_split.to_string(),
            "seed" => self.seed.to_string(),
            "generator" => backend_name(self.generator).into(),
            "embedder" => backend_name(self.embedder).into(),
            "enable_vts" => b(self.enable_vts),
            "enable_dedup" => b(self.enable_dedup),
            "enable_prompt_evolution" => b(self.enable_prompt_evolution),
            "schema_mode" => match self.schema_mode {
                SchemaMode::NativeStructured => "native-structured".into(),
                SchemaMode::SchemaInSystemPrompt => "schema-in-system-prompt".into(),
            },
            "recent_k" => self.recent_k.to_string(),
            "dense_k" => self.dense_k.to_string(),
            "density_neighbors" => self.density_neighbors.to_string(),
            "gap_categories" => self.gap_categories.to_string(),
            "strategy_order" => self
                .strategy_order
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(";"),
            "industries" => self.industries.join(";"),
            "constraints" => self.constraints.join(";"),
            "max_attempts" => self.max_attempts.to_string(),
            "generator_url" => self.generator_url.clone(),
            "generator_model" => self.generator_model.clone(),
            "generator_api_key_env" => self.generator_api_key_env.clone(),
            "embedder_url" => self.embedder_url.clone(),
            "embedder_model" => self.embedder_model.clone(),
            "embedder_api_key_env" => self.embedder_api_key_env.clone(),
            "embedding_dimension" => self.embedding_dimension.to_string(),
            "templates_dir" => self.templates_dir.clone(),
            "sim_concepts" => self.sim.concepts.to_string(),
            "sim_dimension" => self.sim.dimension.to_string(),
            "sim_zipf_exponent" => self.sim.zipf_exponent.to_string(),
            "sim_categories" => self.sim.categories.to_string(),
            "sim_world_seed" => self.sim.world_seed.to_string(),
            "sim_vts_compliance" => self.sim.vts_compliance.to_string(),
            _ => return None,
        })
    }

    /// Applies every `key = value` line of `text`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical rendering: every key, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Constraint(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return fail(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.phase_split) {
            return fail(format!(
                "phase_split must lie in [0, 1], got {}",
                self.phase_split
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.batches == 0 {
            return fail("batches must be at least 1".into());
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be at least 1".into());
        }
        if self.industries.len() < 3 {
            return fail("industries roster needs at least 3 entries".into());
        }
        if self.constraints.is_empty() {
            return fail("constraints roster must not be empty".into());
        }
        if self.domain.trim().is_empty() {
            return fail("domain must not be empty".into());
        }
        if self.generator == BackendKind::Sim || self.embedder == BackendKind::Sim {
            if self.sim.concepts == 0 || self.sim.dimension == 0 || self.sim.categories == 0 {
                return fail("sim_concepts, sim_dimension and sim_categories must be positive".into());
            }
            if !(0.0..=1.0).contains(&self.sim.vts_compliance) {
                return fail("sim_vts_compliance must lie in [0, 1]".into());
            }
            if !(self.sim.zipf_exponent >= 0.0 && self.sim.zipf_exponent.is_finite()) {
                return fail("sim_zipf_exponent must be finite and non-negative".into());
            }
        }
        Ok(())
    }

    /// Number of exploration batches: `ceil(phase_split * batches)`.
    pub fn exploration_batches(&self) -> u32 {
        // The epsilon absorbs representation error such as 0.4 * 200.
        let raw = self.phase_split * f64::from(self.batches);
        let c = libm::ceil(raw - 1e-9);
        if c < 0.0 {
            0
        } else {
            (c as u32).min(self.batches)
        }
    }
}
