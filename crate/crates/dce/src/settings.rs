//! Loading campaign configuration and prompt templates from disk.

use std::fs;
use std::path::{Path, PathBuf};

use dce_core::prompt::TEMPLATE_FILES;
use dce_core::{CampaignConfig, ConfigError, PromptTemplates};

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: ConfigError },
    #[error("--set {arg}: expected key=value")]
    Override { arg: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Defaults, then the file (if any), then each `key=value` override. The
/// result is validated.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<CampaignConfig, SettingsError> {
    let mut cfg = CampaignConfig::default();
    if let Some(p) = path {
        let text = fs::read_to_string(p).map_err(|source| SettingsError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        cfg.apply_text(&text).map_err(|source| SettingsError::File {
            path: p.to_path_buf(),
            source,
        })?;
    }
    for arg in overrides {
        let (k, v) = arg
            .split_once('=')
            .ok_or_else(|| SettingsError::Override { arg: arg.clone() })?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in templates, with any file present in `templates_dir` replacing
/// its counterpart.
pub fn load_templates(cfg: &CampaignConfig) -> Result<PromptTemplates, SettingsError> {
    let mut t = PromptTemplates::default();
    if cfg.templates_dir.is_empty() {
        return Ok(t);
    }
    let dir = Path::new(&cfg.templates_dir);
    for file in TEMPLATE_FILES {
        let path = dir.join(file);
        match fs::read_to_string(&path) {
            Ok(text) => {
                if let Some(slot) = t.slot_mut(file) {
                    *slot = text.trim_end_matches('\n').to_string();
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(SettingsError::Io { path, source }),
        }
    }
    Ok(t)
}
