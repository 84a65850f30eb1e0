//! `specforge.toml`: the same settings as the flags, flags win.

use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub proposer: Option<String>,
    pub iter: Option<usize>,
    pub syntax_fix_attempts: Option<usize>,
    pub solver_cmd: Option<String>,
    pub solver_timeout_ms: Option<u64>,
    pub emit_obligations: Option<bool>,
    pub runs_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub fixture: Option<PathBuf>,
    pub key_env: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

/// Loads `path`, or `./specforge.toml` when no path is given and it exists.
pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let p = match path {
        Some(p) => p.to_path_buf(),
        None => {
            let d = PathBuf::from("specforge.toml");
            if !d.exists() {
                return Ok(FileConfig::default());
            }
            d
        }
    };
    let text = std::fs::read_to_string(&p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
}
