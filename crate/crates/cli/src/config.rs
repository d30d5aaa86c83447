use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

/// Environment variable naming the service config file; it takes precedence
/// over `--config`.
pub const CONFIG_ENV: &str = "GRASPKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub library: PathBuf,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Origins allowed to call the API from a browser.
    #[serde(default)]
    pub cors_allow: Vec<String>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_data_dir() -> PathBuf {
    PathBuf::from(".")
}

impl ServiceConfig {
    pub fn new(library: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig { listen: default_listen(), library: library.into(), data_dir: data_dir.into(), cors_allow: Vec::new() }
    }

    /// Reads a YAML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> anyhow::Result<ServiceConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ServiceConfig =
            serde_yaml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.library, &mut cfg.data_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !self.library.is_file() {
            bail!("library file {} does not exist", self.library.display());
        }
        if !self.data_dir.is_dir() {
            bail!("data directory {} does not exist", self.data_dir.display());
        }
        Ok(())
    }
}
