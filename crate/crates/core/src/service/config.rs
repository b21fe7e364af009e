//! Service settings merged from flags, environment and a TOML file, in that
//! order of precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tma::BackendKind;

pub const MODEL_DIR_ENV: &str = "CROI_MODEL_DIR";
pub const DEFAULT_PORT: u16 = 8080;

/// Contents of a `croi.toml` file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub backend: Option<String>,
    pub embedding_weights: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub model_dir: Option<PathBuf>,
    pub port: u16,
    pub backend: BackendKind,
    pub embedding_weights: Option<PathBuf>,
}

impl ServiceConfig {
    /// `flag` values win over `env` (the model-directory variable), which
    /// wins over `file`.
    pub fn resolve(
        flag_model_dir: Option<PathBuf>,
        env_model_dir: Option<PathBuf>,
        flag_port: Option<u16>,
        flag_backend: Option<BackendKind>,
        flag_weights: Option<PathBuf>,
        file: &FileConfig,
    ) -> Result<Self> {
        let backend = match (flag_backend, &file.backend) {
            (Some(b), _) => b,
            (None, Some(s)) => s.parse()?,
            (None, None) => BackendKind::Synthetic,
        };
        Ok(Self {
            model_dir: flag_model_dir.or(env_model_dir).or_else(|| file.model_dir.clone()),
            port: flag_port.or(file.port).unwrap_or(DEFAULT_PORT),
            backend,
            embedding_weights: flag_weights.or_else(|| file.embedding_weights.clone()),
        })
    }
}
