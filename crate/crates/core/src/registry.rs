//! Trained models addressed by configuration, λ index and architecture
//! variant, loaded lazily from a model directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::codec::checkpoint::Checkpoint;
use crate::codec::config::{CodecConfig, ConfigId};
use crate::error::{Error, Result};
use crate::model::{model_file_name, ModelOptions, RoiCodec};

/// Stage a model must have completed to be served or swept.
pub const TRAINED_STAGE: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ModelKey {
    pub config_id: ConfigId,
    pub lambda_index: u8,
    pub options: ModelOptions,
}

impl ModelKey {
    pub fn new(config_id: ConfigId, lambda_index: u8, options: ModelOptions) -> Self {
        Self {
            config_id,
            lambda_index,
            options,
        }
    }

    pub fn of(model: &RoiCodec) -> Self {
        Self::new(model.config().id, model.config().lambda_index, model.options())
    }

    pub fn file_name(&self) -> Result<String> {
        Ok(model_file_name(&CodecConfig::new(self.config_id, self.lambda_index)?, self.options))
    }
}

/// Summary of one available model.
#[derive(Clone, Debug, Serialize)]
pub struct ModelInfo {
    pub file: String,
    pub config_id: ConfigId,
    pub channels_n: usize,
    pub lambda_index: u8,
    pub lambda: f64,
    pub options: ModelOptions,
    pub trained_stage: u8,
}

impl ModelInfo {
    fn of(model: &RoiCodec) -> Self {
        let key = ModelKey::of(model);
        Self {
            file: key.file_name().unwrap_or_default(),
            config_id: key.config_id,
            channels_n: model.config().channels_n,
            lambda_index: key.lambda_index,
            lambda: model.lambda(),
            options: key.options,
            trained_stage: model.trained_stage(),
        }
    }
}

#[derive(Default)]
pub struct ModelRegistry {
    dir: Option<PathBuf>,
    cache: RwLock<BTreeMap<String, Arc<RoiCodec>>>,
}

impl ModelRegistry {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            cache: RwLock::default(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Adds an in-memory model, replacing any model with the same key.
    pub fn insert(&self, model: RoiCodec) -> Result<ModelKey> {
        let key = ModelKey::of(&model);
        self.cache.write().expect("registry poisoned").insert(key.file_name()?, Arc::new(model));
        Ok(key)
    }

    /// A fully trained model for `key`.
    pub fn get(&self, key: &ModelKey) -> Result<Arc<RoiCodec>> {
        let name = key.file_name()?;
        if let Some(m) = self.cache.read().expect("registry poisoned").get(&name) {
            return require_trained(m.clone(), &name);
        }
        let Some(dir) = &self.dir else {
            return Err(Error::MissingModel(format!("{name} (no model directory configured)")));
        };
        let path = dir.join(&name);
        if !path.is_file() {
            return Err(Error::MissingModel(path.display().to_string()));
        }
        let model = RoiCodec::load(&path)?;
        if ModelKey::of(&model) != *key {
            return Err(Error::ConfigMismatch(format!("{} does not hold {name}", path.display())));
        }
        let model = Arc::new(model);
        self.cache.write().expect("registry poisoned").insert(name.clone(), model.clone());
        require_trained(model, &name)
    }

    /// Every cached model plus every readable checkpoint in the directory.
    pub fn list(&self) -> Vec<ModelInfo> {
        let mut out: BTreeMap<String, ModelInfo> = self
            .cache
            .read()
            .expect("registry poisoned")
            .iter()
            .map(|(k, m)| (k.clone(), ModelInfo::of(m)))
            .collect();
        if let Some(Ok(entries)) = self.dir.as_ref().map(std::fs::read_dir) {
            for entry in entries.flatten() {
                let path = entry.path();
                let name = entry.file_name().to_string_lossy().into_owned();
                if out.contains_key(&name) || path.extension().is_none_or(|e| e != "crck") {
                    continue;
                }
                let model = Checkpoint::load(&path).and_then(|ck| RoiCodec::from_checkpoint(&ck));
                match model {
                    Ok(m) => {
                        let mut info = ModelInfo::of(&m);
                        info.file = name.clone();
                        out.insert(name, info);
                    }
                    Err(e) => log::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        out.into_values().collect()
    }
}

fn require_trained(model: Arc<RoiCodec>, name: &str) -> Result<Arc<RoiCodec>> {
    if model.trained_stage() < TRAINED_STAGE {
        return Err(Error::MissingModel(format!(
            "{name} is untrained (completed stage {} of {TRAINED_STAGE})",
            model.trained_stage()
        )));
    }
    Ok(model)
}
