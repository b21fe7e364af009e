//! Self-describing weight files.
//!
//! ```text
//! "CRCK" | version u8 | config id u8 | lambda_index u8 | 0u8
//! | meta_len u32 | meta json | count u32
//! | count x (name_len u16 | name | c u32 | h u32 | w u32 | f32 le data)
//! | sha256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::codec::config::{CodecConfig, ConfigId};
use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: [u8; 4] = *b"CRCK";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: CodecConfig,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_store(config: CodecConfig, meta: serde_json::Value, store: &ParamStore<f32>) -> Self {
        let tensors = store
            .entries()
            .iter()
            .map(|e| (e.name.clone(), e.value.clone()))
            .collect();
        Self { config, meta, tensors }
    }

    /// Copies every tensor into `store`, which must hold exactly the same
    /// names and shapes.
    pub fn restore_into(&self, store: &mut ParamStore<f32>) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                store.len()
            )));
        }
        for (name, t) in &self.tensors {
            let id = store
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
            let dst = store.get_mut(id);
            if dst.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?}, model expects {:?}",
                    t.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, self.config.id as u8, self.config.lambda_index, 0]);
        let meta = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(meta.len() as u32).to_be_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.tensors.len() as u32).to_be_bytes());
        for (name, t) in &self.tensors {
            let nb = name.as_bytes();
            let len = u16::try_from(nb.len())
                .map_err(|_| Error::Checkpoint(format!("tensor name too long: {name}")))?;
            out.extend_from_slice(&len.to_be_bytes());
            out.extend_from_slice(nb);
            for d in t.shape() {
                out.extend_from_slice(&(d as u32).to_be_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if data.len() < 4 + 4 + 32 || data[..4] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let (body, digest) = data.split_at(data.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        if body[4] != VERSION {
            return Err(bad(&format!("unsupported checkpoint version {}", body[4])));
        }
        let config = CodecConfig::new(ConfigId::from_u8(body[5])?, body[6])?;
        let mut pos = 8;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos + n;
            if end > body.len() {
                return Err(bad("truncated checkpoint"));
            }
            let s = &body[pos..end];
            pos = end;
            Ok(s)
        };
        let be32 = |b: &[u8]| u32::from_be_bytes(b.try_into().unwrap()) as usize;
        let meta_len = be32(take(4)?);
        let meta = serde_json::from_slice(take(meta_len)?)?;
        let count = be32(take(4)?);
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u16::from_be_bytes(take(2)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(take(name_len)?)
                .map_err(|_| bad("tensor name is not UTF-8"))?
                .to_owned();
            let shape = [be32(take(4)?), be32(take(4)?), be32(take(4)?)];
            let n: usize = shape.iter().product();
            let raw = take(n.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor::from_vec(shape, values)));
        }
        if pos != body.len() {
            return Err(bad("trailing bytes in checkpoint"));
        }
        Ok(Self { config, meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// SHA-256 over the names and values of the selected parameters, in store
/// order.
pub fn parameter_digest(store: &ParamStore<f32>, include: impl Fn(&str) -> bool) -> [u8; 32] {
    let mut h = Sha256::new();
    for e in store.entries().iter().filter(|e| include(&e.name)) {
        h.update(e.name.as_bytes());
        for v in e.value.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}
