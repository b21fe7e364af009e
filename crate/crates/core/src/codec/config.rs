use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate-distortion multipliers, indexed by `lambda_index`.
pub const LAMBDA_TABLE: [f64; 5] = [0.0035, 0.013, 0.025, 0.0483, 0.0932];

/// Total spatial stride of the analysis transform.
pub const LATENT_STRIDE: usize = 16;

/// Total spatial stride of the hyper-analysis transform (relative to the image).
pub const HYPER_STRIDE: usize = 64;

/// Channel layout of a codec. The id is what the bitstream header stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigId {
    /// 64 latent / 48 hyper-latent channels.
    Desk = 0,
    /// 128 / 128, the low-rate models.
    Narrow = 1,
    /// 192 / 192, the high-rate models.
    Wide = 2,
}

impl std::str::FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Self::Desk),
            "narrow" => Ok(Self::Narrow),
            "wide" => Ok(Self::Wide),
            other => Err(Error::InvalidInput(format!("unknown config {other:?}"))),
        }
    }
}

impl std::fmt::Display for ConfigId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Desk => "desk",
            Self::Narrow => "narrow",
            Self::Wide => "wide",
        })
    }
}

impl ConfigId {
    pub const ALL: [Self; 3] = [Self::Desk, Self::Narrow, Self::Wide];

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::Desk),
            1 => Ok(Self::Narrow),
            2 => Ok(Self::Wide),
            other => Err(Error::ConfigMismatch(format!("unknown config id {other}"))),
        }
    }

    pub fn channels(self) -> (usize, usize) {
        match self {
            Self::Desk => (64, 48),
            Self::Narrow => (128, 128),
            Self::Wide => (192, 192),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub id: ConfigId,
    /// Latent channel count `C`.
    pub channels_n: usize,
    /// Hyper-latent channel count.
    pub channels_m: usize,
    pub lambda_index: u8,
    /// Accepted images are padded to a multiple of this.
    pub input_multiple: usize,
}

impl CodecConfig {
    pub fn new(id: ConfigId, lambda_index: u8) -> Result<Self> {
        if lambda_index as usize >= LAMBDA_TABLE.len() {
            return Err(Error::InvalidInput(format!(
                "lambda index {lambda_index} outside [0, {}]",
                LAMBDA_TABLE.len() - 1
            )));
        }
        let (channels_n, channels_m) = id.channels();
        Ok(Self {
            id,
            channels_n,
            channels_m,
            lambda_index,
            input_multiple: HYPER_STRIDE,
        })
    }

    pub fn desk(lambda_index: u8) -> Result<Self> {
        Self::new(ConfigId::Desk, lambda_index)
    }

    /// 128 channels for the two lowest rates, 192 above.
    pub fn full_scale(lambda_index: u8) -> Result<Self> {
        let id = if lambda_index < 2 {
            ConfigId::Narrow
        } else {
            ConfigId::Wide
        };
        Self::new(id, lambda_index)
    }

    pub fn lambda(&self) -> f64 {
        LAMBDA_TABLE[self.lambda_index as usize]
    }

    pub fn latent_shape(&self, height: usize, width: usize) -> [usize; 3] {
        [self.channels_n, height / LATENT_STRIDE, width / LATENT_STRIDE]
    }

    pub fn hyper_shape(&self, height: usize, width: usize) -> [usize; 3] {
        [self.channels_m, height / HYPER_STRIDE, width / HYPER_STRIDE]
    }
}

pub fn lambda_for_index(index: usize) -> Result<f64> {
    LAMBDA_TABLE
        .get(index)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("lambda index {index} outside [0, 4]")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_channel_schedule() {
        for (idx, n) in [(0, 128), (1, 128), (2, 192), (3, 192), (4, 192)] {
            let cfg = CodecConfig::full_scale(idx).unwrap();
            assert_eq!(cfg.channels_n, n);
            assert_eq!(cfg.lambda(), LAMBDA_TABLE[idx as usize]);
        }
        assert!(CodecConfig::desk(5).is_err());
    }

    #[test]
    fn lambda_table_is_increasing() {
        assert!(LAMBDA_TABLE.windows(2).all(|w| w[0] < w[1]));
    }
}
