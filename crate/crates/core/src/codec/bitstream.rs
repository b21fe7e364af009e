//! The `.croi` container.
//!
//! ```text
//! "CROI" | version u8 | config id u8 | lambda_index u8 | H u16 | W u16
//! | prompt_len u16 | prompt utf-8 | sigma u16 | eta u16
//! | z_len u32 | z bytes | y_len u32 | y bytes
//! ```
//!
//! All integers are big-endian. `sigma` and `eta` are stored as `value * 10000`
//! and are informational: decoding never reads them.

use crate::codec::config::ConfigId;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CROI";
pub const FORMAT_VERSION: u8 = 1;
const FIXED_POINT: f64 = 10_000.0;

/// Informational record of how the encoder built the mask.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub prompt: String,
    pub sigma: f64,
    pub eta: f64,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            prompt: "Foreground".into(),
            sigma: 0.01,
            eta: 0.85,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bitstream {
    pub config_id: ConfigId,
    pub lambda_index: u8,
    /// Original, pre-padding dimensions.
    pub height: u16,
    pub width: u16,
    pub provenance: Provenance,
    pub z_payload: Vec<u8>,
    pub y_payload: Vec<u8>,
}

fn to_fixed(v: f64, what: &str) -> Result<u16> {
    let scaled = (v * FIXED_POINT).round();
    if !(0.0..=u16::MAX as f64).contains(&scaled) {
        return Err(Error::InvalidInput(format!("{what} = {v} not representable")));
    }
    Ok(scaled as u16)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::CorruptStream(format!("truncated at {what}")))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

impl Bitstream {
    /// Size of everything except the two payloads.
    pub fn header_len(&self) -> usize {
        4 + 1 + 1 + 1 + 2 + 2 + 2 + self.provenance.prompt.len() + 2 + 2 + 4 + 4
    }

    pub fn total_len(&self) -> usize {
        self.header_len() + self.z_payload.len() + self.y_payload.len()
    }

    /// `8 * total bytes / (H * W)` with the stored, pre-padding dimensions.
    pub fn bpp(&self) -> f64 {
        bpp(self.total_len(), self.height as usize, self.width as usize)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let prompt = self.provenance.prompt.as_bytes();
        let prompt_len = u16::try_from(prompt.len())
            .map_err(|_| Error::InvalidInput("prompt longer than 65535 bytes".into()))?;
        let z_len = u32::try_from(self.z_payload.len())
            .map_err(|_| Error::InvalidInput("hyper-latent payload too large".into()))?;
        let y_len = u32::try_from(self.y_payload.len())
            .map_err(|_| Error::InvalidInput("latent payload too large".into()))?;
        let sigma = to_fixed(self.provenance.sigma, "sigma")?;
        let eta = to_fixed(self.provenance.eta, "eta")?;

        let mut out = Vec::with_capacity(self.total_len());
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.config_id as u8);
        out.push(self.lambda_index);
        out.extend_from_slice(&self.height.to_be_bytes());
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&prompt_len.to_be_bytes());
        out.extend_from_slice(prompt);
        out.extend_from_slice(&sigma.to_be_bytes());
        out.extend_from_slice(&eta.to_be_bytes());
        out.extend_from_slice(&z_len.to_be_bytes());
        out.extend_from_slice(&self.z_payload);
        out.extend_from_slice(&y_len.to_be_bytes());
        out.extend_from_slice(&self.y_payload);
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader { data, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::CorruptStream("not a CROI container".into()));
        }
        let version = r.u8("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::ConfigMismatch(format!(
                "container version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let config_id = ConfigId::from_u8(r.u8("config id")?)?;
        let lambda_index = r.u8("lambda index")?;
        let height = r.u16("height")?;
        let width = r.u16("width")?;
        if height == 0 || width == 0 {
            return Err(Error::CorruptStream(format!("zero image size {height}x{width}")));
        }
        let prompt_len = r.u16("prompt length")? as usize;
        let prompt = std::str::from_utf8(r.take(prompt_len, "prompt")?)
            .map_err(|_| Error::CorruptStream("prompt is not UTF-8".into()))?
            .to_owned();
        let sigma = r.u16("sigma")? as f64 / FIXED_POINT;
        let eta = r.u16("eta")? as f64 / FIXED_POINT;
        let z_len = r.u32("z length")? as usize;
        let z_payload = r.take(z_len, "z payload")?.to_vec();
        let y_len = r.u32("y length")? as usize;
        let y_payload = r.take(y_len, "y payload")?.to_vec();
        if r.pos != data.len() {
            return Err(Error::CorruptStream(format!(
                "{} trailing bytes after payloads",
                data.len() - r.pos
            )));
        }
        Ok(Self {
            config_id,
            lambda_index,
            height,
            width,
            provenance: Provenance { prompt, sigma, eta },
            z_payload,
            y_payload,
        })
    }
}

/// Bits per pixel of a `bytes`-long stream for an `height x width` image.
pub fn bpp(bytes: usize, height: usize, width: usize) -> f64 {
    8.0 * bytes as f64 / (height * width) as f64
}
