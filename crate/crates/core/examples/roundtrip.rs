//! Compresses a synthetic scene with a text prompt, writes the `.croi`
//! container, decodes it without the mask and checks the result.
//!
//! cargo run --release --example roundtrip -- model.crck "red disc" out.croi
//!
//! Without a checkpoint a freshly initialized model is used, which round-trips
//! exactly but reconstructs poorly.

use croi::codec::CodecConfig;
use croi::data::synthetic_scene;
use croi::eval::psnr;
use croi::model::{ModelOptions, RoiCodec};
use croi::service::pipeline::{compress, decompress, Backends, MaskRequest};

fn main() -> croi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model = match args.first().filter(|a| !a.is_empty()) {
        Some(path) => RoiCodec::load(path)?,
        None => RoiCodec::new(CodecConfig::desk(1)?, ModelOptions::full(), 0),
    };
    let text = args.get(1).cloned().unwrap_or_else(|| "red disc".into());
    let out = args.get(2).cloned().unwrap_or_else(|| "scene.croi".into());

    let scene = synthetic_scene(256, 42);
    let backends = Backends::default();
    for sigma in [0.01, 0.3, 0.9] {
        let req = MaskRequest { text: text.clone(), sigma, ..MaskRequest::default() };
        let c = compress(&backends, &model, &scene.image, &req)?;
        println!(
            "sigma {sigma:<4}  {} bytes  {:.3} bpp  psnr {:.2} dB  roi-psnr {}  roi {:.1}%",
            c.bytes.len(),
            c.metrics.bpp,
            c.metrics.psnr,
            c.metrics.roi_psnr.map_or("n/a".into(), |v| format!("{v:.2} dB")),
            100.0 * c.mask.roi_pixel_fraction()
        );
        if sigma == 0.01 {
            std::fs::write(&out, &c.bytes)?;
            let (stream, decoded) = decompress(&model, &std::fs::read(&out)?)?;
            let identical = decoded.data().iter().zip(c.reconstruction.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            println!(
                "  wrote {out}; decoded {}x{} prompt {:?}, identical to encoder output: {identical}, psnr {:.2} dB",
                stream.height,
                stream.width,
                stream.provenance.prompt,
                psnr(&scene.image, &decoded)?
            );
        }
    }
    Ok(())
}
