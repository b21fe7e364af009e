//! Range-codes Gaussian latents under the shared scale table and compares
//! the estimated rate with the real payload size.
//!
//! cargo run --release --example entropy_coding -- 2.5

use croi::codec::{estimate_rate, quantize, range_decode, range_encode, EntropyModel};
use croi::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box-Muller draw.
fn normal<R: Rng>(rng: &mut R, sd: f32) -> f32 {
    let (u, v): (f32, f32) = (rng.gen_range(f32::EPSILON..1.0), rng.gen());
    sd * (-2.0 * u.ln()).sqrt() * (std::f32::consts::TAU * v).cos()
}

fn main() -> croi::Result<()> {
    let sd: f32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let shape = [64, 32, 32];
    let latent = Tensor::from_fn(shape, |_, _, _| normal(&mut rng, sd));
    let scales = Tensor::from_fn(shape, |c, _, _| sd * (0.5 + c as f32 / 64.0));

    let symbols = quantize(&latent, None)?;
    let model = EntropyModel::Gaussian { scales: &scales };
    let payload = range_encode(&symbols, model)?;
    let decoded = range_decode(&payload, model, shape)?;
    let estimate = estimate_rate(&symbols, model)?;
    let actual = 8.0 * payload.len() as f64;
    println!("{} symbols, sd {sd}", symbols.len());
    println!("estimated {estimate:.0} bits, actual {actual:.0} bits ({:+.3}%)", 100.0 * (actual - estimate) / estimate);
    println!("decoded symbols identical: {}", decoded == symbols);
    Ok(())
}
