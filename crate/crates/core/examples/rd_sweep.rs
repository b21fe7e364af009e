//! Runs an η or σ sweep over a few synthetic images and prints the CSV.
//!
//! cargo run --release --example rd_sweep -- model_dir sigma /tmp/sweep
//!
//! `model_dir` must hold a fully trained `desk_lambda1.crck`, e.g. the output
//! of the `three_stage_training` example.

use std::path::PathBuf;

use croi::data::synthetic_annotated;
use croi::eval::{run_sweep, SweepKind, SweepSpec};
use croi::registry::ModelRegistry;

fn main() -> croi::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "models".into()));
    let kind: SweepKind = args.next().unwrap_or_else(|| "eta".into()).parse()?;
    let export = args.next().map(PathBuf::from);

    let registry = ModelRegistry::new(Some(dir));
    let images = synthetic_annotated(4, 1_000_000);
    let table = run_sweep(&SweepSpec::new(kind), &images, &registry, export.as_deref())?;
    print!("{}", String::from_utf8_lossy(&table.to_csv()?));
    if let Some(dir) = export {
        table.write_to(&dir)?;
        println!("wrote results.csv, results.json, per_image.csv and reconstructions under {}", dir.display());
    }
    Ok(())
}
