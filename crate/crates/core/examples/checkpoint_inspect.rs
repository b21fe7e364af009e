//! Prints what a `.crck` checkpoint holds: configuration, completed stage,
//! parameter counts per module and per-module digests.
//!
//! cargo run --example checkpoint_inspect -- models/desk_lambda1.crck

use std::collections::BTreeMap;

use croi::codec::checkpoint::parameter_digest;
use croi::codec::CodecConfig;
use croi::model::{ModelOptions, RoiCodec};

fn main() -> croi::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => RoiCodec::load(path)?,
        None => RoiCodec::new(CodecConfig::desk(1)?, ModelOptions::full(), 0),
    };
    let cfg = model.config();
    println!(
        "config {} lambda index {} (lambda {}), N = {}, M = {}, stage {}",
        cfg.id,
        cfg.lambda_index,
        model.lambda(),
        cfg.channels_n,
        cfg.channels_m,
        model.trained_stage()
    );
    println!("options {:?}", model.options());

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in model.store().entries() {
        let module = e.name.split('.').take(2).collect::<Vec<_>>().join(".");
        *counts.entry(module).or_default() += e.value.len();
    }
    for (module, n) in &counts {
        let digest = parameter_digest(model.store(), |name| name.starts_with(&format!("{module}.")));
        let short: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        println!("  {module:<24} {n:>9} weights  {short}");
    }
    println!("total {} weights", model.store().total_elements());
    Ok(())
}
