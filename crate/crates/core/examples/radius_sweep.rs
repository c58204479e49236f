//! Sensitivity of the tree and PDE values to the control truncation radius,
//! driven through the experiment runner.
//!
//! `cargo run --example radius_sweep`

use stochastic_target::experiment::{run, ExperimentConfig, Kind};

fn main() -> stochastic_target::Result<()> {
    let mut cfg = ExperimentConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/sweep_embedding.toml"))?;
    cfg.kind = Some(Kind::RadiusSweep);
    let out = std::env::temp_dir().join("target-lab-radius-sweep");
    cfg.out = Some(out.clone());
    run(&cfg)?;
    print!("{}", std::fs::read_to_string(out.join("sweep.csv"))?);
    Ok(())
}
