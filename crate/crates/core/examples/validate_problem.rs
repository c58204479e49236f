//! Spot-check the growth and Lipschitz assumptions of the bundled problems.
//!
//! `cargo run --example validate_problem`

use stochastic_target::model::{validate_problem, ScalarFn, Var, Affine};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/problems");
    for name in ["zero", "pure_jump", "embedding", "superhedge", "mean_reverting"] {
        let spec = ProblemSpec::load(format!("{dir}/{name}.toml"))?;
        let report = validate_problem(&spec, 2000, 1)?;
        println!("{name:>15}: {} samples, {} violations", report.samples, report.violations.len());
    }

    // A drift 2y declared with L = 1 violates the linear-growth bound.
    let mut spec = ProblemSpec::load(format!("{dir}/zero.toml"))?;
    spec.coefficients.mu_y = ScalarFn::Affine(Affine::new(0.0, [(Var::Y, 2.0)]));
    let report = validate_problem(&spec, 2000, 1)?;
    println!("mu_y = 2y, L = 1: {} violations, first: {:?}", report.violations.len(), report.violations.first());
    Ok(())
}
