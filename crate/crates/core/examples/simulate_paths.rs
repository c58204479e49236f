//! Euler paths of the super-replication model, a concatenated policy and the
//! exponential change of variables.
//!
//! `cargo run --example simulate_paths`

use stochastic_target::model::ControlValue;
use stochastic_target::sde::{concatenate, exp_transform_check, simulate, simulate_terminal, ControlPolicy, StoppingRule};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let spec = ProblemSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/problems/superhedge.toml"))?;
    let hold = |pi: f64| ControlPolicy::Constant(ControlValue::diffusive(vec![pi], spec.marks.len(), 0));

    let bundle = simulate(&spec, &hold(0.5), 0.0, &[0.0], 1.0, 4, 10, 42)?;
    let mut text = Vec::new();
    bundle.write_csv(&mut text, spec.dims.processes)?;
    println!("{}", String::from_utf8_lossy(&text).lines().take(6).collect::<Vec<_>>().join("\n"));

    // Hold π = 0.5 until t = 0.5, then switch to cash only.
    let policy = concatenate(hold(0.5), hold(0.0), StoppingRule::Fixed(0.5));
    let sample = simulate_terminal(&spec, &policy, 0.0, &[0.0], 1.0, 20_000, 100, 7)?;
    let (mean, se) = sample.mean_and_stderr(|x| spec.payoff.eval(x));
    let hit = sample.y.iter().zip(&sample.x).filter(|(y, x)| **y >= spec.payoff.eval(x)).count();
    println!("E g(X_T) = {mean:.4} ± {se:.4}, P(Y_T ≥ g) = {:.4}", hit as f64 / sample.y.len() as f64);

    for steps in [50, 100, 200] {
        let dev = exp_transform_check(&spec, &hold(0.5), 1.0, 0.0, &[0.0], 1.0, 200, steps, 3)?;
        println!("exp transform, {steps:>3} steps: max |Ỹe^(-cs) − Y| = {dev:.3e}");
    }
    Ok(())
}
