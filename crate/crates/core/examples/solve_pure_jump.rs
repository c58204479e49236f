//! Explicit HJB solve for an uncontrolled pure-jump model, compared with Monte
//! Carlo, plus a CFL refusal.
//!
//! `cargo run --example solve_pure_jump`

use stochastic_target::model::{ControlGrid, ControlValue};
use stochastic_target::pde::{cfl_check, solve_hjb, Axis, Boundary, Form, GOperator, SpaceTimeGrid};
use stochastic_target::sde::{simulate_terminal, ControlPolicy};
use stochastic_target::{Error, ProblemSpec};

fn main() -> stochastic_target::Result<()> {
    let spec = ProblemSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/problems/pure_jump.toml"))?;
    let u0 = ControlValue::zero(spec.dims, spec.marks.len());
    let controls = ControlGrid::singleton(&spec, u0.clone())?;
    let axis = Axis { lo: -4.0, hi: 16.0, nodes: 401 };
    let grid = SpaceTimeGrid::new(1.0, 200, vec![axis], Boundary::Clamp)?;
    let cfl = cfl_check(&spec, &grid, &controls)?;
    println!("dt = {}, stable up to {}, monotone = {}", cfl.dt, cfl.max_dt, cfl.monotone);

    let terminal = grid.sample(|x| spec.payoff.eval(x));
    let sol = solve_hjb(&spec, &terminal, &grid, Form::Control(&controls), &GOperator::inactive())?;
    let pde = sol.field.at(0, &[0.0]);
    let mc = simulate_terminal(&spec, &ControlPolicy::Constant(u0), 0.0, &[0.0], 0.0, 100_000, 200, 2024)?;
    let (mean, se) = mc.mean_and_stderr(|x| spec.payoff.eval(x));
    println!("V(0, 0) = {pde:.5}, Monte Carlo {mean:.5} ± {se:.5}");

    let coarse = SpaceTimeGrid::new(1.0, 1, vec![axis], Boundary::Clamp)?;
    let mut stiff = spec.clone();
    stiff.marks = stochastic_target::MarkSpace::single(5.0)?;
    match solve_hjb(&stiff, &coarse.sample(|x| stiff.payoff.eval(x)), &coarse, Form::Control(&controls), &GOperator::inactive()) {
        Err(Error::Cfl { dt, max_dt }) => println!("refused: dt = {dt} > {max_dt}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
