//! Certify the explicit super- and sub-solutions on a scenario tree, refute a
//! corrupted one and check the sandwich around the tree value.
//!
//! `cargo run --example certify_appendix`

use stochastic_target::model::ControlGrid;
use stochastic_target::perron::{
    builtin_subsolution, builtin_supersolution, certify_subsolution, certify_supersolution, sandwich_check,
    LadderOptions,
};
use stochastic_target::tree::{build_tree, tree_target_value, TargetOptions, TreeOptions};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/problems");
    for name in ["superhedge", "mean_reverting"] {
        let spec = ProblemSpec::load(format!("{dir}/{name}.toml"))?;
        let grid = ControlGrid::lattice(&spec, 5, &[], false, f64::INFINITY)?;
        let tree = build_tree(&spec, 0.0, &[0.0], 5, (&grid).into(), &TreeOptions::default())?;
        let ladder = LadderOptions::default();

        let sup = builtin_supersolution(&spec, &grid, Some(tree.dt))?;
        let sub = builtin_subsolution(&spec, Some(tree.dt))?;
        println!("{name}: super k = {:.3}, γ = {:.3}, c = {:.3}", sup.k, sup.gamma, sup.c);
        println!("{name}: sub   k = {:.3}, γ = {:.3}, c = {:.3}", sub.k, sub.gamma, sub.c);
        let c_sup = certify_supersolution(&sup.candidate(), &tree, &spec, &ladder)?;
        let c_sub = certify_subsolution(&sub.candidate(), &tree, &spec, &ladder)?;
        let c_bad = certify_supersolution(&sup.corrupted(&spec)?.candidate(), &tree, &spec, &ladder)?;
        println!("  super certified: {}", c_sup.is_certified());
        println!("  sub certified:   {}", c_sub.is_certified());
        println!("  corrupted:       {:?}", c_bad.witness());

        let prof = tree_target_value(&tree, &spec, |x| spec.payoff.eval(x), (&grid).into(), &TargetOptions::default())?;
        let report = sandwich_check(&[sub.candidate()], &[sup.candidate()], &tree, &prof);
        println!("  sandwich: {} nodes, {} violations", report.checked_nodes, report.violations.len());
    }
    Ok(())
}
