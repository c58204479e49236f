//! Scenario trees: the target value, the DP expectation and an exact
//! martingale representation with jumps.
//!
//! `cargo run --example scenario_tree`

use stochastic_target::model::ControlGrid;
use stochastic_target::tree::{
    build_tree, martingale_representation, reconstruct, tree_expectation_min, tree_target_value, BranchScheme,
    TargetOptions, TreeOptions, TreePolicy,
};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let spec = ProblemSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/problems/superhedge.toml"))?;
    let grid = ControlGrid::lattice(&spec, 5, &[], false, f64::INFINITY)?;
    let g = |x: &[f64]| spec.payoff.eval(x);

    let tree = build_tree(&spec, 0.0, &[0.0], 5, (&grid).into(), &TreeOptions::default())?;
    let prof = tree_target_value(&tree, &spec, g, (&grid).into(), &TargetOptions::default())?;
    let dp = tree_expectation_min(&tree, g);
    println!("{} nodes, super-replication price {:.5}, expectation {:.5}", tree.n_nodes(), prof.root(), dp.root());
    println!("root hedge π = {:?}", prof.witness[0].as_ref().map(|u| u.u1[0]));

    let opts = TreeOptions { scheme: BranchScheme::Complete, ..TreeOptions::default() };
    let tree = build_tree(&spec, 0.0, &[0.0], 6, (&grid).into(), &opts)?;
    let leaves = tree.leaves();
    let rep = martingale_representation(&tree, &spec, |_, n| g(&n.x), &TreePolicy::Constant(0))?;
    let worst = reconstruct(&tree, &spec, &rep)
        .into_iter()
        .map(|(leaf, y)| (y - g(&tree.nodes[leaf].x)).abs())
        .fold(0.0, f64::max);
    println!("representation over {} leaves: y0 = {:.6}, max error {worst:.2e}", leaves.len(), rep.y0);
    Ok(())
}
