//! A control problem inf E[g(X_T)] written as a target problem with free
//! martingale integrands: the tree values agree and δ is +∞.
//!
//! `cargo run --example embedding`

use stochastic_target::embedding::Embedding;
use stochastic_target::model::ControlGrid;
use stochastic_target::operators::{delta_gap, DeltaSearch, TestFunction};
use stochastic_target::tree::{build_tree, tree_expectation_min, tree_target_value, BranchScheme, TargetOptions, TreeOptions};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let base = ProblemSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/problems/embedding.toml"))?;
    let emb = Embedding::new(base.clone())?;
    let grid = ControlGrid::lattice(&base, 3, &[], false, f64::INFINITY)?;
    let span = emb.spanning(&grid);
    let g = |x: &[f64]| base.payoff.eval(x);
    let opts = TreeOptions { scheme: BranchScheme::Complete, ..TreeOptions::default() };

    for depth in 1..=5 {
        let tt = build_tree(emb.target(), 0.0, &[0.1], depth, (&span).into(), &opts)?;
        let tb = build_tree(&base, 0.0, &[0.1], depth, (&grid).into(), &opts)?;
        let target = tree_target_value(&tt, emb.target(), g, (&span).into(), &TargetOptions::default())?.root();
        let dp = tree_expectation_min(&tb, g).root();
        println!("depth {depth}: target {target:.12}, expectation {dp:.12}, gap {:.1e}", (target - dp).abs());
    }

    let phi = TestFunction::linear(&[0.7]).with_monomial(0.3, 0, vec![2]);
    let p = phi.grad(0.2, &[0.1]);
    let gap = delta_gap(0.2, &[0.1], 0.4, &p, &phi, &DeltaSearch::default(), (&span).into(), emb.target())?;
    println!("δ on the embedded problem: {}", gap.value);
    Ok(())
}
