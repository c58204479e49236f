//! Operator algebra at one point: F^u, N^u, Δ^{u,e}, H_{ε,η}, the semi-limit
//! surrogates, δ and the control-problem Hamiltonian.
//!
//! `cargo run --example operators_tour`

use stochastic_target::model::ControlGrid;
use stochastic_target::operators::{
    bold_h, delta_gap, delta_ue, f_u, h_eps_eta, n_u, semi_limits, DeltaSearch, SemiLimitSchedule, TestFunction, Theta,
};
use stochastic_target::ProblemSpec;

fn main() -> stochastic_target::Result<()> {
    let spec = ProblemSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/problems/superhedge.toml"))?;
    let grid = ControlGrid::lattice(&spec, 9, &[], false, f64::INFINITY)?;
    let phi = TestFunction::linear(&[0.4]).with_monomial(0.2, 0, vec![2]).with_monomial(-0.1, 1, vec![0]);
    let (t, x, y) = (0.3, vec![0.2], 0.5);
    let theta = Theta::from_test_function(&phi, t, x.clone(), y);

    println!("control    F^u        N^u        Δ^(u,0)");
    for u in grid.values() {
        let f = f_u(&theta, u, &spec)?;
        let n = n_u(t, &x, y, &theta.p, u, &spec)?;
        let d = delta_ue(t, &x, y, u, 0, &phi, &spec)?;
        println!("{:>7.2} {f:>10.4} {:>10.4} {d:>10.4}", u.u1[0], n[0]);
    }
    for (eps, eta) in [(0.5, 0.0), (0.2, 0.0), (0.2, 0.1)] {
        let h = h_eps_eta(&theta, &phi, eps, eta, (&grid).into(), &spec)?;
        println!("H_(ε={eps},η={eta}) = {:.4} ({} admissible)", h.value, h.admissible);
    }
    let schedule = SemiLimitSchedule {
        eps: vec![0.5, 0.25, 0.1],
        eta: vec![0.2, -0.1, 0.05],
        theta_radii: vec![0.1, 0.05],
        phi_scales: vec![0.1, 0.05],
        samples: 8,
        seed: 1,
    };
    let sl = semi_limits(&theta, &phi, &schedule, (&grid).into(), &spec)?;
    println!("H_lower = {:.4} ≤ H_upper = {:.4} over {} evaluations", sl.lower, sl.upper, sl.evaluations);
    let gap = delta_gap(t, &x, y, &theta.p, &phi, &DeltaSearch::default(), (&grid).into(), &spec)?;
    println!("δ = {} (dist_out {:.3}, dist_in {:.3})", gap.value, gap.dist_out, gap.dist_in);
    let bh = bold_h(t, &x, &theta.p, &theta.a, &phi, &grid, &spec)?;
    println!("control-problem Hamiltonian = {:.4}", bh.value);
    Ok(())
}
