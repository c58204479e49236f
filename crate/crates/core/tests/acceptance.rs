//! Acceptance suite: one test per criterion, each at its stated tolerance.
//! `cargo test --test acceptance -- --nocapture` also prints the measured values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochastic_target::embedding::Embedding;
use stochastic_target::experiment::{run_with_workers, ExperimentConfig, Kind};
use stochastic_target::model::{Affine, ControlGrid, ControlValue, Dims, MarkSpace, ScalarFn, Var};
use stochastic_target::operators::{
    delta_gap, delta_ue, derivative_error, h_eps_eta, j_u, n_u, semi_limits, ControlSet, DeltaSearch,
    SemiLimitSchedule, TestFunction, Theta,
};
use stochastic_target::pde::{cfl_check, solve_hjb, Axis, Boundary, Form, GOperator, SpaceTimeGrid};
use stochastic_target::perron::{
    builtin_subsolution, builtin_supersolution, certify_subsolution, certify_supersolution, sandwich_check,
    LadderOptions, Refutation,
};
use stochastic_target::sde::{exp_transform_check, simulate_terminal, ControlPolicy};
use stochastic_target::tree::{
    build_tree, martingale_representation, reconstruct, tree_expectation_min, tree_target_value, BranchScheme,
    TargetOptions, TreeOptions, TreePolicy,
};
use stochastic_target::ProblemSpec;

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn problem(name: &str) -> ProblemSpec {
    ProblemSpec::load(manifest(&format!("problems/{name}.toml"))).unwrap()
}

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn complete() -> TreeOptions {
    TreeOptions {
        scheme: BranchScheme::Complete,
        ..TreeOptions::default()
    }
}

#[test]
fn criterion_1_embedding_equivalence() {
    let start = Instant::now();
    let base = problem("embedding");
    let emb = Embedding::new(base.clone()).unwrap();
    let grid = ControlGrid::lattice(&base, 3, &[], false, f64::INFINITY).unwrap();
    let span = emb.spanning(&grid);
    let g = |x: &[f64]| base.payoff.eval(x);
    let tt = build_tree(emb.target(), 0.0, &[0.1], 6, (&span).into(), &complete()).unwrap();
    let tb = build_tree(&base, 0.0, &[0.1], 6, (&grid).into(), &complete()).unwrap();
    let target = tree_target_value(&tt, emb.target(), g, (&span).into(), &TargetOptions::default())
        .unwrap()
        .root();
    let dp = tree_expectation_min(&tb, g).root();
    let gap = (target - dp).abs();
    let elapsed = start.elapsed();
    let pass = gap <= 1e-9 && elapsed < Duration::from_secs(10);
    report(1, pass, format!("target {target:.12}, dp {dp:.12}, gap {gap:.2e}, {elapsed:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_2_delta_is_infinite_on_the_embedded_model() {
    let base = problem("embedding");
    let emb = Embedding::new(base.clone()).unwrap();
    let grid = ControlGrid::lattice(&base, 3, &[], false, f64::INFINITY).unwrap();
    let span = emb.spanning(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut finite = 0;
    for _ in 0..100 {
        let t = rng.random_range(0.0..1.0);
        let x = [rng.random_range(-2.0..2.0)];
        let y = rng.random_range(-2.0..2.0);
        let p = [rng.random_range(-3.0..3.0)];
        let phi = TestFunction::random_polynomial(&mut rng, 1, 3, 4);
        let gap = delta_gap(t, &x, y, &p, &phi, &DeltaSearch::default(), (&span).into(), emb.target()).unwrap();
        if gap.value != f64::INFINITY {
            finite += 1;
        }
    }
    report(2, finite == 0, format!("{finite} of 100 samples not +∞"));
    assert_eq!(finite, 0);
}

#[test]
fn criterion_3_pde_matches_monte_carlo() {
    let start = Instant::now();
    let spec = problem("pure_jump");
    let u0 = ControlValue::zero(spec.dims, spec.marks.len());
    let controls = ControlGrid::singleton(&spec, u0.clone()).unwrap();
    let axis = Axis {
        lo: -4.0,
        hi: 16.0,
        nodes: 401,
    };
    let grid = SpaceTimeGrid::new(1.0, 200, vec![axis], Boundary::Clamp).unwrap();
    assert!(cfl_check(&spec, &grid, &controls).unwrap().passes);
    let terminal = grid.sample(|x| spec.payoff.eval(x));
    let sol = solve_hjb(&spec, &terminal, &grid, Form::Control(&controls), &GOperator::inactive()).unwrap();
    let v = sol.field.at(0, &[0.0]);
    let mc = simulate_terminal(&spec, &ControlPolicy::Constant(u0), 0.0, &[0.0], 0.0, 100_000, 200, 2024).unwrap();
    let (mean, se) = mc.mean_and_stderr(|x| spec.payoff.eval(x));
    let tol = (2.0 * se).max(5e-3);
    let elapsed = start.elapsed();
    let pass = (v - mean).abs() <= tol && elapsed < Duration::from_secs(120);
    report(3, pass, format!("V {v:.5}, MC {mean:.5} ± {se:.5}, tol {tol:.1e}, {elapsed:.2?}"));
    assert!(pass);
}

#[test]
fn criterion_4_builtins_certified_and_corruption_refuted() {
    let spec = problem("superhedge");
    let grid = ControlGrid::lattice(&spec, 5, &[], false, f64::INFINITY).unwrap();
    let tree = build_tree(&spec, 0.0, &[0.0], 5, (&grid).into(), &TreeOptions::default()).unwrap();
    let ladder = LadderOptions::default();
    let sup = builtin_supersolution(&spec, &grid, Some(tree.dt)).unwrap();
    let sub = builtin_subsolution(&spec, Some(tree.dt)).unwrap();
    let c_sup = certify_supersolution(&sup.candidate(), &tree, &spec, &ladder).unwrap();
    let c_sub = certify_subsolution(&sub.candidate(), &tree, &spec, &ladder).unwrap();
    let bad = sup.corrupted(&spec).unwrap().candidate();
    let c_bad = certify_supersolution(&bad, &tree, &spec, &ladder).unwrap();
    let leaf_witness = matches!(c_bad.witness(), Some(Refutation::Terminal { .. }));
    let replayed = c_bad.witness().map(|w| w.replay(&bad, &tree, &spec).unwrap()).unwrap_or(false);
    let pass = c_sup.is_certified() && c_sub.is_certified() && leaf_witness && replayed;
    report(
        4,
        pass,
        format!(
            "super {}, sub {}, corrupted witness {:?}",
            c_sup.is_certified(),
            c_sub.is_certified(),
            c_bad.witness()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_sandwich_has_no_violations() {
    let spec = problem("superhedge");
    let grid = ControlGrid::lattice(&spec, 5, &[], false, f64::INFINITY).unwrap();
    let tree = build_tree(&spec, 0.0, &[0.0], 5, (&grid).into(), &TreeOptions::default()).unwrap();
    let ladder = LadderOptions::default();
    let sup = builtin_supersolution(&spec, &grid, Some(tree.dt)).unwrap().candidate();
    let sub = builtin_subsolution(&spec, Some(tree.dt)).unwrap().candidate();
    assert!(certify_supersolution(&sup, &tree, &spec, &ladder).unwrap().is_certified());
    assert!(certify_subsolution(&sub, &tree, &spec, &ladder).unwrap().is_certified());
    let prof = tree_target_value(&tree, &spec, |x| spec.payoff.eval(x), (&grid).into(), &TargetOptions::default())
        .unwrap();
    let sw = sandwich_check(&[sub], &[sup], &tree, &prof);
    let pass = sw.violations.is_empty() && sw.checked_nodes == tree.n_nodes();
    report(5, pass, format!("{} nodes, {} violations", sw.checked_nodes, sw.violations.len()));
    assert!(pass);
}

/// Membership in the attainable set at lattice resolution: some control puts
/// `N^u` within `r_tol` of `r` with `J^u ≥ s`.
#[allow(clippy::too_many_arguments)]
fn attainable(
    t: f64,
    x: &[f64],
    y: f64,
    p: &[f64],
    r: &[f64],
    s: f64,
    r_tol: f64,
    phi: &TestFunction,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> bool {
    let check = |u: &ControlValue| {
        let nv = n_u(t, x, y, p, u, spec).unwrap();
        let dist = nv.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        dist <= r_tol && j_u(t, x, y, u, phi, spec).unwrap() >= s - 1e-12
    };
    match controls {
        ControlSet::Grid(g) => g.values().iter().any(check),
        ControlSet::Spanning(sp) => (0..sp.len()).any(|k| check(&sp.candidate(spec, k, t, x, p, phi, r, s).unwrap())),
    }
}

#[test]
fn criterion_6_operator_properties() {
    let start = Instant::now();
    let superhedge = problem("superhedge");
    let reverting = problem("mean_reverting");
    let g_super = ControlGrid::lattice(&superhedge, 21, &[], false, f64::INFINITY).unwrap();
    let g_rev = ControlGrid::lattice(&reverting, 21, &[], false, f64::INFINITY).unwrap();
    let base = problem("embedding");
    let emb = Embedding::new(base.clone()).unwrap();
    let b_grid = ControlGrid::lattice(&base, 3, &[], false, f64::INFINITY).unwrap();
    let span = emb.spanning(&b_grid);
    let search = DeltaSearch {
        r_half_width: 0.5,
        s_half_width: 0.5,
        points_per_side: 10,
    };

    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fail = |name: &'static str| *failures.entry(name).or_default() += 1;
    let mut worst_derivative: f64 = 0.0;
    let mut ball_premises = 0;
    for i in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + i);
        let (spec, controls): (&ProblemSpec, ControlSet<'_>) = match i % 3 {
            0 => (&superhedge, (&g_super).into()),
            1 => (&reverting, (&g_rev).into()),
            _ => (emb.target(), (&span).into()),
        };
        let t = rng.random_range(0.0..1.0);
        let x = vec![rng.random_range(-1.0..1.0)];
        let y = rng.random_range(-1.0..1.0);
        let mut phi = TestFunction::random_polynomial(&mut rng, 1, 3, 3);
        if i % 2 == 0 {
            phi = phi.perturbed(&mut rng, 0.5);
        }
        let theta = Theta::from_test_function(&phi, t, x.clone(), y);

        let e1 = rng.random_range(0.01..1.0);
        let e2 = e1 + rng.random_range(0.0..1.0);
        let n1 = rng.random_range(-1.0..1.0);
        let n2 = n1 - rng.random_range(0.0..1.0);
        let h1 = h_eps_eta(&theta, &phi, e1, n1, controls, spec).unwrap().value;
        let h2 = h_eps_eta(&theta, &phi, e2, n2, controls, spec).unwrap().value;
        if h1 > h2 {
            fail("H monotone in (ε, −η)");
        }

        let schedule = SemiLimitSchedule {
            eps: vec![0.5, 0.1],
            eta: vec![0.2, -0.05],
            theta_radii: vec![0.1],
            phi_scales: vec![0.1],
            samples: 3,
            seed: i,
        };
        let sl = semi_limits(&theta, &phi, &schedule, controls, spec).unwrap();
        if sl.lower > sl.upper {
            fail("H_lower ≤ H_upper");
        }

        let c = rng.random_range(-10.0..10.0);
        let shifted = phi.shifted(c);
        let probe = match controls {
            ControlSet::Grid(g) => g.get(rng.random_range(0..g.len())).clone(),
            ControlSet::Spanning(sp) => sp.candidate(spec, 0, t, &x, &theta.p, &phi, &[0.0], 0.0).unwrap(),
        };
        for e in 0..spec.marks.len() {
            let a = delta_ue(t, &x, y, &probe, e, &phi, spec).unwrap();
            let b = delta_ue(t, &x, y, &probe, e, &shifted, spec).unwrap();
            if a.to_bits() != b.to_bits() {
                fail("Δ invariant under φ + c");
            }
        }

        let de = derivative_error(&phi, t, &x, 1e-4);
        worst_derivative = worst_derivative.max(de);
        if de > 1e-6 {
            fail("derivative error");
        }

        let gap = delta_gap(t, &x, y, &theta.p, &phi, &search, controls, spec).unwrap();
        if gap.value > gap.cell_diameter {
            ball_premises += 1;
            // Every point of the ball of radius δ − diameter, clipped to the
            // box, is attainable within one r-cell diagonal.
            let hr = search.r_half_width / search.points_per_side as f64;
            let radius = (gap.value - gap.cell_diameter).min(search.r_half_width.min(search.s_half_width));
            for _ in 0..20 {
                let (r, s) = loop {
                    let r = rng.random_range(-radius..=radius);
                    let s = rng.random_range(-radius..=radius);
                    if r * r + s * s <= radius * radius {
                        break (r, s);
                    }
                };
                if !attainable(t, &x, y, &theta.p, &[r], s, hr, &phi, controls, spec) {
                    fail("δ > diameter ⇒ ball in 𝐍");
                    break;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && ball_premises > 0 && elapsed < Duration::from_secs(30);
    report(
        6,
        pass,
        format!(
            "failures {failures:?}, worst derivative error {worst_derivative:.1e}, {ball_premises} ball premises, {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_exponential_change_of_variables() {
    // dY = (1 − Y) ds, no noise; both Euler schemes are first order.
    let dims = Dims {
        d: 1,
        q: 1,
        n: 0,
        processes: 0,
    };
    let mut spec = ProblemSpec::zero(dims, MarkSpace::empty(), 1.0).unwrap();
    spec.coefficients.mu_y = ScalarFn::Affine(Affine::new(1.0, [(Var::Y, -1.0)]));
    let policy = ControlPolicy::Constant(ControlValue::zero(dims, 0));
    let dev = |c: f64, steps: usize| exp_transform_check(&spec, &policy, c, 0.0, &[0.0], 0.5, 4, steps, 7).unwrap();

    // Global Euler bounds with |Y − 1| ≤ 1/2 and Ỹ'' = c e^{cs}, c = 1, T = 1:
    // (e/2)·(1/2) + e/2 < 2.1.
    let bound = 2.1;
    let devs: Vec<(usize, f64)> = [50, 100, 200, 400].iter().map(|&n| (n, dev(1.0, n))).collect();
    let within = devs.iter().all(|&(n, d)| d <= bound / n as f64);
    let ratios: Vec<f64> = devs.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let halves = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    let zero = dev(0.0, 100);
    let pass = within && halves && zero <= 1e-12;
    report(7, pass, format!("deviations {devs:?}, ratios {ratios:?}, c = 0 gives {zero:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_8_discrete_comparison() {
    let spec = problem("embedding");
    let controls = ControlGrid::lattice(&spec, 3, &[], false, f64::INFINITY).unwrap();
    let axis = Axis {
        lo: -2.0,
        hi: 2.0,
        nodes: 81,
    };
    let grid = SpaceTimeGrid::new(1.0, 100, vec![axis], Boundary::Clamp).unwrap();
    let cfl = cfl_check(&spec, &grid, &controls).unwrap();
    assert!(cfl.passes && cfl.monotone);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let phi = TestFunction::random_polynomial(&mut rng, 1, 3, 4).perturbed(&mut rng, 0.5);
        let g1 = grid.sample(|x| phi.eval(0.0, x).tanh());
        let g2: Vec<f64> = g1
            .iter()
            .map(|v| if rng.random_bool(0.3) { *v } else { v + rng.random_range(0.0..0.5) })
            .collect();
        let s1 = solve_hjb(&spec, &g1, &grid, Form::Control(&controls), &GOperator::inactive()).unwrap();
        let s2 = solve_hjb(&spec, &g2, &grid, Form::Control(&controls), &GOperator::inactive()).unwrap();
        for k in 0..=grid.n_time {
            for (a, b) in s1.field.slice(k).iter().zip(s2.field.slice(k)) {
                worst = worst.max(a - b);
            }
        }
    }
    let pass = worst <= 1e-12;
    report(8, pass, format!("max V1 − V2 = {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_9_martingale_representation_is_exact() {
    let mut worst: f64 = 0.0;
    let mut leaves = 0;
    for name in ["superhedge", "embedding", "pure_jump"] {
        let spec = problem(name);
        let grid = ControlGrid::lattice(&spec, 3, &[], false, f64::INFINITY).unwrap();
        let tree = build_tree(&spec, 0.0, &[0.0], 6, (&grid).into(), &complete()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let payoff: Vec<f64> = (0..tree.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let per_node: Vec<usize> = (0..tree.n_nodes()).map(|_| rng.random_range(0..grid.len())).collect();
        for policy in [TreePolicy::Constant(grid.len() - 1), TreePolicy::PerNode(per_node)] {
            let rep = martingale_representation(&tree, &spec, |id, _| payoff[id], &policy).unwrap();
            for (leaf, y) in reconstruct(&tree, &spec, &rep) {
                worst = worst.max((y - payoff[leaf]).abs());
                leaves += 1;
            }
        }
    }
    let pass = worst <= 1e-10 && leaves > 0;
    report(9, pass, format!("{leaves} leaves, max error {worst:.2e}"));
    assert!(pass);
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_10_determinism_across_runs_and_workers() {
    let configs = [
        (Kind::Validate, "validate_zero"),
        (Kind::Simulate, "simulate_superhedge"),
        (Kind::Operators, "operators_superhedge"),
        (Kind::Solve, "solve_pure_jump"),
        (Kind::Tree, "tree_superhedge"),
        (Kind::Certify, "certify_superhedge"),
        (Kind::EmbedEquivalence, "embed"),
        (Kind::RadiusSweep, "sweep_embedding"),
    ];
    assert_eq!(configs.len(), Kind::all().len());
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (kind, name) in configs {
        let mut cfg = ExperimentConfig::load(manifest(&format!("configs/{name}.toml"))).unwrap();
        cfg.kind = Some(kind);
        let mut outputs = Vec::new();
        for (run, workers) in [1, 1, 4].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{name}-{run}"));
            cfg.out = Some(dir.clone());
            run_with_workers(&cfg, workers).unwrap();
            outputs.push(csv_files(&dir));
        }
        assert!(!outputs[0].is_empty(), "{name} wrote no CSV");
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(name);
        }
    }
    report(10, mismatched.is_empty(), format!("mismatched kinds {mismatched:?}"));
    assert!(mismatched.is_empty());
}
