use super::*;
use crate::model::{Affine, Dims, MarkSpace, ScalarFn, Var};

fn spec1(processes: usize, rate: f64) -> ProblemSpec {
    let dims = Dims { d: 1, q: 1, n: 0, processes };
    let marks = if processes == 0 { MarkSpace::empty() } else { MarkSpace::single(rate).unwrap() };
    ProblemSpec::zero(dims, marks, 1.0).unwrap()
}

fn u0(spec: &ProblemSpec) -> ControlValue {
    ControlValue::zero(spec.dims, spec.marks.len())
}

fn theta(t: f64, x: f64, y: f64, p: f64, a: f64) -> Theta {
    Theta::new(t, vec![x], y, vec![p], DMatrix::from_element(1, 1, a)).unwrap()
}

#[test]
fn f_u_examples() {
    let mut s = spec1(0, 0.0);
    let th = theta(0.1, 0.3, 0.2, 3.0, 1.0);
    assert_eq!(f_u(&th, &u0(&s), &s).unwrap(), 0.0);
    s.coefficients.mu_y = ScalarFn::Constant(2.0);
    s.coefficients.mu_x[0] = ScalarFn::Constant(1.0);
    s.coefficients.sigma_x[0][0] = ScalarFn::Constant(2.0);
    assert_eq!(f_u(&th, &u0(&s), &s).unwrap(), -3.0);
}

#[test]
fn n_u_examples() {
    let mut s = spec1(0, 0.0);
    assert_eq!(n_u(0.0, &[0.0], 0.0, &[1.0], &u0(&s), &s).unwrap(), vec![0.0]);
    s.coefficients.sigma_y[0] = ScalarFn::Constant(1.0);
    s.coefficients.sigma_x[0][0] = ScalarFn::Constant(2.0);
    assert_eq!(n_u(0.0, &[0.0], 0.0, &[1.0], &u0(&s), &s).unwrap(), vec![-1.0]);
    assert_eq!(n_u(0.0, &[0.0], 0.0, &[0.0], &u0(&s), &s).unwrap(), vec![1.0]);
}

#[test]
fn delta_examples() {
    let mut s = spec1(1, 1.0);
    let phi = TestFunction::linear(&[1.0]);
    assert_eq!(delta_ue(0.0, &[0.4], 0.0, &u0(&s), 0, &phi, &s).unwrap(), 0.0);
    s.coefficients.b[0] = ScalarFn::Constant(1.0);
    s.coefficients.beta[0][0] = ScalarFn::Constant(1.0);
    assert_eq!(delta_ue(0.0, &[0.5], 0.0, &u0(&s), 0, &phi, &s).unwrap(), 0.0);

    let dims = Dims { d: 1, q: 1, n: 0, processes: 2 };
    let marks = MarkSpace::new(vec![0.0], vec![vec![1.0], vec![1.0]]).unwrap();
    let mut s2 = ProblemSpec::zero(dims, marks, 1.0).unwrap();
    s2.coefficients.b[0] = ScalarFn::Constant(0.5);
    s2.coefficients.b[1] = ScalarFn::Constant(-0.2);
    let u = u0(&s2);
    assert_eq!(jump_gaps(0.0, &[0.0], 0.0, &u, 0, &phi, &s2).unwrap(), vec![0.5, -0.2]);
    assert_eq!(delta_ue(0.0, &[0.0], 0.0, &u, 0, &phi, &s2).unwrap(), -0.2);
    assert_eq!(j_u(0.0, &[0.0], 0.0, &u, &phi, &s2).unwrap(), -0.2);
}

#[test]
fn admissibility_examples() {
    let mut s = spec1(1, 1.0);
    let phi = TestFunction::zero(1);
    let u = u0(&s);
    assert!(in_n_eps_eta(0.0, &[0.0], 0.0, &[0.0], &u, 0.0, 0.0, &phi, &s).unwrap());
    assert!(!in_n_eps_eta(0.0, &[0.0], 0.0, &[0.0], &u, 0.0, 0.5, &phi, &s).unwrap());
    s.coefficients.sigma_y[0] = ScalarFn::Constant(1.0);
    assert!(!in_n_eps_eta(0.0, &[0.0], 0.0, &[0.0], &u, 0.5, 0.0, &phi, &s).unwrap());
}

#[test]
fn h_eps_eta_examples() {
    let mut s = spec1(0, 0.0);
    s.domain.u1[0] = crate::model::Interval::new(-3.0, 1.0);
    let grid = ControlGrid::new(
        &s,
        vec![ControlValue::diffusive(vec![-3.0], 0, 0), ControlValue::diffusive(vec![1.0], 0, 0)],
        3.0,
    )
    .unwrap();
    let phi = TestFunction::zero(1);
    let th = theta(0.0, 0.0, 0.0, 0.0, 0.0);
    let h = h_eps_eta(&th, &phi, 0.0, 0.0, (&grid).into(), &s).unwrap();
    assert_eq!(h.value, 0.0);
    s.coefficients.mu_y = ScalarFn::Affine(Affine::new(0.0, [(Var::U(0), 1.0)]));
    let h = h_eps_eta(&th, &phi, 0.0, 0.0, (&grid).into(), &s).unwrap();
    assert_eq!((h.value, h.argmax, h.admissible), (1.0, Some(1), 2));
    s.coefficients.sigma_y[0] = ScalarFn::Constant(1.0);
    let h = h_eps_eta(&th, &phi, 0.5, 0.0, (&grid).into(), &s).unwrap();
    assert_eq!((h.value, h.admissible), (f64::NEG_INFINITY, 0));
}

#[test]
fn generator_examples() {
    let mut s = spec1(0, 0.0);
    let u = u0(&s);
    assert_eq!(generator_l_u(0.0, &[1.0], &u, &TestFunction::constant(1, 4.0), &s).unwrap(), 0.0);
    assert_eq!(generator_l_u(0.3, &[1.0], &u, &TestFunction::time(1), &s).unwrap(), 1.0);
    s.coefficients.mu_x[0] = ScalarFn::Constant(1.0);
    s.coefficients.sigma_x[0][0] = ScalarFn::Constant(2.0);
    let sq = TestFunction::zero(1).with_monomial(1.0, 0, vec![2]);
    assert_eq!(generator_l_u(0.0, &[3.0], &u, &sq, &s).unwrap(), 10.0);
}

#[test]
fn bold_h_examples() {
    let mut s = spec1(1, 2.0);
    let phi = TestFunction::linear(&[1.0]);
    let grid = ControlGrid::singleton(&s, u0(&s)).unwrap();
    let a = DMatrix::zeros(1, 1);
    assert_eq!(bold_h(0.0, &[0.0], &[0.0], &a, &phi, &grid, &s).unwrap().value, 0.0);
    s.coefficients.beta[0][0] = ScalarFn::Constant(1.0);
    assert_eq!(bold_h(0.0, &[0.0], &[0.0], &a, &phi, &grid, &s).unwrap().value, -2.0);

    let mut s = spec1(0, 0.0);
    s.domain.u1[0] = crate::model::Interval::new(-2.0, 1.0);
    s.coefficients.mu_x[0] = ScalarFn::Affine(Affine::new(0.0, [(Var::U(0), 1.0)]));
    let grid = ControlGrid::new(
        &s,
        vec![ControlValue::diffusive(vec![1.0], 0, 0), ControlValue::diffusive(vec![-0.25], 0, 0)],
        2.0,
    )
    .unwrap();
    // −μ p with p = 2: values −2 and 0.5
    let h = bold_h(0.0, &[0.0], &[2.0], &a, &phi, &grid, &s).unwrap();
    assert_eq!((h.value, h.argmax), (0.5, Some(1)));
}

#[test]
fn theta_rejects_asymmetric_matrix() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
    assert!(Theta::new(0.0, vec![0.0, 0.0], 0.0, vec![0.0, 0.0], a).is_err());
}

fn schedule() -> SemiLimitSchedule {
    SemiLimitSchedule {
        eps: vec![0.5, 0.1, 0.01],
        eta: vec![0.5, -0.2, 0.05],
        theta_radii: vec![0.2, 0.05],
        phi_scales: vec![0.1, 0.01],
        samples: 4,
        seed: 9,
    }
}

#[test]
fn semi_limits_on_zero_model() {
    let s = spec1(1, 1.0);
    let grid = ControlGrid::singleton(&s, u0(&s)).unwrap();
    let th = theta(0.5, 0.0, 0.0, 0.0, 0.0);
    let phi = TestFunction::zero(1);
    let sl = semi_limits(&th, &phi, &schedule(), (&grid).into(), &s).unwrap();
    // η = 0.5 leaves the zero model without admissible controls
    assert_eq!(sl.upper, 0.0);
    assert_eq!(sl.lower, f64::NEG_INFINITY);
    let no_jumps = spec1(0, 0.0);
    let grid = ControlGrid::singleton(&no_jumps, u0(&no_jumps)).unwrap();
    let sl = semi_limits(&th, &phi, &schedule(), (&grid).into(), &no_jumps).unwrap();
    assert_eq!((sl.upper, sl.lower), (0.0, 0.0));
}

#[test]
fn semi_limits_brute_force_with_negative_eta() {
    // b ≡ −0.1: admissible only when η ≤ −0.1
    let mut s = spec1(1, 1.0);
    s.coefficients.b[0] = ScalarFn::Constant(-0.1);
    s.coefficients.mu_y = ScalarFn::Constant(0.7);
    let grid = ControlGrid::singleton(&s, u0(&s)).unwrap();
    let th = theta(0.5, 0.0, 0.0, 0.0, 0.0);
    let phi = TestFunction::zero(1);
    let sch = schedule();
    let sl = semi_limits(&th, &phi, &sch, (&grid).into(), &s).unwrap();
    assert_eq!(sl.upper, 0.7);
    assert_eq!(sl.lower, f64::NEG_INFINITY);
    for eta in [0.5, 0.05] {
        let h = h_eps_eta(&th, &phi, 0.5, eta, (&grid).into(), &s).unwrap();
        assert_eq!(h.value, f64::NEG_INFINITY);
    }
}

#[test]
fn schedule_validation_and_refinement() {
    let sch = schedule();
    sch.validate().unwrap();
    let r = sch.refined().unwrap();
    assert_eq!(r.eps, vec![0.1, 0.01]);
    assert_eq!(r.eta, vec![-0.2, 0.05]);
    let mut bad = sch.clone();
    bad.eps = vec![0.1, 0.2];
    assert!(bad.validate().is_err());
    bad = sch.clone();
    bad.eta = vec![0.1, 0.0];
    assert!(bad.validate().is_err());
    bad = sch;
    bad.phi_scales = vec![0.1];
    assert!(bad.validate().is_err());
}

#[test]
fn delta_gap_on_boundary_model() {
    // N ≡ 0, Δ ≡ 0: 𝐍 = {(0, s) : s ≤ 0}
    let s = spec1(1, 1.0);
    let grid = ControlGrid::singleton(&s, u0(&s)).unwrap();
    let phi = TestFunction::zero(1);
    let gap = delta_gap(0.0, &[0.0], 0.0, &[0.0], &phi, &DeltaSearch::default(), (&grid).into(), &s).unwrap();
    assert_eq!(gap.dist_in, 0.0);
    assert!(gap.value.abs() <= gap.cell_diameter);
    assert!(gap.inside > 0 && gap.outside > 0);
}

#[test]
fn delta_gap_positive_when_origin_is_interior() {
    // one control per r-lattice column with Δ = 1 ⇒ 𝐍 ⊇ box ∩ {s ≤ 1}
    let mut s = spec1(1, 1.0);
    s.domain.u1[0] = crate::model::Interval::new(-1.0, 1.0);
    s.coefficients.sigma_y[0] = ScalarFn::Affine(Affine::new(0.0, [(Var::U(0), 1.0)]));
    s.coefficients.b[0] = ScalarFn::Constant(1.0);
    let grid = ControlGrid::lattice(&s, 17, &[], false, 1.0).unwrap();
    let phi = TestFunction::zero(1);
    let search = DeltaSearch {
        r_half_width: 1.0,
        s_half_width: 2.0,
        points_per_side: 8,
    };
    let gap = delta_gap(0.0, &[0.0], 0.0, &[0.0], &phi, &search, (&grid).into(), &s).unwrap();
    assert_eq!((gap.dist_in, gap.dist_out), (0.0, 1.25), "{gap:?}");
    let saturated = delta_gap(0.0, &[0.0], 0.0, &[0.0], &phi, &DeltaSearch::default(), (&grid).into(), &s).unwrap();
    assert_eq!(saturated.value, f64::INFINITY);
}
