use super::*;
use crate::model::{Affine, Dims, MarkSpace, Payoff, ScalarFn};
use crate::tree::{build_tree, tree_target_value, BranchScheme, TargetOptions, TreeOptions};

const E2: f64 = 7.38905609893065;

fn zero_spec() -> ProblemSpec {
    let dims = Dims { d: 1, q: 1, n: 1, processes: 1 };
    let mut s = ProblemSpec::zero(dims, MarkSpace::single(0.5).unwrap(), 1.0).unwrap();
    s.coefficients.sigma_x[0][0] = ScalarFn::Constant(0.3);
    s.coefficients.beta[0][0] = ScalarFn::Constant(0.2);
    s.payoff = Payoff::tanh();
    s.g_bound = Some(1.0);
    s.lipschitz = 1.0;
    s.growth = Some(1.0);
    s
}

fn neutral(s: &ProblemSpec) -> ControlGrid {
    ControlGrid::singleton(s, ControlValue::zero(s.dims, s.marks.len())).unwrap()
}

fn tree(s: &ProblemSpec, cg: &ControlGrid, depth: usize) -> ScenarioTree {
    let opts = TreeOptions {
        scheme: BranchScheme::Product,
        ..TreeOptions::default()
    };
    build_tree(s, 0.0, &[0.1], depth, cg.into(), &opts).unwrap()
}

fn constant(c: f64, side: TerminalSide) -> CandidateFunction {
    CandidateFunction::new("const", side, (c.abs() + 1.0, 0), move |_, _| c)
}

#[test]
fn constants_under_zero_dynamics() {
    let s = zero_spec();
    let cg = neutral(&s);
    let t = tree(&s, &cg, 3);
    let lad = LadderOptions::default();
    let sup = certify_supersolution(&constant(1.0, TerminalSide::AboveG), &t, &s, &lad).unwrap();
    assert!(sup.is_certified());
    let sub = certify_subsolution(&constant(-1.0, TerminalSide::BelowG), &t, &s, &lad).unwrap();
    assert!(sub.is_certified());
    let bad = certify_subsolution(&constant(5.0, TerminalSide::BelowG), &t, &s, &lad).unwrap();
    assert!(matches!(bad.witness(), Some(Refutation::Terminal { .. })));
    assert!(bad.witness().unwrap().replay(&constant(5.0, TerminalSide::BelowG), &t, &s).unwrap());
}

#[test]
fn builtin_values() {
    let s = zero_spec();
    let sup = builtin_supersolution(&s, &neutral(&s), None).unwrap();
    assert_eq!((sup.k, sup.c), (2.0, 0.0));
    assert!((sup.gamma - (1.0 + E2)).abs() < 1e-12);
    let w = sup.candidate();
    assert!((w.eval(0.5, &[0.0]) - (1.0 + E2 - 1f64.exp())).abs() < 1e-12);
    assert!((w.eval(1.0, &[3.0]) - 1.0).abs() < 1e-12);
    let sub = builtin_subsolution(&s, None).unwrap();
    assert!((sub.candidate().eval(0.25, &[0.0]) - (0.5f64.exp() - 2.0 - E2)).abs() < 1e-12);
    assert!((sub.candidate().eval(1.0, &[0.0]) + 2.0).abs() < 1e-12);
    for t in [0.0, 0.3, 1.0] {
        assert!(w.eval(t, &[0.0]) >= sub.candidate().eval(t, &[0.0]));
    }
}

#[test]
fn builtin_errors() {
    let mut s = zero_spec();
    s.coefficients.sigma_y[0] = ScalarFn::Constant(1.0);
    assert!(matches!(builtin_supersolution(&s, &neutral(&s), None), Err(Error::Config(_))));
    let mut s = zero_spec();
    s.growth = None;
    assert!(matches!(builtin_subsolution(&s, None), Err(Error::Config(_))));
    s.g_bound = None;
    assert!(builtin_supersolution(&s, &neutral(&s), None).is_err());
}

#[test]
fn builtins_certify_on_zero_dynamics_and_corruption_is_refuted() {
    let s = zero_spec();
    let cg = neutral(&s);
    let t = tree(&s, &cg, 4);
    let lad = LadderOptions::default();
    let sup = builtin_supersolution(&s, &cg, None).unwrap();
    let cert = certify_supersolution(&sup.candidate(), &t, &s, &lad).unwrap();
    let Certificate::Certified { maintaining, ladder_nodes, .. } = &cert else { panic!("{cert:?}") };
    assert_eq!(*ladder_nodes, 0);
    let maintaining = maintaining.as_ref().unwrap();
    assert!(replay_maintaining(&sup.candidate(), &t, &s, maintaining).unwrap());
    // a larger function meeting the terminal condition keeps the same witness
    assert!(replay_maintaining(&sup.candidate().shifted(0.5), &t, &s, maintaining).unwrap());

    let sub = builtin_subsolution(&s, None).unwrap();
    assert!(certify_subsolution(&sub.candidate(), &t, &s, &lad).unwrap().is_certified());

    let bad = sup.corrupted(&s).unwrap().candidate();
    assert!((bad.eval(1.0, &[0.0]) + 2.0).abs() < 1e-9);
    let r = certify_supersolution(&bad, &t, &s, &lad).unwrap();
    let w = r.witness().unwrap();
    assert!(matches!(w, Refutation::Terminal { .. }));
    assert!(w.replay(&bad, &t, &s).unwrap());
}

#[test]
fn mean_reverting_y_needs_the_exponential_form() {
    let mut s = zero_spec();
    s.coefficients.mu_y = ScalarFn::Affine(Affine::new(0.0, [(Var::Y, -1.0)]));
    let cg = neutral(&s);
    let t = tree(&s, &cg, 5);
    let lad = LadderOptions::default();
    let plain = Builtin {
        k: 2.0,
        gamma: 1.0 + E2,
        c: 0.0,
        side: TerminalSide::AboveG,
        horizon: 1.0,
    };
    let r = certify_supersolution(&plain.candidate(), &t, &s, &lad).unwrap();
    let w = r.witness().expect("plain form is not maintained");
    assert!(matches!(w, Refutation::NotMaintained { .. }));
    assert!(w.replay(&plain.candidate(), &t, &s).unwrap());
    let b = builtin_supersolution(&s, &cg, None).unwrap();
    assert_eq!(b.c, 1.0);
    let coarse = certify_supersolution(&b.candidate(), &t, &s, &lad).unwrap();
    assert!(matches!(coarse.witness(), Some(Refutation::NotMaintained { node: 0, .. })));
    let b = builtin_supersolution(&s, &cg, Some(t.dt)).unwrap();
    assert!(b.c > 1.0);
    let cert = certify_supersolution(&b.candidate(), &t, &s, &lad).unwrap();
    assert!(cert.is_certified(), "{cert:?}");

    let plain_sub = Builtin {
        k: 2.0,
        gamma: 2.0 + E2,
        side: TerminalSide::BelowG,
        ..plain
    };
    let r = certify_subsolution(&plain_sub.candidate(), &t, &s, &lad).unwrap();
    assert!(matches!(r.witness(), Some(Refutation::NoEscape { .. })));
    let sub = builtin_subsolution(&s, Some(t.dt)).unwrap();
    assert!(sub.c > 1.0);
    assert!((sub.candidate().eval(1.0, &[0.0]) + 2.0).abs() < 1e-9);
    assert!(certify_subsolution(&sub.candidate(), &t, &s, &lad).unwrap().is_certified());
}

#[test]
fn sub_solution_escape_failure_has_a_witness() {
    // Y rises deterministically, so from just below a flat w nothing escapes.
    let mut s = zero_spec();
    s.coefficients.mu_y = ScalarFn::Constant(1.0);
    let cg = neutral(&s);
    let t = tree(&s, &cg, 2);
    let w = constant(-1.0, TerminalSide::BelowG);
    let r = certify_subsolution(&w, &t, &s, &LadderOptions::default()).unwrap();
    let wit = r.witness().unwrap();
    assert!(matches!(wit, Refutation::NoEscape { node: 0, control: 0, .. }));
    assert!(wit.replay(&w, &t, &s).unwrap());
}

#[test]
fn sandwich_cases() {
    let s = zero_spec();
    let cg = neutral(&s);
    let t = tree(&s, &cg, 3);
    let prof = tree_target_value(&t, &s, |x| s.g(x).unwrap(), (&cg).into(), &TargetOptions::default()).unwrap();
    let sup = builtin_supersolution(&s, &cg, None).unwrap().candidate();
    let sub = builtin_subsolution(&s, None).unwrap().candidate();
    let rep = sandwich_check(&[sub.clone()], &[sup.clone()], &t, &prof);
    assert!(rep.violations.is_empty());
    assert_eq!(rep.checked_nodes, t.n_nodes());
    assert!(sandwich_check(&[], &[sup.clone()], &t, &prof).violations.is_empty());
    let low = sup.shifted(-100.0);
    let rep = sandwich_check(&[sub], &[low], &t, &prof);
    assert_eq!(rep.violations.len(), t.n_nodes());
}
