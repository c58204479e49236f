use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, Output, SolveForm, TerminalData};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::model::{validate_problem, ControlGrid, ProblemSpec};
use crate::operators::{bold_h, delta_gap, h_eps_eta, semi_limits, ControlSet, TestFunction, Theta};
use crate::pde::{solve_hjb, solve_terminal, DeltaMode, Form, GOperator, HjbSolution};
use crate::perron::{
    builtin_subsolution, builtin_supersolution, certify_subsolution, certify_supersolution, sandwich_check,
    Certificate, Refutation,
};
use crate::sde::{self, ControlPolicy};
use crate::tree::{build_tree, tree_expectation_min, tree_target_value, ScenarioTree, TargetOptions, TreeOptions};

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|a| fmt(*a)).collect::<Vec<_>>().join(" ")
}

fn x_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|j| format!("{prefix}{j}")).collect()
}

fn row(head: impl IntoIterator<Item = String>, nums: impl IntoIterator<Item = f64>) -> Vec<String> {
    head.into_iter().chain(nums.into_iter().map(fmt)).collect()
}

pub(super) fn validate(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let params = cfg.validate.clone().unwrap_or_default();
    let report = validate_problem(spec, params.samples, cfg.seed)?;
    let mut w = out.csv("violations.csv")?;
    let mut header = vec!["kind".to_string(), "t".to_string()];
    header.extend(x_header("x", spec.dims.d));
    header.extend(["y", "u_norm", "value", "bound"].map(String::from));
    w.write_record(&header)?;
    for v in &report.violations {
        let nums = [v.t].into_iter().chain(v.x.iter().copied()).chain([v.y, v.u_norm, v.value, v.bound]);
        w.write_record(row([v.kind.name().to_string()], nums))?;
    }
    w.flush()?;
    out.note("samples", report.samples);
    out.note("violations", report.violations.len());
    if !report.is_clean() {
        out.fail(3);
    }
    Ok(())
}

pub(super) fn simulate(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.require(&cfg.simulate, "simulate")?;
    let grid = cfg.controls.grid(spec)?;
    if p.control >= grid.len() {
        return Err(Error::config(format!("control {} is not in a grid of {}", p.control, grid.len())));
    }
    let policy = ControlPolicy::Constant(grid.get(p.control).clone());
    let bundle = sde::simulate(spec, &policy, p.t0, &p.x0, p.y0, p.paths, p.steps, cfg.seed)?;
    if p.write_paths {
        out.files.push("paths.csv".into());
        bundle.save_csv(out.dir.join("paths.csv"), spec.dims.processes)?;
    }
    let last = bundle.n_times() - 1;
    let mut w = out.csv("terminal.csv")?;
    let mut header = vec!["path".to_string()];
    header.extend(x_header("x", spec.dims.d));
    header.extend(["y", "g", "jumps"].map(String::from));
    w.write_record(&header)?;
    let (mut sum, mut sq, mut hit) = (0.0, 0.0, 0usize);
    for path in 0..bundle.n_paths() {
        let x = bundle.x(path, last);
        let y = bundle.y(path, last);
        let g = spec.g(x)?;
        sum += g;
        sq += g * g;
        hit += usize::from(y >= g);
        let nums = x.iter().copied().chain([y, g, bundle.jumps[path].len() as f64]);
        w.write_record(row([path.to_string()], nums))?;
    }
    w.flush()?;
    let n = bundle.n_paths() as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    out.note("paths", bundle.n_paths());
    out.note("mean_g", fmt(mean));
    out.note("stderr_g", fmt((var / n).sqrt()));
    out.note("fraction_y_above_g", fmt(hit as f64 / n));
    Ok(())
}

fn sample_box(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi && lo.is_finite() && hi.is_finite() {
        rng.random_range(lo..=hi)
    } else {
        0.0
    }
}

/// Random `(t, x, y, φ)` in the domain box.
fn sample_point(rng: &mut ChaCha8Rng, spec: &ProblemSpec, degree: u32, terms: usize) -> (f64, Vec<f64>, f64, TestFunction) {
    let t = rng.random_range(0.0..spec.horizon);
    let x: Vec<f64> = spec.domain.x.iter().map(|iv| sample_box(rng, iv.lo, iv.hi)).collect();
    let y = sample_box(rng, spec.domain.y.lo, spec.domain.y.hi);
    let phi = TestFunction::random_polynomial(rng, spec.dims.d, degree, terms);
    (t, x, y, phi)
}

pub(super) fn operators(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.require(&cfg.operators, "operators")?;
    let grid = cfg.controls.grid(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = out.csv("operators.csv")?;
    w.write_record(["operator", "point", "t", "x", "y", "value", "admissible"])?;
    let mut empty = 0usize;
    for k in 0..p.points {
        let (t, x, y, phi) = sample_point(&mut rng, spec, p.degree, p.terms);
        let theta = Theta::from_test_function(&phi, t, x.clone(), y);
        let loc = [k.to_string(), fmt(t), fmt_vec(&x), fmt(y)];
        let mut put = |op: &str, value: f64, admissible: usize| -> Result<()> {
            let mut r = vec![op.to_string()];
            r.extend(loc.iter().cloned());
            r.push(fmt(value));
            r.push(admissible.to_string());
            w.write_record(&r)?;
            Ok(())
        };
        let h = h_eps_eta(&theta, &phi, p.eps, p.eta, (&grid).into(), spec)?;
        empty += usize::from(h.admissible == 0);
        put("H_eps_eta", h.value, h.admissible)?;
        let bh = bold_h(t, &theta.x, &theta.p, &theta.a, &phi, &grid, spec)?;
        put("bold_H", bh.value, bh.admissible)?;
        if let Some(s) = &p.schedule {
            let sl = semi_limits(&theta, &phi, s, (&grid).into(), spec)?;
            put("H_upper", sl.upper, sl.evaluations - sl.empty)?;
            put("H_lower", sl.lower, sl.evaluations - sl.empty)?;
        }
        if let Some(search) = &p.delta {
            let dg = delta_gap(t, &theta.x, y, &theta.p, &phi, search, (&grid).into(), spec)?;
            put("delta", dg.value, dg.inside)?;
        }
    }
    w.flush()?;
    out.note("points", p.points);
    out.note("controls", grid.len());
    out.note("empty_admissible_sets", empty);
    Ok(())
}

pub(super) fn solve_with(
    cfg: &ExperimentConfig,
    spec: &ProblemSpec,
    grid_controls: &ControlGrid,
) -> Result<(HjbSolution, Vec<f64>, usize)> {
    let p = cfg.require(&cfg.solve, "solve")?;
    let g = p.g.map(GOperator::new).unwrap_or_else(GOperator::inactive);
    let (terminal, iterations) = match p.terminal {
        TerminalData::Payoff => (p.grid.sample(|x| spec.payoff.eval(x)), 0),
        TerminalData::Layer => {
            let params = p.terminal_params.unwrap_or_default();
            let delta = match &p.delta {
                Some(search) => DeltaMode::Lattice {
                    search: *search,
                    controls: grid_controls.into(),
                },
                None => DeltaMode::Infinite,
            };
            let sol = solve_terminal(spec, &g, &p.grid, &params, delta)?;
            (sol.values, sol.iterations)
        }
    };
    let form = match p.form {
        SolveForm::Control => Form::Control(grid_controls),
        SolveForm::Target => Form::Target {
            controls: grid_controls.into(),
            eps: p.eps,
            eta: p.eta,
        },
    };
    let sol = solve_hjb(spec, &terminal, &p.grid, form, &g)?;
    Ok((sol, terminal, iterations))
}

pub(super) fn solve(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.require(&cfg.solve, "solve")?;
    let grid_controls = cfg.controls.grid(spec)?;
    let (sol, _, iterations) = solve_with(cfg, spec, &grid_controls)?;
    out.files.push("field.csv".into());
    sol.field.save_csv(out.dir.join("field.csv"), p.every.max(1))?;
    let mut w = out.csv("report.csv")?;
    let mut header = x_header("x", spec.dims.d);
    header.push("value".into());
    w.write_record(&header)?;
    for x in &p.report {
        w.write_record(row([], x.iter().copied().chain([sol.field.at(0, x)])))?;
    }
    w.flush()?;
    out.note("dt", fmt(sol.cfl.dt));
    out.note("max_dt", fmt(sol.cfl.max_dt));
    out.note("monotone", sol.cfl.monotone);
    out.note("terminal_iterations", iterations);
    out.note("pinned_nodes", sol.pinned_nodes);
    out.note("frozen_nodes", sol.frozen_nodes);
    out.note("capped_nodes", sol.capped_nodes);
    for x in &p.report {
        out.note(&format!("value_at[{}]", fmt_vec(x)), fmt(sol.field.at(0, x)));
    }
    Ok(())
}

fn tree_options(cfg: &ExperimentConfig) -> Result<(TreeOptions, TargetOptions)> {
    let p = cfg.require(&cfg.tree, "tree")?;
    Ok((
        TreeOptions {
            scheme: p.scheme,
            node_budget: p.node_budget,
        },
        TargetOptions {
            y_max: p.y_max,
            ..TargetOptions::default()
        },
    ))
}

fn build(cfg: &ExperimentConfig, spec: &ProblemSpec, controls: ControlSet<'_>) -> Result<ScenarioTree> {
    let p = cfg.require(&cfg.tree, "tree")?;
    let (opts, _) = tree_options(cfg)?;
    build_tree(spec, p.t0, &p.x0, p.depth, controls, &opts)
}

fn node_header(d: usize) -> Vec<String> {
    let mut h = vec!["node".to_string(), "step".to_string(), "time".to_string()];
    h.extend(x_header("x", d));
    h
}

fn node_row(tree: &ScenarioTree, id: usize) -> Vec<String> {
    let n = &tree.nodes[id];
    row([id.to_string(), n.step.to_string()], [n.time].into_iter().chain(n.x.iter().copied()))
}

pub(super) fn tree(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let grid = cfg.controls.grid(spec)?;
    let tree = build(cfg, spec, (&grid).into())?;
    let (_, topts) = tree_options(cfg)?;
    let prof = tree_target_value(&tree, spec, |x| spec.payoff.eval(x), (&grid).into(), &topts)?;
    let dp = tree_expectation_min(&tree, |x| spec.payoff.eval(x));
    let mut w = out.csv("tree.csv")?;
    let mut header = node_header(spec.dims.d);
    header.extend(["target_value", "witness", "dp_expectation", "dp_control"].map(String::from));
    w.write_record(&header)?;
    for id in 0..tree.n_nodes() {
        let mut r = node_row(&tree, id);
        r.push(fmt(prof.values[id]));
        r.push(match &prof.witness[id] {
            Some(u) => grid.position(u).map_or("-".into(), |k| k.to_string()),
            None => "-".into(),
        });
        r.push(fmt(dp.values[id]));
        r.push(if tree.nodes[id].is_leaf() { "-".into() } else { dp.policy.at(id).to_string() });
        w.write_record(&r)?;
    }
    w.flush()?;
    out.note("nodes", tree.n_nodes());
    out.note("controls", grid.len());
    out.note("root_target_value", fmt(prof.root()));
    out.note("root_dp_expectation", fmt(dp.root()));
    out.note("bisected_nodes", prof.bisected);
    Ok(())
}

fn describe(c: &Certificate) -> (String, usize, usize, String) {
    match c {
        Certificate::Certified {
            checked_nodes,
            ladder_nodes,
            ..
        } => ("certified".into(), *checked_nodes, *ladder_nodes, "-".into()),
        Certificate::Refuted { witness, checked_nodes } => {
            let text = match witness {
                Refutation::Terminal { leaf, w, g } => format!("terminal leaf={leaf} w={} g={}", fmt(*w), fmt(*g)),
                Refutation::Growth { node, w, bound } => format!("growth node={node} w={} bound={}", fmt(*w), fmt(*bound)),
                Refutation::NotMaintained { node, y } => format!("not-maintained node={node} y={}", fmt(*y)),
                Refutation::NoEscape { node, control, y } => {
                    format!("no-escape node={node} control={control} y={}", fmt(*y))
                }
            };
            ("refuted".into(), *checked_nodes, 0, text)
        }
    }
}

pub(super) fn certify(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.certify.clone().unwrap_or(super::CertifyParams {
        ladder: Default::default(),
        corrupt: true,
    });
    let grid = cfg.controls.grid(spec)?;
    let tree = build(cfg, spec, (&grid).into())?;
    let (_, topts) = tree_options(cfg)?;
    let sup = builtin_supersolution(spec, &grid, Some(tree.dt))?;
    let sub = builtin_subsolution(spec, Some(tree.dt))?;
    let mut results = vec![
        ("builtin-super", sup, certify_supersolution(&sup.candidate(), &tree, spec, &p.ladder)?),
        ("builtin-sub", sub, certify_subsolution(&sub.candidate(), &tree, spec, &p.ladder)?),
    ];
    if p.corrupt {
        let bad = sup.corrupted(spec)?;
        results.push(("corrupted-super", bad, certify_supersolution(&bad.candidate(), &tree, spec, &p.ladder)?));
    }
    let mut w = out.csv("certificates.csv")?;
    w.write_record(["candidate", "k", "gamma", "c", "verdict", "checked_nodes", "ladder_nodes", "witness"])?;
    for (name, b, cert) in &results {
        let (verdict, checked, ladder, witness) = describe(cert);
        w.write_record([
            name.to_string(),
            fmt(b.k),
            fmt(b.gamma),
            fmt(b.c),
            verdict.clone(),
            checked.to_string(),
            ladder.to_string(),
            witness,
        ])?;
        out.note(name, verdict);
    }
    w.flush()?;
    let prof = tree_target_value(&tree, spec, |x| spec.payoff.eval(x), (&grid).into(), &topts)?;
    let report = sandwich_check(&[sub.candidate()], &[sup.candidate()], &tree, &prof);
    let mut w = out.csv("sandwich.csv")?;
    let mut header = node_header(spec.dims.d);
    header.extend(["lower", "value", "upper", "ok"].map(String::from));
    w.write_record(&header)?;
    let (lo, hi) = (sub.candidate(), sup.candidate());
    for id in 0..tree.n_nodes() {
        let n = &tree.nodes[id];
        let (l, v, u) = (lo.eval(n.time, &n.x), prof.values[id], hi.eval(n.time, &n.x));
        let mut r = node_row(&tree, id);
        r.extend([fmt(l), fmt(v), fmt(u), (l <= v && v <= u).to_string()]);
        w.write_record(&r)?;
    }
    w.flush()?;
    out.note("sandwich_nodes", report.checked_nodes);
    out.note("sandwich_violations", report.violations.len());
    let certified = results[0].2.is_certified() && results[1].2.is_certified();
    if !certified || !report.violations.is_empty() {
        out.fail(3);
    }
    Ok(())
}

pub(super) fn embed(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.embed.clone().unwrap_or(super::EmbedParams {
        delta_samples: 0,
        delta: Default::default(),
    });
    let emb = Embedding::new(spec.clone())?;
    let grid = cfg.controls.grid(spec)?;
    let span = emb.spanning(&grid);
    let (_, topts) = tree_options(cfg)?;
    let t_target = build(cfg, emb.target(), (&span).into())?;
    let t_base = build(cfg, spec, (&grid).into())?;
    let g = |x: &[f64]| spec.payoff.eval(x);
    let prof = tree_target_value(&t_target, emb.target(), g, (&span).into(), &topts)?;
    let dp = tree_expectation_min(&t_base, g);
    let mut w = out.csv("embed.csv")?;
    let mut header = node_header(spec.dims.d);
    header.extend(["target_value", "dp_expectation", "difference"].map(String::from));
    w.write_record(&header)?;
    let mut worst: f64 = 0.0;
    for id in 0..t_base.n_nodes() {
        let diff = prof.values[id] - dp.values[id];
        worst = worst.max(diff.abs());
        let mut r = node_row(&t_base, id);
        r.extend([fmt(prof.values[id]), fmt(dp.values[id]), fmt(diff)]);
        w.write_record(&r)?;
    }
    w.flush()?;
    out.note("nodes", t_base.n_nodes());
    out.note("root_target_value", fmt(prof.root()));
    out.note("root_dp_expectation", fmt(dp.root()));
    out.note("max_abs_difference", fmt(worst));
    if p.delta_samples > 0 {
        let target = emb.target();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut w = out.csv("delta.csv")?;
        w.write_record(["sample", "t", "x", "y", "p", "delta", "inside", "outside"])?;
        let mut infinite = 0;
        for k in 0..p.delta_samples {
            let (t, x, y, phi) = sample_point(&mut rng, spec, 2, 3);
            let grad = phi.grad(t, &x);
            let dg = delta_gap(t, &x, y, &grad, &phi, &p.delta, (&span).into(), target)?;
            infinite += usize::from(dg.value == f64::INFINITY);
            w.write_record([
                k.to_string(),
                fmt(t),
                fmt_vec(&x),
                fmt(y),
                fmt_vec(&grad),
                fmt(dg.value),
                dg.inside.to_string(),
                dg.outside.to_string(),
            ])?;
        }
        w.flush()?;
        out.note("delta_samples", p.delta_samples);
        out.note("delta_infinite", infinite);
    }
    Ok(())
}

pub(super) fn sweep(cfg: &ExperimentConfig, spec: &ProblemSpec, out: &mut Output) -> Result<()> {
    let p = cfg.require(&cfg.sweep, "sweep")?;
    let (_, topts) = tree_options(cfg)?;
    let mut w = out.csv("sweep.csv")?;
    w.write_record(["radius", "controls", "tree_target_value", "tree_dp_expectation", "pde_value"])?;
    for &radius in &p.radii {
        let mut controls = cfg.controls.clone();
        controls.radius = radius;
        let grid = controls.grid(spec)?;
        let tree = build(cfg, spec, (&grid).into())?;
        let g = |x: &[f64]| spec.payoff.eval(x);
        let prof = tree_target_value(&tree, spec, g, (&grid).into(), &topts)?;
        let dp = tree_expectation_min(&tree, g);
        let pde = if p.pde {
            let x0 = &cfg.require(&cfg.tree, "tree")?.x0;
            let (sol, _, _) = solve_with(cfg, spec, &grid)?;
            sol.field.at(0, x0)
        } else {
            f64::NAN
        };
        w.write_record([
            fmt(radius),
            grid.len().to_string(),
            fmt(prof.root()),
            fmt(dp.root()),
            fmt(pde),
        ])?;
    }
    w.flush()?;
    out.note("radii", p.radii.len());
    Ok(())
}
