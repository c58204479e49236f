use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constraint::GOperator;
use super::grid::{Boundary, SliceView, SpaceTimeGrid, ValueField};
use crate::error::{Error, Result};
use crate::model::{ControlGrid, ControlValue, ProblemSpec};
use crate::operators::{delta_gap, in_n_eps_eta, nonlocal_i, ControlSet, DeltaSearch};

/// Stability bound of the explicit scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CflCertificate {
    pub dt: f64,
    /// `1 / sup (Σ|μ_j|/h_j + Σ a_jj/h_j² + m̂(E))` over nodes, times and controls.
    pub max_dt: f64,
    pub passes: bool,
    /// The bound implies a monotone scheme: clamped boundary and no
    /// cross-diffusion.
    pub monotone: bool,
}

fn cfl_for(spec: &ProblemSpec, grid: &SpaceTimeGrid, controls: &[ControlValue], jumps: bool) -> Result<CflCertificate> {
    let h: Vec<f64> = grid.axes.iter().map(|a| a.spacing()).collect();
    let jump_rate = if jumps { spec.marks.total_mass() } else { 0.0 };
    let per_slice: Vec<(f64, bool)> = (0..grid.n_time)
        .into_par_iter()
        .map(|k| {
            let t = grid.time(k);
            let mut rate: f64 = jump_rate;
            let mut cross = false;
            for node in 0..grid.n_nodes() {
                let x = grid.coords(node);
                for u in controls {
                    let mu = spec.mu_x(t, &x, u)?;
                    let s = spec.sigma_x(t, &x, u)?;
                    let a = &s * s.transpose();
                    let mut r = jump_rate;
                    for j in 0..h.len() {
                        r += mu[j].abs() / h[j] + a[(j, j)] / (h[j] * h[j]);
                        for l in 0..h.len() {
                            cross |= l != j && a[(j, l)] != 0.0;
                        }
                    }
                    rate = rate.max(r);
                }
            }
            Ok((rate, cross))
        })
        .collect::<Result<_>>()?;
    let rate = per_slice.iter().fold(0.0_f64, |m, (r, _)| m.max(*r));
    let cross = per_slice.iter().any(|(_, c)| *c);
    let max_dt = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    let dt = grid.dt();
    Ok(CflCertificate {
        dt,
        max_dt,
        passes: dt <= max_dt,
        monotone: grid.boundary == Boundary::Clamp && !cross,
    })
}

/// CFL bound for the control-form scheme over `controls`.
pub fn cfl_check(spec: &ProblemSpec, grid: &SpaceTimeGrid, controls: &ControlGrid) -> Result<CflCertificate> {
    cfl_for(spec, grid, controls.values(), true)
}

/// Which equation a backward sweep solves.
#[derive(Clone, Copy, Debug)]
pub enum Form<'a> {
    /// `−∂_t φ + 𝐇φ = 0` maximized over the grid.
    Control(&'a ControlGrid),
    /// `max{−∂_t φ + H_{ε,η} φ, Gφ} = 0`.
    Target {
        controls: ControlSet<'a>,
        eps: f64,
        eta: f64,
    },
}

#[derive(Clone, Debug)]
pub struct HjbSolution {
    pub field: ValueField,
    pub cfl: CflCertificate,
    /// Node updates without an admissible control that took the value pinned by `G`.
    pub pinned_nodes: usize,
    /// Node updates without an admissible control and no pinned value; the
    /// previous value was kept.
    pub frozen_nodes: usize,
    /// Node updates lowered by the `G` cap.
    pub capped_nodes: usize,
}

struct Stencil {
    central: Vec<f64>,
    forward: Vec<f64>,
    backward: Vec<f64>,
    second: DMatrix<f64>,
}

fn shifted(grid: &SpaceTimeGrid, values: &[f64], idx: &[usize], moves: &[(usize, isize)]) -> f64 {
    let mut node = 0;
    for (j, a) in grid.axes.iter().enumerate() {
        let mut i = idx[j] as isize;
        for (axis, step) in moves {
            if *axis == j {
                i += step;
            }
        }
        node += (i.clamp(0, a.nodes as isize - 1) as usize) * grid.stride(j);
    }
    values[node]
}

fn stencil(grid: &SpaceTimeGrid, values: &[f64], node: usize) -> Stencil {
    let d = grid.dim();
    let v = values[node];
    let idx = grid.index(node);
    let mut st = Stencil {
        central: vec![0.0; d],
        forward: vec![0.0; d],
        backward: vec![0.0; d],
        second: DMatrix::zeros(d, d),
    };
    for j in 0..d {
        let h = grid.axes[j].spacing();
        let f = grid.neighbor(values, node, j, true);
        let b = grid.neighbor(values, node, j, false);
        st.forward[j] = (f - v) / h;
        st.backward[j] = (v - b) / h;
        st.central[j] = (f - b) / (2.0 * h);
        st.second[(j, j)] = (f - 2.0 * v + b) / (h * h);
        for l in 0..j {
            let hl = grid.axes[l].spacing();
            let c = |sj: isize, sl: isize| shifted(grid, values, &idx, &[(j, sj), (l, sl)]);
            let m = (c(1, 1) - c(1, -1) - c(-1, 1) + c(-1, -1)) / (4.0 * h * hl);
            st.second[(j, l)] = m;
            st.second[(l, j)] = m;
        }
    }
    st
}

/// `μ·p_upwind + ½ Tr[σσ^⊤ D²V]` for one control.
fn local_terms(spec: &ProblemSpec, t: f64, x: &[f64], u: &ControlValue, st: &Stencil) -> Result<f64> {
    let mu = spec.mu_x(t, x, u)?;
    let s = spec.sigma_x(t, x, u)?;
    let a = &s * s.transpose();
    let drift: f64 = mu
        .iter()
        .enumerate()
        .map(|(j, m)| m * if *m > 0.0 { st.forward[j] } else { st.backward[j] })
        .sum();
    Ok(drift + 0.5 * a.component_mul(&st.second).sum())
}

enum NodeOutcome {
    Updated(f64),
    Pinned(f64),
    Frozen(f64),
}

fn check_grid(spec: &ProblemSpec, grid: &SpaceTimeGrid, len: usize) -> Result<()> {
    grid.validate()?;
    if grid.dim() != spec.dims.d {
        return Err(Error::config("grid dimension differs from the problem"));
    }
    if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::config("grid horizon differs from the problem horizon"));
    }
    if len != grid.n_nodes() {
        return Err(Error::config(format!("field has {len} values, grid has {} nodes", grid.n_nodes())));
    }
    Ok(())
}

/// Backward sweep from `terminal` (nodal values at `t = T`).
pub fn solve_hjb(
    spec: &ProblemSpec,
    terminal: &[f64],
    grid: &SpaceTimeGrid,
    form: Form<'_>,
    g: &GOperator,
) -> Result<HjbSolution> {
    check_grid(spec, grid, terminal.len())?;
    g.validate()?;
    let cfl = match form {
        Form::Control(controls) => cfl_for(spec, grid, controls.values(), true)?,
        Form::Target { controls, .. } => {
            let reps = match controls {
                ControlSet::Grid(cg) => cg.values().to_vec(),
                ControlSet::Spanning(span) => span.base_controls(spec),
            };
            cfl_for(spec, grid, &reps, false)?
        }
    };
    if !cfl.passes {
        return Err(Error::Cfl {
            dt: cfl.dt,
            max_dt: cfl.max_dt,
        });
    }
    let dt = grid.dt();
    let n = grid.n_time;
    let mut slices = vec![Vec::new(); n + 1];
    slices[n] = terminal.to_vec();
    let (mut pinned, mut frozen, mut capped) = (0, 0, 0);
    for k in (0..n).rev() {
        let t = grid.time(k);
        let prev = &slices[k + 1];
        let view = SliceView { grid, values: prev };
        let outcomes: Vec<NodeOutcome> = (0..grid.n_nodes())
            .into_par_iter()
            .map(|node| {
                let x = grid.coords(node);
                let st = stencil(grid, prev, node);
                let v = prev[node];
                match form {
                    Form::Control(controls) => {
                        let mut best = f64::NEG_INFINITY;
                        for u in controls.values() {
                            let h = -nonlocal_i(t, &x, u, &view, spec)? - local_terms(spec, t, &x, u, &st)?;
                            best = best.max(h);
                        }
                        Ok(NodeOutcome::Updated(v - dt * best))
                    }
                    Form::Target { controls, eps, eta } => {
                        let cands = controls.candidates(spec, t, &x, &st.central, &view, eta)?;
                        let mut best = f64::NEG_INFINITY;
                        for u in cands.iter() {
                            if in_n_eps_eta(t, &x, v, &st.central, u, eps, eta, &view, spec)? {
                                let f = spec.mu_y(t, &x, v, u)? - local_terms(spec, t, &x, u, &st)?;
                                best = best.max(f);
                            }
                        }
                        if best == f64::NEG_INFINITY {
                            Ok(match g.pinned_value(spec, &x)? {
                                Some(p) => NodeOutcome::Pinned(p),
                                None => NodeOutcome::Frozen(v),
                            })
                        } else {
                            Ok(NodeOutcome::Updated(v - dt * best))
                        }
                    }
                }
            })
            .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            next.push(match o {
                NodeOutcome::Updated(v) => v,
                NodeOutcome::Pinned(v) => {
                    pinned += 1;
                    v
                }
                NodeOutcome::Frozen(v) => {
                    frozen += 1;
                    v
                }
            });
        }
        capped += g.cap(spec, grid, &mut next)?;
        if let Some(node) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "value field".into(),
                location: format!("t = {t}, x = {:?}", grid.coords(node)),
            });
        }
        slices[k] = next;
    }
    Ok(HjbSolution {
        field: ValueField {
            grid: grid.clone(),
            slices,
        },
        cfl,
        pinned_nodes: pinned,
        frozen_nodes: frozen,
        capped_nodes: capped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalParams {
    /// Relaxation factor in `φ ← φ − ω · residual`.
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TerminalParams {
    fn default() -> Self {
        TerminalParams {
            omega: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// How `δφ` enters the terminal equation.
#[derive(Clone, Copy, Debug)]
pub enum DeltaMode<'a> {
    /// `δ ≡ +∞`: the equation reduces to `max{φ − g, Gφ} = 0`.
    Infinite,
    /// `δ` from the lattice search at every node and iteration.
    Lattice {
        search: DeltaSearch,
        controls: ControlSet<'a>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminalSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed-point solve of `min{max{φ − g, Gφ}, δφ} = 0` at `t = T`, started from `g`.
pub fn solve_terminal(
    spec: &ProblemSpec,
    g: &GOperator,
    grid: &SpaceTimeGrid,
    params: &TerminalParams,
    delta: DeltaMode<'_>,
) -> Result<TerminalSolution> {
    let payoff: Vec<f64> = (0..grid.n_nodes())
        .map(|n| spec.g(&grid.coords(n)))
        .collect::<Result<_>>()?;
    check_grid(spec, grid, payoff.len())?;
    g.validate()?;
    if !(params.omega > 0.0 && params.omega <= 1.0) || !(params.tol > 0.0) {
        return Err(Error::config("terminal solve needs 0 < omega ≤ 1 and tol > 0"));
    }
    let t = spec.horizon;
    let mut phi = payoff.clone();
    for iteration in 0..=params.max_iter {
        let view = SliceView { grid, values: &phi };
        let residual: Vec<f64> = (0..grid.n_nodes())
            .into_par_iter()
            .map(|node| {
                let obstacle = (phi[node] - payoff[node]).max(g.node_value(spec, grid, &phi, node)?);
                let d = match delta {
                    DeltaMode::Infinite => f64::INFINITY,
                    DeltaMode::Lattice { search, controls } => {
                        let x = grid.coords(node);
                        let st = stencil(grid, &phi, node);
                        delta_gap(t, &x, phi[node], &st.central, &view, &search, controls, spec)?.value
                    }
                };
                Ok(obstacle.min(d))
            })
            .collect::<Result<_>>()?;
        let worst = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        if worst <= params.tol {
            return Ok(TerminalSolution {
                values: phi,
                iterations: iteration,
                residual: worst,
            });
        }
        if !worst.is_finite() || iteration == params.max_iter {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual: worst,
                residual_field: residual,
            });
        }
        for (p, r) in phi.iter_mut().zip(&residual) {
            *p -= params.omega * r;
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Affine, Dims, MarkSpace, Payoff, ScalarFn, Var};
    use crate::pde::{Axis, GKind};

    fn spec(processes: usize) -> ProblemSpec {
        let dims = Dims { d: 1, q: 1, n: 0, processes };
        let marks = if processes == 0 { MarkSpace::empty() } else { MarkSpace::single(0.5).unwrap() };
        let mut s = ProblemSpec::zero(dims, marks, 1.0).unwrap();
        s.payoff = Payoff::tanh();
        s
    }

    fn grid(n_time: usize, nodes: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::new(1.0, n_time, vec![Axis { lo: -2.0, hi: 2.0, nodes }], Boundary::Clamp).unwrap()
    }

    fn singleton(s: &ProblemSpec) -> ControlGrid {
        ControlGrid::singleton(s, ControlValue::zero(s.dims, s.marks.len())).unwrap()
    }

    #[test]
    fn frozen_dynamics_keep_the_payoff() {
        let s = spec(1);
        let gr = grid(20, 41);
        let terminal = gr.sample(|x| x[0].tanh());
        let sol = solve_hjb(&s, &terminal, &gr, Form::Control(&singleton(&s)), &GOperator::inactive()).unwrap();
        for slice in &sol.field.slices {
            assert_eq!(slice, &terminal);
        }
    }

    #[test]
    fn constants_are_preserved_with_motion() {
        let mut s = spec(1);
        s.coefficients.mu_x[0] = ScalarFn::Constant(0.3);
        s.coefficients.sigma_x[0][0] = ScalarFn::Constant(0.2);
        s.coefficients.beta[0][0] = ScalarFn::Constant(0.5);
        let gr = grid(100, 41);
        let terminal = vec![0.7; gr.n_nodes()];
        let sol = solve_hjb(&s, &terminal, &gr, Form::Control(&singleton(&s)), &GOperator::inactive()).unwrap();
        assert!(sol.field.slice(0).iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn cfl_examples() {
        let mut s = spec(0);
        let gr = SpaceTimeGrid::new(1.0, 50, vec![Axis { lo: 0.0, hi: 1.0, nodes: 11 }], Boundary::Clamp).unwrap();
        let c = cfl_check(&s, &gr, &singleton(&s)).unwrap();
        assert!(c.passes && c.max_dt.is_infinite());
        s.coefficients.sigma_x[0][0] = ScalarFn::Constant(1.0);
        let c = cfl_check(&s, &gr, &singleton(&s)).unwrap();
        assert!((c.max_dt - 0.01).abs() < 1e-12);
        assert!(!c.passes);
        let coarse = SpaceTimeGrid::new(1.0, 50, vec![Axis { lo: 0.0, hi: 1.0, nodes: 6 }], Boundary::Clamp).unwrap();
        let c2 = cfl_check(&s, &coarse, &singleton(&s)).unwrap();
        assert!((c2.max_dt / c.max_dt - 4.0).abs() < 1e-9);
        let err = solve_hjb(&s, &gr.sample(|_| 0.0), &gr, Form::Control(&singleton(&s)), &GOperator::inactive());
        assert!(matches!(err, Err(Error::Cfl { .. })));
    }

    #[test]
    fn heat_equation_against_closed_form() {
        // V(0, x) = E[X_T²] = x² + σ²T for the driftless diffusion
        let mut s = spec(0);
        s.coefficients.sigma_x[0][0] = ScalarFn::Constant(0.5);
        let gr = SpaceTimeGrid::new(1.0, 200, vec![Axis { lo: -6.0, hi: 6.0, nodes: 121 }], Boundary::LinearExtrapolate)
            .unwrap();
        let terminal = gr.sample(|x| x[0] * x[0]);
        let sol = solve_hjb(&s, &terminal, &gr, Form::Control(&singleton(&s)), &GOperator::inactive()).unwrap();
        assert!((sol.field.at(0, &[0.5]) - (0.25 + 0.25)).abs() < 1e-9);
    }

    #[test]
    fn control_picks_the_minimizing_drift() {
        let mut s = spec(0);
        s.coefficients.mu_x[0] = ScalarFn::Affine(Affine::new(0.0, [(Var::U(0), 1.0)]));
        let cg = ControlGrid::lattice(&s, 3, &[], false, 1.0).unwrap();
        let gr = grid(40, 41);
        let terminal = gr.sample(|x| x[0]);
        let sol = solve_hjb(&s, &terminal, &gr, Form::Control(&cg), &GOperator::inactive()).unwrap();
        // inf E[X_T] = x − T, away from the clamped edge
        assert!((sol.field.at(0, &[1.0]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_examples() {
        let s = spec(0);
        let gr = grid(10, 21);
        let gvals = gr.sample(|x| x[0].tanh());
        let p = TerminalParams::default();
        let sol = solve_terminal(&s, &GOperator::inactive(), &gr, &p, DeltaMode::Infinite).unwrap();
        assert_eq!((sol.values.clone(), sol.iterations), (gvals.clone(), 0));
        let shifted = GOperator::new(GKind::ValueCap { offset: 1.0 });
        assert_eq!(solve_terminal(&s, &shifted, &gr, &p, DeltaMode::Infinite).unwrap().values, gvals);
        let lowered = GOperator::new(GKind::ValueCap { offset: -0.25 });
        let sol = solve_terminal(&s, &lowered, &gr, &p, DeltaMode::Infinite).unwrap();
        for (a, b) in sol.values.iter().zip(&gvals) {
            assert!((a - (b - 0.25)).abs() < 1e-9);
        }
    }

    #[test]
    fn terminal_reports_nonconvergence() {
        let s = spec(0);
        let gr = grid(10, 21);
        let p = TerminalParams {
            omega: 0.5,
            tol: 1e-12,
            max_iter: 3,
        };
        let lowered = GOperator::new(GKind::ValueCap { offset: -0.25 });
        let err = solve_terminal(&s, &lowered, &gr, &p, DeltaMode::Infinite).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, ref residual_field, .. } if residual_field.len() == 21));
    }
}
