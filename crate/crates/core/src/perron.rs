//! Stochastic super- and sub-solutions checked on a scenario tree.
//!
//! On a finite tree every stopping time is a set of nodes, so the pathwise
//! conditions reduce to one-step conditions at every node:
//!
//! * super-solution: from any `y ≥ w(node)` some control keeps `Y ≥ w` on
//!   every branch;
//! * sub-solution: from any `y < w(node)` and under every control, at least
//!   one branch has `Y < w`. All branch probabilities are positive, so one
//!   branch gives positive conditional probability.
//!
//! When every `Y` successor is affine and nondecreasing in `y`, checking the
//! boundary `y = w(node)` settles all `y` on the relevant side. Otherwise a
//! ladder of `y` values is checked and the node is counted as laddered.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, ControlGrid, ControlValue, ProblemSpec, Var};
use crate::tree::{FeasibilityProfile, ScenarioTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalSide {
    AboveG,
    BelowG,
}

pub type CandidateFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CandidateFunction {
    pub name: String,
    eval: Arc<CandidateFn>,
    /// `(C, n)` with `|w(t, x)| ≤ C (1 + |x|^n)`.
    pub growth: (f64, u32),
    pub side: TerminalSide,
}

impl fmt::Debug for CandidateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateFunction")
            .field("name", &self.name)
            .field("growth", &self.growth)
            .field("side", &self.side)
            .finish_non_exhaustive()
    }
}

impl CandidateFunction {
    pub fn new(
        name: impl Into<String>,
        side: TerminalSide,
        growth: (f64, u32),
        eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CandidateFunction {
            name: name.into(),
            eval: Arc::new(eval),
            growth,
            side,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.eval)(t, x)
    }

    /// `w + c`, with the growth constant widened accordingly.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        CandidateFunction {
            name: format!("{}{:+}", self.name, c),
            eval: Arc::new(move |t, x| inner(t, x) + c),
            growth: (self.growth.0 + c.abs(), self.growth.1),
            side: self.side,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderOptions {
    /// Number of `y` levels beyond the boundary value.
    pub levels: usize,
    /// The ladder covers `[w, w + span]` (super) or `[w − span, w)` (sub).
    pub span: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions { levels: 8, span: 1.0 }
    }
}

/// Concrete reason a candidate fails.
#[derive(Clone, Debug, PartialEq)]
pub enum Refutation {
    /// Terminal condition fails at a leaf.
    Terminal { leaf: usize, w: f64, g: f64 },
    /// Declared growth bound fails at a node.
    Growth { node: usize, w: f64, bound: f64 },
    /// No control keeps `Y ≥ w` from `y` at this node.
    NotMaintained { node: usize, y: f64 },
    /// Under `control`, `Y ≥ w` on every branch from `y < w(node)`.
    NoEscape { node: usize, control: usize, y: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    Certified {
        /// Super-solutions: a maintaining control per interior node, by index
        /// into the tree's controls.
        maintaining: Option<Vec<Option<usize>>>,
        checked_nodes: usize,
        ladder_nodes: usize,
    },
    Refuted {
        witness: Refutation,
        checked_nodes: usize,
    },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }

    pub fn witness(&self) -> Option<&Refutation> {
        match self {
            Certificate::Refuted { witness, .. } => Some(witness),
            Certificate::Certified { .. } => None,
        }
    }
}

fn growth_and_terminal(w: &CandidateFunction, tree: &ScenarioTree, spec: &ProblemSpec) -> Result<Option<Refutation>> {
    let (c, n) = w.growth;
    for (id, node) in tree.nodes.iter().enumerate() {
        let v = w.eval(node.time, &node.x);
        let bound = c * (1.0 + norm(&node.x).powi(n as i32));
        if !(v.abs() <= bound) {
            return Ok(Some(Refutation::Growth { node: id, w: v, bound }));
        }
    }
    for leaf in tree.leaves() {
        let node = &tree.nodes[leaf];
        let (v, g) = (w.eval(node.time, &node.x), spec.g(&node.x)?);
        let ok = match w.side {
            TerminalSide::AboveG => v >= g,
            TerminalSide::BelowG => v <= g,
        };
        if !ok {
            return Ok(Some(Refutation::Terminal { leaf, w: v, g }));
        }
    }
    Ok(None)
}

/// Successor slopes in `y` when all are nonnegative and the dynamics are affine.
fn monotone_slopes(tree: &ScenarioTree, spec: &ProblemSpec, node: usize, u: &ControlValue, y: f64) -> Result<Option<Vec<f64>>> {
    if !spec.coefficients.affine_in_y() {
        return Ok(None);
    }
    let a = tree.y_successors(spec, node, u, y)?;
    let b = tree.y_successors(spec, node, u, y + 1.0)?;
    let c: Vec<f64> = b.iter().zip(&a).map(|(p, q)| p - q).collect();
    Ok(c.iter().all(|v| *v >= 0.0).then_some(c))
}

fn children_w(w: &CandidateFunction, tree: &ScenarioTree, children: &[usize]) -> Vec<f64> {
    children
        .iter()
        .map(|c| {
            let n = &tree.nodes[*c];
            w.eval(n.time, &n.x)
        })
        .collect()
}

/// Escape from just below `w` when `Y` is affine and nondecreasing in `y`:
/// a branch with positive slope and `Y(w) ≤ w_child`, or any `Y(w) < w_child`.
fn escapes_below_boundary(at: &[f64], slopes: &[f64], targets: &[f64]) -> bool {
    at.iter()
        .zip(slopes)
        .zip(targets)
        .any(|((s, k), t)| (*k > 0.0 && s <= t) || s < t)
}

fn maintains(tree: &ScenarioTree, spec: &ProblemSpec, node: usize, c: usize, y: f64, w: &CandidateFunction) -> Result<bool> {
    let group = tree.nodes[node].group_of(c).expect("every control has a group");
    let succ = tree.y_successors(spec, node, &tree.controls[c], y)?;
    Ok(succ.iter().zip(children_w(w, tree, &group.children)).all(|(s, t)| *s >= t))
}

fn escapes(tree: &ScenarioTree, spec: &ProblemSpec, node: usize, c: usize, y: f64, w: &CandidateFunction) -> Result<bool> {
    let group = tree.nodes[node].group_of(c).expect("every control has a group");
    let succ = tree.y_successors(spec, node, &tree.controls[c], y)?;
    Ok(succ.iter().zip(children_w(w, tree, &group.children)).any(|(s, t)| *s < t))
}

/// Super-solution check; controls are those the tree was built with.
pub fn certify_supersolution(
    w: &CandidateFunction,
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    ladder: &LadderOptions,
) -> Result<Certificate> {
    if w.side != TerminalSide::AboveG {
        return Err(Error::config(format!("{} is not declared above g", w.name)));
    }
    if let Some(witness) = growth_and_terminal(w, tree, spec)? {
        return Ok(Certificate::Refuted { witness, checked_nodes: 0 });
    }
    let mut maintaining = vec![None; tree.n_nodes()];
    let mut ladder_nodes = 0;
    let mut checked = 0;
    for (id, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        checked += 1;
        let wy = w.eval(node.time, &node.x);
        let all_monotone = (0..tree.controls.len())
            .map(|c| monotone_slopes(tree, spec, id, &tree.controls[c], wy).map(|s| s.is_some()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|m| m);
        let mut levels = vec![wy];
        if !all_monotone {
            ladder_nodes += 1;
            levels.extend((1..=ladder.levels).map(|j| wy + ladder.span * j as f64 / ladder.levels as f64));
        }
        for y in levels {
            let mut found = None;
            for c in 0..tree.controls.len() {
                if maintains(tree, spec, id, c, y, w)? {
                    found = Some(c);
                    break;
                }
            }
            match found {
                Some(c) if y == wy => maintaining[id] = Some(c),
                Some(_) => {}
                None => {
                    return Ok(Certificate::Refuted {
                        witness: Refutation::NotMaintained { node: id, y },
                        checked_nodes: checked,
                    })
                }
            }
        }
    }
    Ok(Certificate::Certified {
        maintaining: Some(maintaining),
        checked_nodes: checked,
        ladder_nodes,
    })
}

/// Sub-solution check over every control of the tree.
pub fn certify_subsolution(
    w: &CandidateFunction,
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    ladder: &LadderOptions,
) -> Result<Certificate> {
    if w.side != TerminalSide::BelowG {
        return Err(Error::config(format!("{} is not declared below g", w.name)));
    }
    if let Some(witness) = growth_and_terminal(w, tree, spec)? {
        return Ok(Certificate::Refuted { witness, checked_nodes: 0 });
    }
    let mut ladder_nodes = 0;
    let mut checked = 0;
    for (id, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        checked += 1;
        let wy = w.eval(node.time, &node.x);
        let mut laddered = false;
        for c in 0..tree.controls.len() {
            let group = node.group_of(c).expect("every control has a group");
            let targets = children_w(w, tree, &group.children);
            if let Some(slopes) = monotone_slopes(tree, spec, id, &tree.controls[c], wy)? {
                let at = tree.y_successors(spec, id, &tree.controls[c], wy)?;
                if !escapes_below_boundary(&at, &slopes, &targets) {
                    return Ok(Certificate::Refuted {
                        witness: Refutation::NoEscape { node: id, control: c, y: wy },
                        checked_nodes: checked,
                    });
                }
            } else {
                laddered = true;
                for j in 1..=ladder.levels {
                    let y = wy - ladder.span * j as f64 / ladder.levels as f64;
                    if !escapes(tree, spec, id, c, y, w)? {
                        return Ok(Certificate::Refuted {
                            witness: Refutation::NoEscape { node: id, control: c, y },
                            checked_nodes: checked,
                        });
                    }
                }
            }
        }
        ladder_nodes += usize::from(laddered);
    }
    Ok(Certificate::Certified {
        maintaining: None,
        checked_nodes: checked,
        ladder_nodes,
    })
}

impl Refutation {
    /// Re-evaluates the failing inequality; true when it still fails.
    pub fn replay(&self, w: &CandidateFunction, tree: &ScenarioTree, spec: &ProblemSpec) -> Result<bool> {
        Ok(match *self {
            Refutation::Terminal { leaf, .. } => {
                let n = &tree.nodes[leaf];
                let (v, g) = (w.eval(n.time, &n.x), spec.g(&n.x)?);
                match w.side {
                    TerminalSide::AboveG => v < g,
                    TerminalSide::BelowG => v > g,
                }
            }
            Refutation::Growth { node, bound, .. } => {
                let n = &tree.nodes[node];
                !(w.eval(n.time, &n.x).abs() <= bound)
            }
            Refutation::NotMaintained { node, y } => {
                let mut any = false;
                for c in 0..tree.controls.len() {
                    any |= maintains(tree, spec, node, c, y, w)?;
                }
                !any
            }
            Refutation::NoEscape { node, control, y } => {
                let n = &tree.nodes[node];
                let group = n.group_of(control).expect("witness names a tree control");
                let u = &tree.controls[control];
                let targets = children_w(w, tree, &group.children);
                let at = tree.y_successors(spec, node, u, y)?;
                match monotone_slopes(tree, spec, node, u, y)? {
                    Some(slopes) if y == w.eval(n.time, &n.x) => !escapes_below_boundary(&at, &slopes, &targets),
                    _ => !escapes(tree, spec, node, control, y, w)?,
                }
            }
        })
    }
}

/// True when `maintaining` keeps `Y ≥ w` at every interior node from `y = w(node)`.
pub fn replay_maintaining(
    w: &CandidateFunction,
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    maintaining: &[Option<usize>],
) -> Result<bool> {
    for (id, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let Some(c) = maintaining[id] else { return Ok(false) };
        if !maintains(tree, spec, id, c, w.eval(node.time, &node.x), w)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Parameters of the explicit candidates `e^{−ct}(γ − e^{kt})` (super) and
/// `e^{−ct}(e^{kt} − γ)` (sub).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Builtin {
    pub k: f64,
    pub gamma: f64,
    /// Exponential shift `c`; zero for the plain forms.
    pub c: f64,
    pub side: TerminalSide,
    pub horizon: f64,
}

impl Builtin {
    pub fn candidate(&self) -> CandidateFunction {
        let Builtin { k, gamma, c, side, .. } = *self;
        let sign = match side {
            TerminalSide::AboveG => 1.0,
            TerminalSide::BelowG => -1.0,
        };
        let name = match (side, c == 0.0) {
            (TerminalSide::AboveG, true) => "builtin-super",
            (TerminalSide::AboveG, false) => "builtin-super-exp",
            (TerminalSide::BelowG, true) => "builtin-sub",
            (TerminalSide::BelowG, false) => "builtin-sub-exp",
        };
        let bound = gamma.abs() + (k * self.horizon).exp();
        CandidateFunction::new(name, side, (bound, 0), move |t, _| {
            (-c * t).exp() * sign * (gamma - (k * t).exp())
        })
    }

    /// Same `k` and `c` with `γ` moved so that the terminal value is `−‖g‖ − 1`.
    pub fn corrupted(&self, spec: &ProblemSpec) -> Result<Builtin> {
        let gb = g_bound(spec)?;
        let t = spec.horizon;
        let target = -gb - 1.0;
        let gamma = match self.side {
            TerminalSide::AboveG => target * (self.c * t).exp() + (self.k * t).exp(),
            TerminalSide::BelowG => (self.k * t).exp() - target * (self.c * t).exp(),
        };
        Ok(Builtin { gamma, ..*self })
    }
}

/// Shift `c` of the exponential change of variables: `L`, or with an Euler
/// step `Δt` the value `−ln(1 − LΔt)/Δt ≥ L`, so that the one-step factor
/// `1 − LΔt` of a contracting drift is dominated by `e^{−cΔt}`.
fn exp_shift_for(l: f64, step: Option<f64>) -> Result<f64> {
    match step {
        None => Ok(l),
        Some(dt) if l * dt < 1.0 => Ok(l.max(-(-l * dt).ln_1p() / dt)),
        Some(dt) => Err(Error::config(format!("step {dt} too coarse for L = {l}: need LΔt < 1"))),
    }
}

fn g_bound(spec: &ProblemSpec) -> Result<f64> {
    spec.g_bound
        .ok_or_else(|| Error::config("a bound ‖g‖∞ is required (set payoff bound)"))
}

/// First grid control with `σ_Y = 0` and `b = 0` at every sampled point of
/// the domain box.
pub fn neutral_control(spec: &ProblemSpec, grid: &ControlGrid) -> Result<Option<usize>> {
    let d = spec.dims.d;
    let mut xs: Vec<Vec<f64>> = vec![Vec::new()];
    for iv in &spec.domain.x {
        let axis = iv.lattice(3);
        xs = xs
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    let ys = spec.domain.y.lattice(3);
    let ts = [0.0, 0.5 * spec.horizon, spec.horizon];
    'controls: for (k, u) in grid.values().iter().enumerate() {
        for t in ts {
            for x in &xs {
                debug_assert_eq!(x.len(), d);
                for &y in &ys {
                    if spec.sigma_y(t, x, y, u)?.iter().any(|v| *v != 0.0) {
                        continue 'controls;
                    }
                    for i in 0..spec.dims.processes {
                        for e in 0..spec.marks.len() {
                            if spec.b(i, t, x, y, u, e)? != 0.0 {
                                continue 'controls;
                            }
                        }
                    }
                }
            }
        }
        return Ok(Some(k));
    }
    Ok(None)
}

/// True when `μ_Y + ∫ b dm` is nondecreasing in `y` by construction.
fn y_drift_nondecreasing(spec: &ProblemSpec) -> bool {
    let c = &spec.coefficients;
    let jumps = c.compensated_jumps || c.b.iter().all(|b| b.nondecreasing_in(Var::Y));
    c.mu_y.nondecreasing_in(Var::Y) && jumps && c.exp_shift() >= 0.0
}

/// Explicit super-solution `γ − e^{kt}` with `k = 2L`, `γ = ‖g‖∞ + e^{kT}`.
///
/// The plain form needs `μ_Y + ∫ b dm` nondecreasing in `y`. Otherwise the
/// same construction runs on `Ỹ = e^{cs} Y`, whose drift is nondecreasing
/// for `c ≥ L`, with `L̃ = max(c + L, L e^{cT})`, `k = 2L̃`,
/// `γ = e^{cT}‖g‖∞ + e^{kT}`, and is mapped back as `e^{−ct}(γ − e^{kt})`.
/// `step` is the Euler step of the tree the candidate will be checked on.
pub fn builtin_supersolution(spec: &ProblemSpec, grid: &ControlGrid, step: Option<f64>) -> Result<Builtin> {
    let gb = g_bound(spec)?;
    neutral_control(spec, grid)?
        .ok_or_else(|| Error::config("the control grid has no neutral control (σ_Y = 0, b = 0)"))?;
    let l = spec.lipschitz;
    let t = spec.horizon;
    let side = TerminalSide::AboveG;
    if y_drift_nondecreasing(spec) {
        let k = 2.0 * l;
        return Ok(Builtin {
            k,
            gamma: gb + (k * t).exp(),
            c: 0.0,
            side,
            horizon: t,
        });
    }
    let c = exp_shift_for(l, step)?;
    let k = 2.0 * (c + l).max(l * (c * t).exp());
    Ok(Builtin {
        k,
        gamma: (c * t).exp() * gb + (k * t).exp(),
        c,
        side,
        horizon: t,
    })
}

/// Explicit sub-solution `e^{kt} − γ` with `k = 2C`, `γ = ‖g‖∞ + e^{kT} + 1`.
///
/// When `μ_Y + ∫ b dm` is not nondecreasing in `y`, the construction runs on
/// `Ỹ = e^{cs} Y` with growth constant `C̃ = c + C e^{cT}`, `k = 2C̃`,
/// `γ = e^{cT}(‖g‖∞ + 1) + e^{kT}`, mapped back as `e^{−ct}(e^{kt} − γ)`.
pub fn builtin_subsolution(spec: &ProblemSpec, step: Option<f64>) -> Result<Builtin> {
    let gb = g_bound(spec)?;
    let growth = spec
        .growth
        .ok_or_else(|| Error::config("growth constant C is required for the sub-solution"))?;
    let t = spec.horizon;
    let side = TerminalSide::BelowG;
    if y_drift_nondecreasing(spec) {
        let k = 2.0 * growth;
        return Ok(Builtin {
            k,
            gamma: gb + (k * t).exp() + 1.0,
            c: 0.0,
            side,
            horizon: t,
        });
    }
    let c = exp_shift_for(spec.lipschitz, step)?;
    let k = 2.0 * (c + growth * (c * t).exp());
    Ok(Builtin {
        k,
        gamma: (c * t).exp() * (gb + 1.0) + (k * t).exp(),
        c,
        side,
        horizon: t,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichViolation {
    pub node: usize,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub checked_nodes: usize,
    pub violations: Vec<SandwichViolation>,
}

/// Checks `max subs ≤ profile ≤ min supers` at every node.
pub fn sandwich_check(
    subs: &[CandidateFunction],
    supers: &[CandidateFunction],
    tree: &ScenarioTree,
    profile: &FeasibilityProfile,
) -> SandwichReport {
    let mut violations = Vec::new();
    for (id, node) in tree.nodes.iter().enumerate() {
        let lower = subs
            .iter()
            .map(|w| w.eval(node.time, &node.x))
            .fold(f64::NEG_INFINITY, f64::max);
        let upper = supers
            .iter()
            .map(|w| w.eval(node.time, &node.x))
            .fold(f64::INFINITY, f64::min);
        let value = profile.values[id];
        if !(lower <= value && value <= upper) {
            violations.push(SandwichViolation { node: id, lower, value, upper });
        }
    }
    SandwichReport {
        checked_nodes: tree.n_nodes(),
        violations,
    }
}

#[cfg(test)]
mod tests;
