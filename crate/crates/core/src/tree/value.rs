//! Backward recursions: the almost-sure target requirement and expectations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::representation::StepSystem;
use super::ScenarioTree;
use crate::error::{Error, Result};
use crate::model::{ControlValue, ProblemSpec};
use crate::operators::ControlSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetOptions {
    /// Search box `[−y_max, y_max]` for dynamics that are not affine in `y`.
    pub y_max: f64,
    /// Relative bisection tolerance.
    pub tol: f64,
}

impl Default for TargetOptions {
    fn default() -> Self {
        TargetOptions { y_max: 1e6, tol: 1e-12 }
    }
}

/// Minimal `y` at every node from which some control meets the children's
/// requirements on every branch; `+∞` where none does.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityProfile {
    pub values: Vec<f64>,
    /// First minimizing control per interior node.
    pub witness: Vec<Option<ControlValue>>,
    /// Nodes whose minimal `y` came from bisection.
    pub bisected: usize,
}

impl FeasibilityProfile {
    pub fn root(&self) -> f64 {
        self.values[0]
    }
}

/// Smallest `y` with `succ(y)_b ≥ req_b` for all branches, when `succ` is
/// affine in `y`.
fn min_y_affine(a: &[f64], c: &[f64], req: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((a, c), r) in a.iter().zip(c).zip(req) {
        if *r == f64::NEG_INFINITY {
            continue;
        }
        if *c > 0.0 {
            lo = lo.max((r - a) / c);
        } else if *c < 0.0 {
            hi = hi.min((r - a) / c);
        } else if a < r {
            return f64::INFINITY;
        }
    }
    if lo > hi {
        f64::INFINITY
    } else {
        lo
    }
}

fn meets(succ: &[f64], req: &[f64]) -> bool {
    succ.iter().zip(req).all(|(s, r)| s >= r)
}

/// Minimal feasible `y` under control `u`; the `bool` flags bisection.
fn min_y(
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    node: usize,
    u: &ControlValue,
    req: &[f64],
    affine: bool,
    opts: &TargetOptions,
) -> Result<(f64, bool)> {
    if req.iter().any(|r| *r == f64::INFINITY) {
        return Ok((f64::INFINITY, false));
    }
    if affine {
        let a = tree.y_successors(spec, node, u, 0.0)?;
        let one = tree.y_successors(spec, node, u, 1.0)?;
        let c: Vec<f64> = one.iter().zip(&a).map(|(o, z)| o - z).collect();
        return Ok((min_y_affine(&a, &c, req), false));
    }
    let ok = |y: f64| -> Result<bool> { Ok(meets(&tree.y_successors(spec, node, u, y)?, req)) };
    let (mut lo, mut hi) = (-opts.y_max, opts.y_max);
    if !ok(hi)? {
        return Ok((f64::INFINITY, true));
    }
    if ok(lo)? {
        return Ok((lo, true));
    }
    while hi - lo > opts.tol * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, true))
}

/// Backward recursion for `inf {y : Y(T) ≥ g(X(T)) on every leaf}`.
///
/// With a span, each control group first solves the martingale
/// representation of the children's requirements and then uses the resulting
/// integrands as an ordinary control.
pub fn tree_target_value(
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    g: impl Fn(&[f64]) -> f64 + Sync,
    controls: ControlSet<'_>,
    opts: &TargetOptions,
) -> Result<FeasibilityProfile> {
    let n = tree.n_nodes();
    match controls {
        ControlSet::Grid(cg) if cg.values() != tree.controls.as_slice() => {
            return Err(Error::domain("control grid differs from the one the tree was built with"));
        }
        ControlSet::Spanning(s) if s.len() != tree.controls.len() => {
            return Err(Error::domain("span differs from the one the tree was built with"));
        }
        _ => {}
    }
    let affine = spec.coefficients.affine_in_y();
    let system = match controls {
        ControlSet::Spanning(_) => Some(StepSystem::new(tree, spec)?),
        ControlSet::Grid(_) => None,
    };
    let mut values = vec![f64::NAN; n];
    let mut witness = vec![None; n];
    let mut bisected = 0;
    for id in tree.leaves() {
        values[id] = g(&tree.nodes[id].x);
    }
    for k in (0..tree.depth).rev() {
        let layer = tree.layer(k);
        let results: Vec<(f64, Option<ControlValue>, usize)> = layer
            .clone()
            .into_par_iter()
            .map(|id| {
                let node = &tree.nodes[id];
                let mut best = (f64::INFINITY, None, 0);
                for group in &node.groups {
                    let req: Vec<f64> = group.children.iter().map(|c| values[*c]).collect();
                    let candidates: Vec<ControlValue> = match (&system, controls) {
                        (Some(sys), ControlSet::Spanning(span)) => {
                            if req.iter().any(|r| !r.is_finite()) {
                                vec![]
                            } else {
                                let (_, alpha, gamma) = sys.solve(&req, id)?;
                                let mut u1 = span.nu(group.controls[0]).to_vec();
                                u1.extend(alpha);
                                vec![ControlValue::new(u1, gamma)]
                            }
                        }
                        _ => group.controls.iter().map(|c| tree.controls[*c].clone()).collect(),
                    };
                    if candidates.is_empty() {
                        let v = if req.contains(&f64::INFINITY) { f64::INFINITY } else { f64::NEG_INFINITY };
                        if v < best.0 {
                            best = (v, None, best.2);
                        }
                        continue;
                    }
                    for u in candidates {
                        let (y, bis) = min_y(tree, spec, id, &u, &req, affine, opts)?;
                        best.2 += usize::from(bis);
                        if y < best.0 {
                            best = (y, Some(u), best.2);
                        }
                    }
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        for (id, (v, w, b)) in layer.zip(results) {
            values[id] = v;
            witness[id] = w;
            bisected += usize::from(b > 0);
        }
    }
    Ok(FeasibilityProfile {
        values,
        witness,
        bisected,
    })
}

/// Control choice on the tree, by index into [`ScenarioTree::controls`].
#[derive(Clone, Debug, PartialEq)]
pub enum TreePolicy {
    Constant(usize),
    PerNode(Vec<usize>),
}

impl TreePolicy {
    pub fn at(&self, node: usize) -> usize {
        match self {
            TreePolicy::Constant(c) => *c,
            TreePolicy::PerNode(v) => v[node],
        }
    }
}

/// `E[g(X_T) | node]` at every node under `policy`.
pub fn tree_expectation_values(tree: &ScenarioTree, g: impl Fn(&[f64]) -> f64, policy: &TreePolicy) -> Result<Vec<f64>> {
    let mut values = vec![0.0; tree.n_nodes()];
    for id in (0..tree.n_nodes()).rev() {
        let node = &tree.nodes[id];
        values[id] = if node.is_leaf() {
            g(&node.x)
        } else {
            let c = policy.at(id);
            let group = node
                .group_of(c)
                .ok_or_else(|| Error::domain(format!("policy control {c} unknown at node {id}")))?;
            group
                .children
                .iter()
                .zip(&tree.branches)
                .map(|(ch, b)| b.prob * values[*ch])
                .sum()
        };
    }
    Ok(values)
}

pub fn tree_expectation(tree: &ScenarioTree, g: impl Fn(&[f64]) -> f64, policy: &TreePolicy) -> Result<f64> {
    Ok(tree_expectation_values(tree, g, policy)?[0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpSolution {
    pub values: Vec<f64>,
    /// First control of the first minimizing group at every interior node.
    pub policy: TreePolicy,
}

impl DpSolution {
    pub fn root(&self) -> f64 {
        self.values[0]
    }
}

/// `min E[g(X_T)]` by nodewise dynamic programming.
pub fn tree_expectation_min(tree: &ScenarioTree, g: impl Fn(&[f64]) -> f64) -> DpSolution {
    let mut values = vec![0.0; tree.n_nodes()];
    let mut policy = vec![0; tree.n_nodes()];
    for id in (0..tree.n_nodes()).rev() {
        let node = &tree.nodes[id];
        if node.is_leaf() {
            values[id] = g(&node.x);
            continue;
        }
        let mut best = f64::INFINITY;
        for group in &node.groups {
            let v: f64 = group
                .children
                .iter()
                .zip(&tree.branches)
                .map(|(ch, b)| b.prob * values[*ch])
                .sum();
            if v < best || best == f64::INFINITY {
                best = v;
                policy[id] = group.controls[0];
            }
        }
        values[id] = best;
    }
    DpSolution {
        values,
        policy: TreePolicy::PerNode(policy),
    }
}
