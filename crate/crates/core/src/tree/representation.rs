//! Exact martingale representation on a tree.
//!
//! On every branch `b` of a node the increment of a martingale `M` is written
//! as `α·ΔW_b + Σ_{i,e} γ_i(e) (1{b jumps with (i, e)} − m_i(e)Δt)`. Together
//! with the node value this is one linear equation per branch.

use nalgebra::{DMatrix, DVector};

use super::value::TreePolicy;
use super::{ScenarioTree, TreeNode};
use crate::error::{Error, Result};
use crate::model::ProblemSpec;

/// Branch system `[1, ΔW_b, ΔÑ_b] (y, α, γ)^⊤ = v_b` shared by all nodes of a tree.
#[derive(Clone, Debug)]
pub struct StepSystem {
    matrix: DMatrix<f64>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// `(process, mark)` of each jump column.
    columns: Vec<(usize, usize)>,
    d: usize,
    processes: usize,
    marks: usize,
}

impl StepSystem {
    pub fn new(tree: &ScenarioTree, spec: &ProblemSpec) -> Result<Self> {
        let d = spec.dims.d;
        let mut columns = Vec::new();
        for i in 0..spec.marks.processes() {
            for e in 0..spec.marks.len() {
                if spec.marks.weight(i, e) > 0.0 {
                    columns.push((i, e));
                }
            }
        }
        let rows = tree.branches.len();
        let cols = 1 + d + columns.len();
        let mut m = DMatrix::zeros(rows, cols);
        for (r, b) in tree.branches.iter().enumerate() {
            m[(r, 0)] = 1.0;
            for j in 0..d {
                m[(r, 1 + j)] = b.dw[j];
            }
            for (c, &(i, e)) in columns.iter().enumerate() {
                let hit = if b.jumps.contains(&(i, e)) { 1.0 } else { 0.0 };
                m[(r, 1 + d + c)] = hit - spec.marks.weight(i, e) * tree.dt;
            }
        }
        let lu = (rows == cols).then(|| m.clone().lu());
        Ok(StepSystem {
            matrix: m,
            lu,
            columns,
            d,
            processes: spec.marks.processes(),
            marks: spec.marks.len(),
        })
    }

    /// `(y, α, γ)` reproducing `values` on every branch; `γ[e][i]`.
    pub fn solve(&self, values: &[f64], node: usize) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let rhs = DVector::from_column_slice(values);
        let z = match &self.lu {
            Some(lu) => lu.solve(&rhs).ok_or_else(|| Error::Representation {
                node,
                reason: "singular branch system".into(),
            })?,
            None => {
                let svd = self.matrix.clone().svd(true, true);
                let z = svd.solve(&rhs, 1e-14).map_err(|e| Error::Representation {
                    node,
                    reason: e.to_string(),
                })?;
                let resid = (&self.matrix * &z - &rhs).amax();
                let scale = 1.0 + rhs.amax();
                if resid > 1e-10 * scale {
                    return Err(Error::Representation {
                        node,
                        reason: format!(
                            "{} branches cannot be spanned by {} integrands (residual {resid:e}); use complete branching",
                            self.matrix.nrows(),
                            self.matrix.ncols()
                        ),
                    });
                }
                z
            }
        };
        let alpha = (0..self.d).map(|j| z[1 + j]).collect();
        let mut gamma = vec![vec![0.0; self.processes]; self.marks];
        for (c, &(i, e)) in self.columns.iter().enumerate() {
            gamma[e][i] = z[1 + self.d + c];
        }
        Ok((z[0], alpha, gamma))
    }
}

/// `(y₀, α, γ)` along a policy; entries off the policy's subtree are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub y0: f64,
    pub values: Vec<Option<f64>>,
    pub alpha: Vec<Option<Vec<f64>>>,
    /// `gamma[node][e][i]`.
    pub gamma: Vec<Option<Vec<Vec<f64>>>>,
    pub policy: TreePolicy,
}

/// Represents the leaf payoff as a martingale on the subtree chosen by `policy`.
pub fn martingale_representation(
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    payoff: impl Fn(usize, &TreeNode) -> f64,
    policy: &TreePolicy,
) -> Result<Representation> {
    let n = tree.n_nodes();
    let system = StepSystem::new(tree, spec)?;
    let mut rep = Representation {
        y0: f64::NAN,
        values: vec![None; n],
        alpha: vec![None; n],
        gamma: vec![None; n],
        policy: policy.clone(),
    };
    let mut reached = vec![false; n];
    reached[0] = true;
    for id in 0..n {
        if !reached[id] || tree.nodes[id].is_leaf() {
            continue;
        }
        let c = policy.at(id);
        let group = tree.nodes[id]
            .group_of(c)
            .ok_or_else(|| Error::domain(format!("policy control {c} unknown at node {id}")))?;
        for ch in &group.children {
            reached[*ch] = true;
        }
    }
    for id in (0..n).rev() {
        if !reached[id] {
            continue;
        }
        let node = &tree.nodes[id];
        if node.is_leaf() {
            let v = payoff(id, node);
            if !v.is_finite() {
                return Err(Error::Representation {
                    node: id,
                    reason: "payoff is not finite".into(),
                });
            }
            rep.values[id] = Some(v);
            continue;
        }
        let group = node.group_of(policy.at(id)).expect("checked on the forward pass");
        let vals: Vec<f64> = group.children.iter().map(|c| rep.values[*c].expect("child reached")).collect();
        let (y, alpha, gamma) = system.solve(&vals, id)?;
        rep.values[id] = Some(y);
        rep.alpha[id] = Some(alpha);
        rep.gamma[id] = Some(gamma);
    }
    rep.y0 = rep.values[0].expect("root reached");
    Ok(rep)
}

/// Forward pass `Y ← Y + α·ΔW + Σ γ ΔÑ` from `y₀`; returns `(leaf, Y)` pairs.
pub fn reconstruct(tree: &ScenarioTree, spec: &ProblemSpec, rep: &Representation) -> Vec<(usize, f64)> {
    let n = tree.n_nodes();
    let mut y = vec![f64::NAN; n];
    y[0] = rep.y0;
    let mut out = Vec::new();
    for id in 0..n {
        let node = &tree.nodes[id];
        if y[id].is_nan() {
            continue;
        }
        if node.is_leaf() {
            out.push((id, y[id]));
            continue;
        }
        let (Some(alpha), Some(gamma)) = (&rep.alpha[id], &rep.gamma[id]) else {
            continue;
        };
        let group = node.group_of(rep.policy.at(id)).expect("representation follows the tree");
        let compensator: f64 = (0..spec.marks.len())
            .flat_map(|e| (0..spec.marks.processes()).map(move |i| (i, e)))
            .map(|(i, e)| gamma[e][i] * spec.marks.weight(i, e) * tree.dt)
            .sum();
        for (ch, b) in group.children.iter().zip(&tree.branches) {
            let mut inc: f64 = alpha.iter().zip(&b.dw).map(|(a, w)| a * w).sum();
            for &(i, e) in &b.jumps {
                inc += gamma[e][i];
            }
            y[*ch] = y[id] + inc - compensator;
        }
    }
    out
}

/// Largest `|Y_leaf − payoff|` after [`reconstruct`].
pub fn representation_error(
    tree: &ScenarioTree,
    spec: &ProblemSpec,
    rep: &Representation,
    payoff: impl Fn(usize, &TreeNode) -> f64,
) -> f64 {
    reconstruct(tree, spec, rep)
        .into_iter()
        .map(|(id, y)| (y - payoff(id, &tree.nodes[id])).abs())
        .fold(0.0, f64::max)
}
