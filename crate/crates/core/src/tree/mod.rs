//! Finite scenario trees: exact backward recursions with no sampling.
//!
//! Every node carries the state `(t_k, x)`. Because the control may move
//! `X`, children hang off *control groups*: controls whose `X` successors
//! agree bit for bit on every branch share one set of children.

mod branch;
mod representation;
mod value;

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use branch::{branches, simplex_vertices, Branch, BranchScheme};
pub use representation::{martingale_representation, reconstruct, representation_error, Representation, StepSystem};
pub use value::{
    tree_expectation, tree_expectation_min, tree_expectation_values, tree_target_value, DpSolution,
    FeasibilityProfile, TargetOptions, TreePolicy,
};

use crate::error::{Error, Result};
use crate::model::{ControlValue, ProblemSpec};
use crate::operators::ControlSet;
use crate::sde::euler_step;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeOptions {
    #[serde(default)]
    pub scheme: BranchScheme,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
}

fn default_budget() -> usize {
    2_000_000
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            scheme: BranchScheme::Product,
            node_budget: default_budget(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlGroup {
    /// Indices into [`ScenarioTree::controls`].
    pub controls: Vec<usize>,
    /// One child per branch.
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub step: usize,
    pub time: f64,
    pub x: Vec<f64>,
    pub groups: Vec<ControlGroup>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, control: usize) -> Option<&ControlGroup> {
        self.groups.iter().find(|g| g.controls.contains(&control))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTree {
    pub depth: usize,
    pub dt: f64,
    pub scheme: BranchScheme,
    pub branches: Vec<Branch>,
    /// Controls the tree was built with. For a span these are the base
    /// controls with zero integrands.
    pub controls: Vec<ControlValue>,
    pub nodes: Vec<TreeNode>,
    layers: Vec<usize>,
}

impl ScenarioTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids at step `k`.
    pub fn layer(&self, k: usize) -> Range<usize> {
        self.layers[k]..self.layers[k + 1]
    }

    pub fn leaves(&self) -> Range<usize> {
        self.layer(self.depth)
    }

    /// `Y` on every branch of `group` after one step from `(node, y)` under `u`.
    pub fn y_successors(&self, spec: &ProblemSpec, node: usize, u: &ControlValue, y: f64) -> Result<Vec<f64>> {
        let n = &self.nodes[node];
        self.branches
            .iter()
            .map(|b| Ok(euler_step(spec, n.time, self.dt, &n.x, Some(y), u, &b.dw, &b.jumps)?.1))
            .collect()
    }
}

/// Builds the tree of depth `depth` on `[t, T]` rooted at `x`.
pub fn build_tree(
    spec: &ProblemSpec,
    t: f64,
    x: &[f64],
    depth: usize,
    controls: ControlSet<'_>,
    options: &TreeOptions,
) -> Result<ScenarioTree> {
    if depth == 0 {
        return Err(Error::domain("tree depth must be at least 1"));
    }
    if !(0.0 <= t && t < spec.horizon) || x.len() != spec.dims.d {
        return Err(Error::domain("tree root outside [0, T) × ℝ^d"));
    }
    let controls: Vec<ControlValue> = match controls {
        ControlSet::Grid(g) => g.values().to_vec(),
        ControlSet::Spanning(s) => s.base_controls(spec),
    };
    let dt = (spec.horizon - t) / depth as f64;
    let branches = branches(options.scheme, spec.dims.d, &spec.marks, dt)?;
    let mut nodes = vec![TreeNode {
        step: 0,
        time: t,
        x: x.to_vec(),
        groups: Vec::new(),
    }];
    let mut layers = vec![0, 1];
    for k in 0..depth {
        let time = if k + 1 == depth { spec.horizon } else { t + (k + 1) as f64 * dt };
        let range = layers[k]..layers[k + 1];
        let grouped: Vec<Vec<(Vec<usize>, Vec<Vec<f64>>)>> = range
            .clone()
            .into_par_iter()
            .map(|id| {
                let node = &nodes[id];
                let mut groups: Vec<(Vec<usize>, Vec<Vec<f64>>)> = Vec::new();
                let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
                for (c, u) in controls.iter().enumerate() {
                    let succ: Vec<Vec<f64>> = branches
                        .iter()
                        .map(|b| Ok(euler_step(spec, node.time, dt, &node.x, None, u, &b.dw, &b.jumps)?.0))
                        .collect::<Result<_>>()?;
                    let key: Vec<u64> = succ.iter().flatten().map(|v| v.to_bits()).collect();
                    match index.get(&key) {
                        Some(&gi) => groups[gi].0.push(c),
                        None => {
                            index.insert(key, groups.len());
                            groups.push((vec![c], succ));
                        }
                    }
                }
                Ok(groups)
            })
            .collect::<Result<_>>()?;
        let next: usize = grouped.iter().map(|g| g.len() * branches.len()).sum();
        if nodes.len() + next > options.node_budget {
            let ratio = next as f64 / range.len() as f64;
            let mut estimate = nodes.len() as f64;
            let mut layer = next as f64;
            for _ in k..depth {
                estimate += layer;
                layer *= ratio;
            }
            return Err(Error::NodeBudget {
                estimate: estimate.min(u128::MAX as f64) as u128,
                budget: options.node_budget,
            });
        }
        for (id, groups) in range.zip(grouped) {
            for (members, succ) in groups {
                let first = nodes.len();
                for xs in succ {
                    nodes.push(TreeNode {
                        step: k + 1,
                        time,
                        x: xs,
                        groups: Vec::new(),
                    });
                }
                nodes[id].groups.push(ControlGroup {
                    controls: members,
                    children: (first..first + branches.len()).collect(),
                });
            }
        }
        layers.push(nodes.len());
    }
    Ok(ScenarioTree {
        depth,
        dt,
        scheme: options.scheme,
        branches,
        controls,
        nodes,
        layers,
    })
}
