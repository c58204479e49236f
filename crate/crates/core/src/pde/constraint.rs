//! Built-in constraint operators `G`.
//!
//! The abstract requirement on `G` is that `H < ∞ ⇒ G ≤ 0` and
//! `G < 0 ⇒ H < ∞`. Nothing here checks these; a configuration asserts them
//! through the two flags, which are echoed in run manifests.

use serde::{Deserialize, Serialize};

use super::grid::SpaceTimeGrid;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GKind {
    /// `G ≡ level < 0`: the constraint never binds.
    Inactive { level: f64 },
    /// `G(φ) = φ − g − offset`, capping the value at `g + offset`.
    ValueCap { offset: f64 },
    /// Discrete gradient bound: `G(φ)` is the largest one-sided slope
    /// `(φ(x) − φ(x ± h e_j)) / h` minus `bound`.
    Lipschitz { bound: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GOperator {
    pub kind: GKind,
    /// Asserted: `H < ∞ ⇒ G ≤ 0`.
    #[serde(default)]
    pub finite_h_implies_nonpositive: bool,
    /// Asserted: `G < 0 ⇒ H < ∞`.
    #[serde(default)]
    pub negative_implies_finite_h: bool,
}

impl GOperator {
    pub fn inactive() -> Self {
        GOperator::new(GKind::Inactive { level: -1.0 })
    }

    pub fn new(kind: GKind) -> Self {
        GOperator {
            kind,
            finite_h_implies_nonpositive: true,
            negative_implies_finite_h: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GKind::Inactive { level } if !(level < 0.0) => Err(Error::config("inactive G needs a negative level")),
            GKind::ValueCap { offset } if !offset.is_finite() => Err(Error::config("G offset must be finite")),
            GKind::Lipschitz { bound } if !(bound >= 0.0 && bound.is_finite()) => {
                Err(Error::config("G gradient bound must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// `Gφ` at `node` for nodal values `values`.
    pub fn node_value(&self, spec: &ProblemSpec, grid: &SpaceTimeGrid, values: &[f64], node: usize) -> Result<f64> {
        Ok(match self.kind {
            GKind::Inactive { level } => level,
            GKind::ValueCap { offset } => values[node] - spec.g(&grid.coords(node))? - offset,
            GKind::Lipschitz { bound } => {
                let idx = grid.index(node);
                let mut worst = f64::NEG_INFINITY;
                for (j, axis) in grid.axes.iter().enumerate() {
                    let h = axis.spacing();
                    let s = grid.stride(j);
                    if idx[j] > 0 {
                        worst = worst.max((values[node] - values[node - s]) / h);
                    }
                    if idx[j] + 1 < axis.nodes {
                        worst = worst.max((values[node] - values[node + s]) / h);
                    }
                }
                worst - bound
            }
        })
    }

    /// Value carried by a node where no control is admissible, if `G` pins one.
    pub fn pinned_value(&self, spec: &ProblemSpec, x: &[f64]) -> Result<Option<f64>> {
        Ok(match self.kind {
            GKind::ValueCap { offset } => Some(spec.g(x)? + offset),
            _ => None,
        })
    }

    /// Lowers `values` to the largest nodal field below them with `G ≤ 0`;
    /// returns the number of nodes changed.
    pub fn cap(&self, spec: &ProblemSpec, grid: &SpaceTimeGrid, values: &mut [f64]) -> Result<usize> {
        let before = values.to_vec();
        match self.kind {
            GKind::Inactive { .. } => {}
            GKind::ValueCap { offset } => {
                for (n, v) in values.iter_mut().enumerate() {
                    *v = v.min(spec.g(&grid.coords(n))? + offset);
                }
            }
            GKind::Lipschitz { bound } => {
                for (j, axis) in grid.axes.iter().enumerate() {
                    let step = bound * axis.spacing();
                    let s = grid.stride(j);
                    for n in 0..values.len() {
                        if grid.index(n)[j] > 0 {
                            values[n] = values[n].min(values[n - s] + step);
                        }
                    }
                    for n in (0..values.len()).rev() {
                        if grid.index(n)[j] + 1 < axis.nodes {
                            values[n] = values[n].min(values[n + s] + step);
                        }
                    }
                }
            }
        }
        Ok(values.iter().zip(&before).filter(|(a, b)| a != b).count())
    }
}
