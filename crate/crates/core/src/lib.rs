//! Numerical laboratory for stochastic target problems driven by controlled
//! jump diffusions.
//!
//! The crate evaluates the HJB operator algebra of the target problem, solves
//! the interior and terminal-layer equations with a monotone explicit scheme,
//! simulates the controlled pair `(X, Y)`, and certifies stochastic
//! super-/sub-solutions on exact finite scenario trees.
//!
//! | module | contents |
//! |---|---|
//! | [`model`] | marks, controls, coefficients, problem files, assumption checks |
//! | [`sde`] | Euler–Maruyama paths with thinned jumps, concatenation, admissibility |
//! | [`operators`] | `F^u`, `N^u`, `Δ^{u,e}`, `H_{ε,η}`, semi-limit surrogates, `δ`, `𝐇` |
//! | [`embedding`] | control problem to target problem with free martingale integrands |
//! | [`pde`] | terminal-layer and interior HJB solvers |
//! | [`tree`] | scenario trees, target recursion, expectations, representation |
//! | [`perron`] | super-/sub-solution certificates and the envelope sandwich |
//! | [`experiment`] | config-driven experiment runs behind the `target-lab` binary |

pub mod embedding;
pub mod error;
pub mod experiment;
pub mod model;
pub mod operators;
pub mod pde;
pub mod perron;
pub mod sde;
pub mod tree;

pub use error::{Error, Result};
pub use model::{control_norm, ControlGrid, ControlValue, MarkSpace, ProblemSpec};
