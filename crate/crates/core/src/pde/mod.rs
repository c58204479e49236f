//! Explicit monotone finite differences for the interior equation
//! `max{−∂_t φ + Hφ, Gφ} = 0` (target form), `−∂_t φ + 𝐇φ = 0` (control
//! form), and the terminal layer `min{max{φ − g, Gφ}, δφ} = 0`.
//!
//! A backward step reads `V(t_k) = V(t_{k+1}) − Δt · H` with first-order
//! terms upwinded on the sign of `μ_X`, central second differences, and jump
//! terms evaluated by interpolating `V(t_{k+1})` at `x + β_i`. The constraint
//! `Gφ ≤ 0` is then enforced nodewise by the cap of the chosen [`GKind`].

mod constraint;
mod grid;
mod solver;

pub use constraint::{GKind, GOperator};
pub use grid::{Axis, Boundary, SliceView, SpaceTimeGrid, ValueField};
pub use solver::{
    cfl_check, solve_hjb, solve_terminal, CflCertificate, DeltaMode, Form, HjbSolution, TerminalParams,
    TerminalSolution,
};
