//! Pointwise operators of the target problem and their finite surrogates.
//!
//! With `Θ = (t, x, y, p, A)`:
//!
//! * `F^u(Θ) = μ_Y − μ_X^⊤p − ½ Tr[σ_X σ_X^⊤ A]`
//! * `N^u(t, x, y, p) = σ_Y − σ_X^⊤ p`
//! * `J_i^{u,e} = b_i − φ(t, x + β_i) + φ(t, x)` and `Δ^{u,e} = min_i J_i^{u,e}`
//! * `u ∈ 𝒩_{ε,η}` iff `|N^u| ≤ ε` and `Δ^{u,e} ≥ η` for every mark
//! * `H_{ε,η} = sup_{u ∈ 𝒩_{ε,η}} F^u` (`−∞` on an empty set)
//!
//! and, for problems written in control form, the integro-differential
//! Hamiltonian `𝐇 = sup_u {−I[φ] − μ_X^⊤ p − ½ Tr[σ_X σ_X^⊤ A]}` with
//! `I[φ] = Σ_i Σ_e (φ(t, x + β_i) − φ(t, x)) m_i(e)`.

mod delta;
mod semilimit;
mod test_function;

use std::borrow::Cow;

use nalgebra::DMatrix;

pub use delta::{delta_gap, DeltaGap, DeltaSearch};
pub use semilimit::{h_lower, h_upper, semi_limits, SemiLimitSchedule, SemiLimits};
pub use test_function::{derivative_error, Bump, Monomial, SpatialFunction, TestFunction};

use crate::embedding::Spanning;
use crate::error::{Error, Result};
use crate::model::{norm, ControlGrid, ControlValue, ProblemSpec};

/// Slack used when testing `|N^u| ≤ ε` and `Δ^{u,e} ≥ η`.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    pub p: Vec<f64>,
    pub a: DMatrix<f64>,
}

impl Theta {
    pub fn new(t: f64, x: Vec<f64>, y: f64, p: Vec<f64>, a: DMatrix<f64>) -> Result<Self> {
        let d = x.len();
        if p.len() != d || a.nrows() != d || a.ncols() != d {
            return Err(Error::domain("Θ components have inconsistent dimensions"));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(format!("Θ time {t} is negative")));
        }
        let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for j in 0..d {
            for k in 0..j {
                if (a[(j, k)] - a[(k, j)]).abs() > 1e-12 * scale {
                    return Err(Error::domain("Θ matrix A is not symmetric"));
                }
            }
        }
        Ok(Theta { t, x, y, p, a })
    }

    /// Θ with `A = 0`.
    pub fn first_order(t: f64, x: Vec<f64>, y: f64, p: Vec<f64>) -> Self {
        let d = x.len();
        Theta {
            t,
            x,
            y,
            p,
            a: DMatrix::zeros(d, d),
        }
    }

    /// `Θ` built from the derivatives of `φ` at `(t, x)`.
    pub fn from_test_function(phi: &TestFunction, t: f64, x: Vec<f64>, y: f64) -> Self {
        let p = phi.grad(t, &x);
        let a = phi.hessian(t, &x);
        Theta { t, x, y, p, a }
    }

    fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.x.len() != spec.dims.d {
            return Err(Error::domain("Θ dimension differs from the problem"));
        }
        if self.t > spec.horizon {
            return Err(Error::domain(format!("Θ time {} beyond the horizon", self.t)));
        }
        Ok(())
    }
}

/// Controls searched by the suprema: a fixed grid, or the per-point span used
/// for problems obtained by embedding (see [`Spanning`]).
#[derive(Clone, Copy, Debug)]
pub enum ControlSet<'a> {
    Grid(&'a ControlGrid),
    Spanning(&'a Spanning),
}

impl<'a> From<&'a ControlGrid> for ControlSet<'a> {
    fn from(g: &'a ControlGrid) -> Self {
        ControlSet::Grid(g)
    }
}

impl<'a> From<&'a Spanning> for ControlSet<'a> {
    fn from(s: &'a Spanning) -> Self {
        ControlSet::Spanning(s)
    }
}

impl ControlSet<'_> {
    /// Candidates at `(t, x, p)`. For a span these are the controls with
    /// `N^u = 0` and `Δ^{u,e} = η`, one per base control.
    pub fn candidates<F: SpatialFunction>(
        &self,
        spec: &ProblemSpec,
        t: f64,
        x: &[f64],
        p: &[f64],
        phi: &F,
        eta: f64,
    ) -> Result<Cow<'_, [ControlValue]>> {
        match self {
            ControlSet::Grid(g) => Ok(Cow::Borrowed(g.values())),
            ControlSet::Spanning(s) => {
                let r = vec![0.0; spec.dims.d];
                (0..s.len())
                    .map(|k| s.candidate(spec, k, t, x, p, phi, &r, eta))
                    .collect::<Result<Vec<_>>>()
                    .map(Cow::Owned)
            }
        }
    }
}

/// `Tr[σ σ^⊤ A]`.
fn diffusion_trace(sigma: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    (sigma * sigma.transpose()).component_mul(a).sum()
}

pub fn f_u(theta: &Theta, u: &ControlValue, spec: &ProblemSpec) -> Result<f64> {
    let mu_y = spec.mu_y(theta.t, &theta.x, theta.y, u)?;
    let mu_x = spec.mu_x(theta.t, &theta.x, u)?;
    let sigma = spec.sigma_x(theta.t, &theta.x, u)?;
    let drift: f64 = mu_x.iter().zip(&theta.p).map(|(m, p)| m * p).sum();
    Ok(mu_y - drift - 0.5 * diffusion_trace(&sigma, &theta.a))
}

pub fn n_u(t: f64, x: &[f64], y: f64, p: &[f64], u: &ControlValue, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let sigma_y = spec.sigma_y(t, x, y, u)?;
    let sigma = spec.sigma_x(t, x, u)?;
    Ok((0..spec.dims.d)
        .map(|k| sigma_y[k] - (0..spec.dims.d).map(|j| sigma[(j, k)] * p[j]).sum::<f64>())
        .collect())
}

/// `φ(t, x + β_i) − φ(t, x)` for each process.
pub fn jump_increments<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    u: &ControlValue,
    e: usize,
    phi: &F,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    (0..spec.dims.processes)
        .map(|i| {
            let beta = spec.beta(i, t, x, u, e)?;
            let shifted: Vec<f64> = x.iter().zip(&beta).map(|(a, b)| a + b).collect();
            Ok(phi.increment(t, x, &shifted))
        })
        .collect()
}

/// The vector `J̄^{u,e} = (J_1^{u,e}, …, J_I^{u,e})`.
pub fn jump_gaps<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    y: f64,
    u: &ControlValue,
    e: usize,
    phi: &F,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    let inc = jump_increments(t, x, u, e, phi, spec)?;
    inc.iter()
        .enumerate()
        .map(|(i, d)| Ok(spec.b(i, t, x, y, u, e)? - d))
        .collect()
}

/// `Δ^{u,e}`; `+∞` without jump processes.
pub fn delta_ue<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    y: f64,
    u: &ControlValue,
    e: usize,
    phi: &F,
    spec: &ProblemSpec,
) -> Result<f64> {
    Ok(jump_gaps(t, x, y, u, e, phi, spec)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `J^u = min_e Δ^{u,e}`; `+∞` without marks.
pub fn j_u<F: SpatialFunction>(t: f64, x: &[f64], y: f64, u: &ControlValue, phi: &F, spec: &ProblemSpec) -> Result<f64> {
    let mut m = f64::INFINITY;
    for e in 0..spec.marks.len() {
        m = m.min(delta_ue(t, x, y, u, e, phi, spec)?);
    }
    Ok(m)
}

#[allow(clippy::too_many_arguments)]
pub fn in_n_eps_eta<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    y: f64,
    p: &[f64],
    u: &ControlValue,
    eps: f64,
    eta: f64,
    phi: &F,
    spec: &ProblemSpec,
) -> Result<bool> {
    if norm(&n_u(t, x, y, p, u, spec)?) > eps + ADMISSIBILITY_TOL {
        return Ok(false);
    }
    Ok(j_u(t, x, y, u, phi, spec)? >= eta - ADMISSIBILITY_TOL)
}

/// Outcome of a supremum over a finite control set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HValue {
    /// `−∞` when nothing was admissible.
    pub value: f64,
    /// First maximizing candidate.
    pub argmax: Option<usize>,
    pub admissible: usize,
}

impl HValue {
    fn empty() -> Self {
        HValue {
            value: f64::NEG_INFINITY,
            argmax: None,
            admissible: 0,
        }
    }

    fn offer(&mut self, k: usize, v: f64) {
        self.admissible += 1;
        if self.argmax.is_none() || v > self.value {
            self.value = v;
            self.argmax = Some(k);
        }
    }
}

/// `H_{ε,η}(Θ, φ)` over `controls`.
pub fn h_eps_eta<F: SpatialFunction>(
    theta: &Theta,
    phi: &F,
    eps: f64,
    eta: f64,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> Result<HValue> {
    theta.check(spec)?;
    let cands = controls.candidates(spec, theta.t, &theta.x, &theta.p, phi, eta)?;
    let mut out = HValue::empty();
    for (k, u) in cands.iter().enumerate() {
        if in_n_eps_eta(theta.t, &theta.x, theta.y, &theta.p, u, eps, eta, phi, spec)? {
            out.offer(k, f_u(theta, u, spec)?);
        }
    }
    Ok(out)
}

/// `𝓛^u φ = φ_t + μ_X^⊤ Dφ + ½ Tr[σ_X σ_X^⊤ D²φ]`.
pub fn generator_l_u(t: f64, x: &[f64], u: &ControlValue, phi: &TestFunction, spec: &ProblemSpec) -> Result<f64> {
    let mu = spec.mu_x(t, x, u)?;
    let sigma = spec.sigma_x(t, x, u)?;
    let grad = phi.grad(t, x);
    let drift: f64 = mu.iter().zip(&grad).map(|(m, g)| m * g).sum();
    Ok(phi.dt(t, x) + drift + 0.5 * diffusion_trace(&sigma, &phi.hessian(t, x)))
}

/// `I[φ](t, x, u) = Σ_i Σ_e (φ(t, x + β_i) − φ(t, x)) m_i(e)`.
pub fn nonlocal_i<F: SpatialFunction>(t: f64, x: &[f64], u: &ControlValue, phi: &F, spec: &ProblemSpec) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..spec.marks.len() {
        let inc = jump_increments(t, x, u, e, phi, spec)?;
        for (i, d) in inc.iter().enumerate() {
            total += d * spec.marks.weight(i, e);
        }
    }
    Ok(total)
}

/// `−I[φ] − μ_X^⊤ p − ½ Tr[σ_X σ_X^⊤ A]` for one control.
pub fn bold_h_at<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    p: &[f64],
    a: &DMatrix<f64>,
    u: &ControlValue,
    phi: &F,
    spec: &ProblemSpec,
) -> Result<f64> {
    let mu = spec.mu_x(t, x, u)?;
    let sigma = spec.sigma_x(t, x, u)?;
    let drift: f64 = mu.iter().zip(p).map(|(m, q)| m * q).sum();
    Ok(-nonlocal_i(t, x, u, phi, spec)? - drift - 0.5 * diffusion_trace(&sigma, a))
}

/// `𝐇` maximized over `grid`.
pub fn bold_h<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    p: &[f64],
    a: &DMatrix<f64>,
    phi: &F,
    grid: &ControlGrid,
    spec: &ProblemSpec,
) -> Result<HValue> {
    let mut out = HValue::empty();
    for (k, u) in grid.values().iter().enumerate() {
        out.offer(k, bold_h_at(t, x, p, a, u, phi, spec)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
