//! Embedding of an optimal control problem into a target problem.
//!
//! A control-form problem minimizes `E[g(X_T)]` over controls `ν` acting on `X`
//! alone. Its target form adds martingale integrands as controls:
//! `u1 = (ν, α)` with `α ∈ ℝ^d`, `u2(e) = γ(e) ∈ ℝ^I`, and
//!
//! ```text
//! dY = α·dW + Σ_i ∫ γ_i(e) λ̃_i(de, ds),
//! ```
//!
//! i.e. `σ_Y = α`, `b_i = γ_i`, and `μ_Y = 0` against the compensated measure.
//! `X` keeps its dynamics. The two value functions coincide.

use crate::error::{Error, Result};
use crate::model::{Affine, Coefficients, ControlGrid, ControlValue, Dims, Interval, ProblemSpec, ScalarFn, Var};
use crate::operators::{jump_increments, SpatialFunction};

#[derive(Clone, Debug)]
pub struct Embedding {
    base: ProblemSpec,
    target: ProblemSpec,
}

impl Embedding {
    /// `base` must not use jump controls (`n = 0`); its `Y` coefficients are ignored.
    pub fn new(base: ProblemSpec) -> Result<Self> {
        base.validate_structure()?;
        let Dims { d, q, n, processes } = base.dims;
        if n != 0 {
            return Err(Error::config("control-form problems take no jump controls (n must be 0)"));
        }
        let dims = Dims {
            d,
            q: q + d,
            n: processes,
            processes,
        };
        let bc = &base.coefficients;
        let mut coefficients = Coefficients::zero(dims);
        coefficients.mu_x = bc.mu_x.clone();
        coefficients.sigma_x = bc.sigma_x.clone();
        coefficients.beta = bc.beta.clone();
        coefficients.sigma_y = (0..d)
            .map(|j| ScalarFn::Affine(Affine::new(0.0, [(Var::U(q + j), 1.0)])))
            .collect();
        coefficients.b = (0..processes)
            .map(|i| ScalarFn::Affine(Affine::new(0.0, [(Var::V(i), 1.0)])))
            .collect();
        coefficients.compensated_jumps = true;
        let mut domain = base.domain.clone();
        domain
            .u1
            .extend(std::iter::repeat_n(Interval::new(f64::NEG_INFINITY, f64::INFINITY), d));
        domain.u2 = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        let target = ProblemSpec {
            dims,
            coefficients,
            domain,
            ..base.clone()
        };
        target.validate_structure()?;
        Ok(Embedding { base, target })
    }

    pub fn base(&self) -> &ProblemSpec {
        &self.base
    }

    pub fn target(&self) -> &ProblemSpec {
        &self.target
    }

    /// Target control `((ν, α), γ)`; `gamma[e][i]` is `γ_i(e)`.
    pub fn lift(&self, nu: &[f64], alpha: &[f64], gamma: Vec<Vec<f64>>) -> ControlValue {
        let mut u1 = nu.to_vec();
        u1.extend_from_slice(alpha);
        ControlValue::new(u1, gamma)
    }

    /// Span over `base_grid`: for every base control, all `(α, γ)`.
    pub fn spanning(&self, base_grid: &ControlGrid) -> Spanning {
        Spanning {
            d: self.base.dims.d,
            processes: self.base.dims.processes,
            nus: base_grid.values().iter().map(|u| u.u1.clone()).collect(),
        }
    }
}

/// Controls of an embedded problem with free `(α, γ)`: a base control `ν`
/// from a finite list and any integrands. Candidates are produced on demand
/// for a prescribed `(N^u, Δ^u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spanning {
    d: usize,
    processes: usize,
    nus: Vec<Vec<f64>>,
}

impl Spanning {
    pub fn len(&self) -> usize {
        self.nus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nus.is_empty()
    }

    pub fn nu(&self, k: usize) -> &[f64] {
        &self.nus[k]
    }

    /// Base controls with `α = 0`, `γ = 0`; enough for anything that only
    /// looks at the dynamics of `X`.
    pub fn base_controls(&self, spec: &ProblemSpec) -> Vec<ControlValue> {
        self.nus
            .iter()
            .map(|nu| {
                let mut u1 = nu.clone();
                u1.extend(std::iter::repeat_n(0.0, self.d));
                ControlValue::new(u1, vec![vec![0.0; self.processes]; spec.marks.len()])
            })
            .collect()
    }

    /// Target control with base `ν_k` and `N^u = r`, `J_i^{u,e} = s` for all
    /// `i, e`, at `(t, x, p)` and test function `φ`.
    #[allow(clippy::too_many_arguments)]
    pub fn candidate<F: SpatialFunction>(
        &self,
        spec: &ProblemSpec,
        k: usize,
        t: f64,
        x: &[f64],
        p: &[f64],
        phi: &F,
        r: &[f64],
        s: f64,
    ) -> Result<ControlValue> {
        let marks = spec.marks.len();
        let mut u1 = self.nus[k].clone();
        u1.extend(std::iter::repeat_n(0.0, self.d));
        let mut u = ControlValue::new(u1, vec![vec![0.0; self.processes]; marks]);
        let sigma = spec.sigma_x(t, x, &u)?;
        let q = self.nus[k].len();
        for c in 0..self.d {
            u.u1[q + c] = r[c] + (0..self.d).map(|j| sigma[(j, c)] * p[j]).sum::<f64>();
        }
        for e in 0..marks {
            let inc = jump_increments(t, x, &u, e, phi, spec)?;
            for (g, d) in u.u2[e].iter_mut().zip(inc) {
                *g = s + d;
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkSpace, Payoff};
    use crate::operators::{delta_ue, n_u, TestFunction};

    fn base() -> ProblemSpec {
        let dims = Dims { d: 1, q: 1, n: 0, processes: 1 };
        let mut spec = ProblemSpec::zero(dims, MarkSpace::single(0.5).unwrap(), 1.0).unwrap();
        spec.coefficients.mu_x[0] = ScalarFn::Affine(Affine::new(0.0, [(Var::U(0), 1.0)]));
        spec.coefficients.sigma_x[0][0] = ScalarFn::Constant(0.3);
        spec.coefficients.beta[0][0] = ScalarFn::Constant(1.0);
        spec.payoff = Payoff::tanh();
        spec
    }

    #[test]
    fn target_dynamics() {
        let emb = Embedding::new(base()).unwrap();
        let t = emb.target();
        assert_eq!(t.dims, Dims { d: 1, q: 2, n: 1, processes: 1 });
        let u = emb.lift(&[0.4], &[2.0], vec![vec![3.0]]);
        assert_eq!(t.sigma_y(0.0, &[0.0], 0.0, &u).unwrap(), vec![2.0]);
        assert_eq!(t.b(0, 0.0, &[0.0], 0.0, &u, 0).unwrap(), 3.0);
        assert_eq!(t.mu_y(0.0, &[0.0], 0.0, &u).unwrap(), -1.5);
        assert_eq!(t.mu_x(0.0, &[0.0], &u).unwrap(), vec![0.4]);
    }

    #[test]
    fn candidates_hit_prescribed_operators() {
        let emb = Embedding::new(base()).unwrap();
        let grid = ControlGrid::lattice(emb.base(), 3, &[], false, 10.0).unwrap();
        let span = emb.spanning(&grid);
        let phi = TestFunction::zero(1).with_monomial(1.0, 0, vec![2]);
        let spec = emb.target();
        for k in 0..span.len() {
            let u = span.candidate(spec, k, 0.2, &[0.5], &[1.5], &phi, &[0.25], -0.75).unwrap();
            let nv = n_u(0.2, &[0.5], 0.0, &[1.5], &u, spec).unwrap();
            assert!((nv[0] - 0.25).abs() < 1e-14);
            let dl = delta_ue(0.2, &[0.5], 0.0, &u, 0, &phi, spec).unwrap();
            assert!((dl + 0.75).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_jump_controls() {
        let mut b = base();
        b.dims.n = 1;
        assert!(Embedding::new(b).is_err());
    }
}
