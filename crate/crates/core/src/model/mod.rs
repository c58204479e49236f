//! Problem description: marks, controls, coefficients and the target payoff.

mod coefficients;
pub mod file;
mod validate;

use nalgebra::DMatrix;

pub use coefficients::{Affine, Args, Coefficients, Dims, Payoff, ScalarFn, Table, Tanh, Var};
pub use validate::{validate_problem, ValidationReport, Violation, ViolationKind};

use crate::error::{finite, Error, Result};

/// Finite mark space `E` with one weight vector per point process.
///
/// `weights[i][e]` is `m_i({e})`. Every weight must be positive so that each
/// mark lies in the support of every `m_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkSpace {
    points: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl MarkSpace {
    pub fn new(points: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("mark points must be finite"));
        }
        for (j, p) in points.iter().enumerate() {
            if points[..j].contains(p) {
                return Err(Error::config(format!("duplicate mark {p}")));
            }
        }
        if !weights.is_empty() && points.is_empty() {
            return Err(Error::config("point processes need at least one mark"));
        }
        for (i, w) in weights.iter().enumerate() {
            if w.len() != points.len() {
                return Err(Error::config(format!(
                    "process {i} has {} weights for {} marks",
                    w.len(),
                    points.len()
                )));
            }
            if w.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                return Err(Error::config(format!(
                    "process {i}: every mark needs a finite positive weight"
                )));
            }
        }
        Ok(MarkSpace { points, weights })
    }

    /// No marks and no point processes.
    pub fn empty() -> Self {
        MarkSpace {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// One process with a single mark at 0 carrying intensity `rate`.
    pub fn single(rate: f64) -> Result<Self> {
        MarkSpace::new(vec![0.0], vec![vec![rate]])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn processes(&self) -> usize {
        self.weights.len()
    }

    pub fn point(&self, e: usize) -> f64 {
        self.points[e]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weight(&self, i: usize, e: usize) -> f64 {
        self.weights[i][e]
    }

    /// `m_i(E)`.
    pub fn process_mass(&self, i: usize) -> f64 {
        self.weights[i].iter().sum()
    }

    /// `m̂(E) = Σ_i m_i(E)`.
    pub fn total_mass(&self) -> f64 {
        (0..self.processes()).map(|i| self.process_mass(i)).sum()
    }
}

/// A point `u = (u1, u2)` of the control set; `u2[e]` is the jump control at mark `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlValue {
    pub u1: Vec<f64>,
    pub u2: Vec<Vec<f64>>,
}

impl ControlValue {
    pub fn new(u1: Vec<f64>, u2: Vec<Vec<f64>>) -> Self {
        ControlValue { u1, u2 }
    }

    /// Control with `u2 ≡ 0` of dimension `n` on every mark.
    pub fn diffusive(u1: Vec<f64>, marks: usize, n: usize) -> Self {
        ControlValue {
            u1,
            u2: vec![vec![0.0; n]; marks],
        }
    }

    pub fn zero(dims: Dims, marks: usize) -> Self {
        ControlValue::diffusive(vec![0.0; dims.q], marks, dims.n)
    }

    /// `u2(e)`, empty when the control carries no jump component.
    pub fn at_mark(&self, e: usize) -> &[f64] {
        self.u2.get(e).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `‖u‖_U = |u1| + (Σ_i Σ_e |u2(e)|² m_i(e))^{1/2}`.
pub fn control_norm(u: &ControlValue, marks: &MarkSpace) -> Result<f64> {
    if u.u2.len() != marks.len() {
        return Err(Error::domain(format!(
            "u2 is defined on {} marks, the mark space has {}",
            u.u2.len(),
            marks.len()
        )));
    }
    let u1 = u.u1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sq = 0.0;
    for i in 0..marks.processes() {
        for (e, slice) in u.u2.iter().enumerate() {
            sq += slice.iter().map(|v| v * v).sum::<f64>() * marks.weight(i, e);
        }
    }
    Ok(u1 + sq.sqrt())
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize)]
#[serde(from = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// `n` equally spaced points, the midpoint when `n == 1`.
    pub fn lattice(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Sampling box for validation and the box constraint `U1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub x: Vec<Interval>,
    pub y: Interval,
    pub u1: Vec<Interval>,
    pub u2: Interval,
}

impl Domain {
    pub fn unit(dims: Dims) -> Self {
        Domain {
            x: vec![Interval::new(-1.0, 1.0); dims.d],
            y: Interval::new(-1.0, 1.0),
            u1: vec![Interval::new(-1.0, 1.0); dims.q],
            u2: Interval::new(-1.0, 1.0),
        }
    }
}

/// Finite list of controls standing in for the unbounded control set.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    values: Vec<ControlValue>,
    truncation_radius: f64,
}

impl ControlGrid {
    pub fn new(spec: &ProblemSpec, values: Vec<ControlValue>, truncation_radius: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("control grid is empty"));
        }
        for (k, u) in values.iter().enumerate() {
            spec.check_control(u)?;
            if values[..k].contains(u) {
                return Err(Error::config(format!("control {k} is a duplicate")));
            }
            let norm = control_norm(u, &spec.marks)?;
            if norm > truncation_radius {
                return Err(Error::config(format!(
                    "control {k} has norm {norm} beyond the truncation radius {truncation_radius}"
                )));
            }
        }
        Ok(ControlGrid {
            values,
            truncation_radius,
        })
    }

    /// Single control.
    pub fn singleton(spec: &ProblemSpec, u: ControlValue) -> Result<Self> {
        let radius = control_norm(&u, &spec.marks)?;
        ControlGrid::new(spec, vec![u], radius)
    }

    /// Uniform lattice over the `U1` box (`u1_points` per coordinate) times the
    /// levels `u2_levels` for each `u2` component. With `per_mark` the levels are
    /// chosen independently on every mark, otherwise `u2(e)` is the same for all
    /// marks. Controls with norm beyond `truncation_radius` are dropped.
    pub fn lattice(
        spec: &ProblemSpec,
        u1_points: usize,
        u2_levels: &[f64],
        per_mark: bool,
        truncation_radius: f64,
    ) -> Result<Self> {
        let dims = spec.dims;
        let mut u1s: Vec<Vec<f64>> = vec![Vec::new()];
        for iv in &spec.domain.u1 {
            let axis = iv.lattice(u1_points.max(1));
            u1s = u1s
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        let levels: Vec<f64> = if u2_levels.is_empty() { vec![0.0] } else { u2_levels.to_vec() };
        let slots = if per_mark { spec.marks.len() } else { 1 };
        let mut u2_choices: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..slots * dims.n {
            u2_choices = u2_choices
                .into_iter()
                .flat_map(|prefix| {
                    levels.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        let mut values = Vec::new();
        for u1 in &u1s {
            for flat in &u2_choices {
                let u2 = (0..spec.marks.len())
                    .map(|e| {
                        let slot = if per_mark { e } else { 0 };
                        flat[slot * dims.n..(slot + 1) * dims.n].to_vec()
                    })
                    .collect();
                let u = ControlValue::new(u1.clone(), u2);
                if control_norm(&u, &spec.marks)? <= truncation_radius && !values.contains(&u) {
                    values.push(u);
                }
            }
        }
        ControlGrid::new(spec, values, truncation_radius)
    }

    pub fn values(&self) -> &[ControlValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> &ControlValue {
        &self.values[k]
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn position(&self, u: &ControlValue) -> Option<usize> {
        self.values.iter().position(|v| v == u)
    }
}

/// Complete description of a stochastic target problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dims: Dims,
    pub marks: MarkSpace,
    pub coefficients: Coefficients,
    pub horizon: f64,
    pub payoff: Payoff,
    /// `‖g‖_∞` when the payoff is declared bounded.
    pub g_bound: Option<f64>,
    /// Lipschitz / linear-growth constant `L` of the diffusion coefficients.
    pub lipschitz: f64,
    /// Growth constant `C` of `μ_Y + ∫ b dm` in `y`.
    pub growth: Option<f64>,
    pub domain: Domain,
}

impl ProblemSpec {
    /// Zero coefficients, no jumps, `g ≡ 0`.
    pub fn zero(dims: Dims, marks: MarkSpace, horizon: f64) -> Result<Self> {
        let spec = ProblemSpec {
            dims,
            coefficients: Coefficients::zero(dims),
            marks,
            horizon,
            payoff: Payoff::Constant(0.0),
            g_bound: None,
            lipschitz: 0.0,
            growth: None,
            domain: Domain::unit(dims),
        };
        spec.validate_structure()?;
        Ok(spec)
    }

    pub fn validate_structure(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon must be positive and finite"));
        }
        if self.dims.d == 0 {
            return Err(Error::config("state dimension d must be at least 1"));
        }
        if self.marks.processes() != self.dims.processes {
            return Err(Error::config(format!(
                "mark space describes {} processes, dims declare {}",
                self.marks.processes(),
                self.dims.processes
            )));
        }
        if self.domain.x.len() != self.dims.d || self.domain.u1.len() != self.dims.q {
            return Err(Error::config("domain box dimensions do not match dims"));
        }
        if self.lipschitz < 0.0 {
            return Err(Error::config("Lipschitz constant must be nonnegative"));
        }
        self.coefficients.validate(self.dims)?;
        self.payoff.validate(self.dims.d)
    }

    pub fn with_coefficients(mut self, coefficients: Coefficients) -> Result<Self> {
        self.coefficients = coefficients;
        self.validate_structure()?;
        Ok(self)
    }

    pub(crate) fn check_control(&self, u: &ControlValue) -> Result<()> {
        if u.u1.len() != self.dims.q {
            return Err(Error::domain(format!("u1 has length {}, expected {}", u.u1.len(), self.dims.q)));
        }
        if u.u2.len() != self.marks.len() || u.u2.iter().any(|s| s.len() != self.dims.n) {
            return Err(Error::domain("u2 must carry an n-vector on every mark"));
        }
        for (k, (v, iv)) in u.u1.iter().zip(&self.domain.u1).enumerate() {
            if !iv.contains(*v) {
                return Err(Error::domain(format!("u1[{k}] = {v} outside the control box")));
            }
        }
        Ok(())
    }

    pub fn g(&self, x: &[f64]) -> Result<f64> {
        finite(self.payoff.eval(x), "payoff", || format!("x = {x:?}"))
    }

    pub fn mu_x(&self, t: f64, x: &[f64], u: &ControlValue) -> Result<Vec<f64>> {
        let args = Args { u1: &u.u1, ..Args::new(t, x) };
        self.coefficients
            .mu_x
            .iter()
            .map(|f| finite(f.eval(&args), "mu_x", || format!("t = {t}, x = {x:?}")))
            .collect()
    }

    pub fn sigma_x(&self, t: f64, x: &[f64], u: &ControlValue) -> Result<DMatrix<f64>> {
        let d = self.dims.d;
        let args = Args { u1: &u.u1, ..Args::new(t, x) };
        let mut m = DMatrix::zeros(d, d);
        for (r, row) in self.coefficients.sigma_x.iter().enumerate() {
            for (c, f) in row.iter().enumerate() {
                m[(r, c)] = finite(f.eval(&args), "sigma_x", || format!("t = {t}, x = {x:?}"))?;
            }
        }
        Ok(m)
    }

    /// Column `β_i(t, x, u(e), e)`.
    pub fn beta(&self, i: usize, t: f64, x: &[f64], u: &ControlValue, e: usize) -> Result<Vec<f64>> {
        let args = Args {
            u1: &u.u1,
            v: u.at_mark(e),
            e: self.marks.point(e),
            ..Args::new(t, x)
        };
        self.coefficients.beta[i]
            .iter()
            .map(|f| finite(f.eval(&args), "beta", || format!("process {i}, mark {e}, x = {x:?}")))
            .collect()
    }

    fn y_scale(&self, t: f64) -> f64 {
        (self.coefficients.exp_shift() * t).exp()
    }

    fn b_raw(&self, i: usize, t: f64, x: &[f64], y_base: f64, u: &ControlValue, e: usize) -> f64 {
        let args = Args {
            y: y_base,
            u1: &u.u1,
            v: u.at_mark(e),
            e: self.marks.point(e),
            ..Args::new(t, x)
        };
        self.coefficients.b[i].eval(&args)
    }

    /// Entry `b_i(t, x, y, u(e), e)`.
    pub fn b(&self, i: usize, t: f64, x: &[f64], y: f64, u: &ControlValue, e: usize) -> Result<f64> {
        let s = self.y_scale(t);
        let v = s * self.b_raw(i, t, x, y / s, u, e);
        finite(v, "b", || format!("process {i}, mark {e}, x = {x:?}, y = {y}"))
    }

    pub fn mu_y(&self, t: f64, x: &[f64], y: f64, u: &ControlValue) -> Result<f64> {
        let c = self.coefficients.exp_shift();
        let s = self.y_scale(t);
        let y_base = y / s;
        let args = Args { y: y_base, u1: &u.u1, ..Args::new(t, x) };
        let mut base = self.coefficients.mu_y.eval(&args);
        if self.coefficients.compensated_jumps {
            for i in 0..self.dims.processes {
                for e in 0..self.marks.len() {
                    base -= self.b_raw(i, t, x, y_base, u, e) * self.marks.weight(i, e);
                }
            }
        }
        finite(c * y + s * base, "mu_y", || format!("t = {t}, x = {x:?}, y = {y}"))
    }

    pub fn sigma_y(&self, t: f64, x: &[f64], y: f64, u: &ControlValue) -> Result<Vec<f64>> {
        let s = self.y_scale(t);
        let args = Args { y: y / s, u1: &u.u1, ..Args::new(t, x) };
        self.coefficients
            .sigma_y
            .iter()
            .map(|f| finite(s * f.eval(&args), "sigma_y", || format!("t = {t}, x = {x:?}, y = {y}")))
            .collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims1() -> Dims {
        Dims { d: 1, q: 2, n: 1, processes: 1 }
    }

    #[test]
    fn control_norm_examples() {
        let marks = MarkSpace::single(0.25).unwrap();
        let zero = ControlValue::new(vec![0.0, 0.0], vec![vec![0.0]]);
        assert_eq!(control_norm(&zero, &marks).unwrap(), 0.0);
        let euclid = ControlValue::new(vec![3.0, 4.0], vec![vec![0.0]]);
        assert_eq!(control_norm(&euclid, &marks).unwrap(), 5.0);
        let jump = ControlValue::new(vec![0.0, 0.0], vec![vec![2.0]]);
        assert_eq!(control_norm(&jump, &marks).unwrap(), 1.0);
    }

    #[test]
    fn control_norm_requires_every_mark() {
        let marks = MarkSpace::new(vec![0.0, 1.0], vec![vec![1.0, 1.0]]).unwrap();
        let u = ControlValue::new(vec![], vec![vec![1.0]]);
        assert!(matches!(control_norm(&u, &marks), Err(Error::Domain(_))));
    }

    #[test]
    fn mark_space_rejects_zero_weight() {
        assert!(MarkSpace::new(vec![0.0, 1.0], vec![vec![1.0, 0.0]]).is_err());
        assert!(MarkSpace::new(vec![0.0, 0.0], vec![vec![1.0, 1.0]]).is_err());
        let m = MarkSpace::new(vec![0.0, 1.0], vec![vec![1.0, 2.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.total_mass(), 4.0);
    }

    #[test]
    fn lattice_grid_respects_radius() {
        let spec = ProblemSpec::zero(dims1(), MarkSpace::single(1.0).unwrap(), 1.0).unwrap();
        let grid = ControlGrid::lattice(&spec, 3, &[-1.0, 0.0, 1.0], false, 10.0).unwrap();
        assert_eq!(grid.len(), 27);
        let small = ControlGrid::lattice(&spec, 3, &[-1.0, 0.0, 1.0], false, 0.5).unwrap();
        assert_eq!(small.len(), 1);
        assert_eq!(small.get(0), &ControlValue::new(vec![0.0, 0.0], vec![vec![0.0]]));
    }

    #[test]
    fn grid_rejects_duplicates_and_box_violations() {
        let spec = ProblemSpec::zero(dims1(), MarkSpace::single(1.0).unwrap(), 1.0).unwrap();
        let u = ControlValue::new(vec![0.0, 0.0], vec![vec![0.0]]);
        assert!(ControlGrid::new(&spec, vec![u.clone(), u], 1.0).is_err());
        let outside = ControlValue::new(vec![2.0, 0.0], vec![vec![0.0]]);
        assert!(ControlGrid::new(&spec, vec![outside], 10.0).is_err());
    }

    #[test]
    fn exp_transform_with_zero_shift_is_identity() {
        let dims = Dims { d: 1, q: 0, n: 0, processes: 0 };
        let mut spec = ProblemSpec::zero(dims, MarkSpace::empty(), 1.0).unwrap();
        spec.coefficients.mu_y = ScalarFn::Affine(Affine::new(0.3, [(Var::Y, -1.5), (Var::X(0), 2.0)]));
        let u = ControlValue::zero(dims, 0);
        let shifted = spec.clone().with_coefficients(spec.coefficients.exp_transformed(0.0)).unwrap();
        for y in [-2.0, 0.0, 0.7] {
            assert_eq!(spec.mu_y(0.4, &[0.1], y, &u).unwrap(), shifted.mu_y(0.4, &[0.1], y, &u).unwrap());
        }
    }

    #[test]
    fn compensated_drift_subtracts_jump_mean() {
        let dims = Dims { d: 1, q: 0, n: 1, processes: 1 };
        let mut spec = ProblemSpec::zero(dims, MarkSpace::new(vec![0.0, 1.0], vec![vec![0.5, 1.5]]).unwrap(), 1.0).unwrap();
        spec.coefficients.b[0] = ScalarFn::Affine(Affine::new(0.0, [(Var::V(0), 1.0)]));
        spec.coefficients.compensated_jumps = true;
        let u = ControlValue::new(vec![], vec![vec![2.0], vec![-1.0]]);
        assert_eq!(spec.mu_y(0.0, &[0.0], 0.0, &u).unwrap(), -(2.0 * 0.5 - 1.5));
    }
}
