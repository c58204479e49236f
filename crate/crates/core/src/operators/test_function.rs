//! Smooth test functions with exact derivatives.

use nalgebra::DMatrix;
use rand::Rng;

/// A real function of `(t, x)` that can be sampled pointwise.
pub trait SpatialFunction: Sync {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    /// `φ(t, to) − φ(t, from)`.
    fn increment(&self, t: f64, from: &[f64], to: &[f64]) -> f64 {
        self.value(t, to) - self.value(t, from)
    }
}

impl<F: Fn(f64, &[f64]) -> f64 + Sync> SpatialFunction for F {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self(t, x)
    }
}

/// `coef · t^t_pow · Π_j x_j^{x_pows[j]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub t_pow: u32,
    pub x_pows: Vec<u32>,
}

/// Time-independent Gaussian bump `amplitude · exp(−|x − center|² / (2 width²))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

/// Polynomial in `(t, x)` plus Gaussian bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    dim: usize,
    monomials: Vec<Monomial>,
    bumps: Vec<Bump>,
}

fn pw(x: f64, k: u32, drop: u32) -> f64 {
    if k < drop {
        0.0
    } else {
        x.powi((k - drop) as i32)
    }
}

impl TestFunction {
    pub fn zero(dim: usize) -> Self {
        TestFunction {
            dim,
            monomials: Vec::new(),
            bumps: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        TestFunction::zero(dim).with_monomial(c, 0, vec![0; dim])
    }

    /// `Σ_j coefs[j] x_j`.
    pub fn linear(coefs: &[f64]) -> Self {
        let d = coefs.len();
        let mut f = TestFunction::zero(d);
        for (j, c) in coefs.iter().enumerate() {
            let mut pows = vec![0; d];
            pows[j] = 1;
            f = f.with_monomial(*c, 0, pows);
        }
        f
    }

    /// `φ(t, x) = t`.
    pub fn time(dim: usize) -> Self {
        TestFunction::zero(dim).with_monomial(1.0, 1, vec![0; dim])
    }

    pub fn with_monomial(mut self, coef: f64, t_pow: u32, x_pows: Vec<u32>) -> Self {
        assert_eq!(x_pows.len(), self.dim, "monomial dimension");
        self.monomials.push(Monomial { coef, t_pow, x_pows });
        self
    }

    pub fn with_bump(mut self, amplitude: f64, center: Vec<f64>, width: f64) -> Self {
        assert_eq!(center.len(), self.dim, "bump dimension");
        assert!(width > 0.0, "bump width must be positive");
        self.bumps.push(Bump {
            amplitude,
            center,
            width,
        });
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        self.clone().with_monomial(c, 0, vec![0; self.dim])
    }

    /// Random polynomial with `terms` monomials of total degree ≤ `degree`
    /// (time degree ≤ 2) and coefficients in `[-1, 1]`.
    pub fn random_polynomial(rng: &mut impl Rng, dim: usize, degree: u32, terms: usize) -> Self {
        let mut f = TestFunction::zero(dim);
        for _ in 0..terms {
            let mut budget = degree;
            let t_pow = rng.random_range(0..=budget.min(2));
            budget -= t_pow;
            let mut pows = vec![0; dim];
            for p in pows.iter_mut() {
                let k = rng.random_range(0..=budget);
                *p = k;
                budget -= k;
            }
            f = f.with_monomial(rng.random_range(-1.0..=1.0), t_pow, pows);
        }
        f
    }

    /// `φ` plus a random constant, linear and quadratic part and one bump, all
    /// with amplitude at most `scale`.
    pub fn perturbed(&self, rng: &mut impl Rng, scale: f64) -> Self {
        let d = self.dim;
        let mut f = self.shifted(scale * rng.random_range(-1.0..=1.0));
        for j in 0..d {
            let mut lin = vec![0; d];
            lin[j] = 1;
            f = f.with_monomial(scale * rng.random_range(-1.0..=1.0), 0, lin);
            let mut quad = vec![0; d];
            quad[j] = 2;
            f = f.with_monomial(scale * rng.random_range(-1.0..=1.0), 0, quad);
        }
        f = f.with_monomial(scale * rng.random_range(-1.0..=1.0), 1, vec![0; d]);
        let center = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        f.with_bump(scale * rng.random_range(-1.0..=1.0), center, 0.5 + rng.random::<f64>())
    }

    fn bump_parts(b: &Bump, x: &[f64]) -> (f64, Vec<f64>) {
        let diff: Vec<f64> = x.iter().zip(&b.center).map(|(a, c)| a - c).collect();
        let r2: f64 = diff.iter().map(|v| v * v).sum();
        (b.amplitude * (-r2 / (2.0 * b.width * b.width)).exp(), diff)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let poly: f64 = self
            .monomials
            .iter()
            .map(|m| m.coef * pw(t, m.t_pow, 0) * m.x_pows.iter().zip(x).map(|(k, v)| pw(*v, *k, 0)).product::<f64>())
            .sum();
        poly + self.bumps.iter().map(|b| Self::bump_parts(b, x).0).sum::<f64>()
    }

    /// `∂_t φ`.
    pub fn dt(&self, t: f64, x: &[f64]) -> f64 {
        self.monomials
            .iter()
            .map(|m| {
                m.coef
                    * m.t_pow as f64
                    * pw(t, m.t_pow, 1)
                    * m.x_pows.iter().zip(x).map(|(k, v)| pw(*v, *k, 0)).product::<f64>()
            })
            .sum()
    }

    /// `Dφ`.
    pub fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for m in &self.monomials {
            let tp = m.coef * pw(t, m.t_pow, 0);
            for (j, gj) in g.iter_mut().enumerate() {
                let mut prod = tp * m.x_pows[j] as f64;
                for (l, (k, v)) in m.x_pows.iter().zip(x).enumerate() {
                    prod *= pw(*v, *k, u32::from(l == j));
                }
                *gj += prod;
            }
        }
        for b in &self.bumps {
            let (val, diff) = Self::bump_parts(b, x);
            let w2 = b.width * b.width;
            for (gj, dj) in g.iter_mut().zip(&diff) {
                *gj -= val * dj / w2;
            }
        }
        g
    }

    /// `D²φ`.
    pub fn hessian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for m in &self.monomials {
            let tp = m.coef * pw(t, m.t_pow, 0);
            for j in 0..d {
                for l in j..d {
                    let factor = if j == l {
                        (m.x_pows[j] * m.x_pows[j].saturating_sub(1)) as f64
                    } else {
                        (m.x_pows[j] * m.x_pows[l]) as f64
                    };
                    if factor == 0.0 {
                        continue;
                    }
                    let mut prod = tp * factor;
                    for (r, (k, v)) in m.x_pows.iter().zip(x).enumerate() {
                        let drop = u32::from(r == j) + u32::from(r == l);
                        prod *= pw(*v, *k, drop);
                    }
                    h[(j, l)] += prod;
                    if j != l {
                        h[(l, j)] += prod;
                    }
                }
            }
        }
        for b in &self.bumps {
            let (val, diff) = Self::bump_parts(b, x);
            let w2 = b.width * b.width;
            for j in 0..d {
                for l in 0..d {
                    let delta = if j == l { 1.0 } else { 0.0 };
                    h[(j, l)] += val * (diff[j] * diff[l] / (w2 * w2) - delta / w2);
                }
            }
        }
        h
    }
}

impl SpatialFunction for TestFunction {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.eval(t, x)
    }

    /// Terms free of `x` are skipped, so the increment of `φ + c` is bitwise
    /// that of `φ`.
    fn increment(&self, t: f64, from: &[f64], to: &[f64]) -> f64 {
        let mono = |m: &Monomial, x: &[f64]| {
            m.coef * pw(t, m.t_pow, 0) * m.x_pows.iter().zip(x).map(|(k, v)| pw(*v, *k, 0)).product::<f64>()
        };
        let poly: f64 = self
            .monomials
            .iter()
            .filter(|m| m.x_pows.iter().any(|k| *k > 0))
            .map(|m| mono(m, to) - mono(m, from))
            .sum();
        poly + self
            .bumps
            .iter()
            .map(|b| Self::bump_parts(b, to).0 - Self::bump_parts(b, from).0)
            .sum::<f64>()
    }
}

/// Largest relative deviation of the analytic `∂_t φ`, `Dφ`, `D²φ` from central
/// differences with step `h`; deviations are scaled by `max(1, |exact|)`.
pub fn derivative_error(phi: &TestFunction, t: f64, x: &[f64], h: f64) -> f64 {
    let rel = |exact: f64, approx: f64| (exact - approx).abs() / exact.abs().max(1.0);
    let d = phi.dim();
    let mut worst = rel(phi.dt(t, x), (phi.eval(t + h, x) - phi.eval(t - h, x)) / (2.0 * h));
    let grad = phi.grad(t, x);
    let hess = phi.hessian(t, x);
    let shift = |j: usize, a: f64, l: usize, b: f64| {
        let mut z = x.to_vec();
        z[j] += a;
        z[l] += b;
        phi.eval(t, &z)
    };
    for j in 0..d {
        let fd = (shift(j, h, j, 0.0) - shift(j, -h, j, 0.0)) / (2.0 * h);
        worst = worst.max(rel(grad[j], fd));
        for l in 0..d {
            let fd2 = if j == l {
                (shift(j, h, j, 0.0) - 2.0 * phi.eval(t, x) + shift(j, -h, j, 0.0)) / (h * h)
            } else {
                (shift(j, h, l, h) - shift(j, h, l, -h) - shift(j, -h, l, h) + shift(j, -h, l, -h)) / (4.0 * h * h)
            };
            worst = worst.max(rel(hess[(j, l)], fd2));
        }
    }
    worst
}
