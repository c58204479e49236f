//! Named built-in coefficient and payoff evaluators.
//!
//! Every coefficient of the controlled pair (X, Y) is a scalar function of the
//! evaluation point `(t, x, y, u1, v, e)` where `v = u2(e)` is the jump-control
//! slice at mark `e`. Built-ins are constants, affine forms and piecewise-linear
//! tables in a single variable.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

/// A named input of a coefficient evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Var {
    T,
    X(usize),
    Y,
    /// Component of the diffusion control `u1`.
    U(usize),
    /// Component of the jump control slice `u2(e)`.
    V(usize),
    E,
}

impl FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let indexed = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| Error::config(format!("bad variable name `{s}`")))
        };
        match s {
            "t" => Ok(Var::T),
            "y" => Ok(Var::Y),
            "e" => Ok(Var::E),
            _ if s.len() > 1 => match &s[..1] {
                "x" => indexed(&s[1..]).map(Var::X),
                "u" => indexed(&s[1..]).map(Var::U),
                "v" => indexed(&s[1..]).map(Var::V),
                _ => Err(Error::config(format!("unknown variable `{s}`"))),
            },
            _ => Err(Error::config(format!("unknown variable `{s}`"))),
        }
    }
}

impl TryFrom<String> for Var {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::X(i) => write!(f, "x{i}"),
            Var::Y => write!(f, "y"),
            Var::U(i) => write!(f, "u{i}"),
            Var::V(i) => write!(f, "v{i}"),
            Var::E => write!(f, "e"),
        }
    }
}

/// Evaluation point for a coefficient.
#[derive(Clone, Copy, Debug)]
pub struct Args<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: f64,
    pub u1: &'a [f64],
    pub v: &'a [f64],
    pub e: f64,
}

impl<'a> Args<'a> {
    pub fn new(t: f64, x: &'a [f64]) -> Self {
        Args {
            t,
            x,
            y: 0.0,
            u1: &[],
            v: &[],
            e: 0.0,
        }
    }

    fn get(&self, var: Var) -> f64 {
        match var {
            Var::T => self.t,
            Var::X(i) => self.x[i],
            Var::Y => self.y,
            Var::U(i) => self.u1[i],
            Var::V(i) => self.v[i],
            Var::E => self.e,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: BTreeMap<Var, f64>,
}

impl Affine {
    pub fn new(constant: f64, terms: impl IntoIterator<Item = (Var, f64)>) -> Self {
        Affine {
            constant,
            terms: terms.into_iter().collect(),
        }
    }
}

/// Piecewise-linear interpolation in one variable, constant beyond the end knots.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub var: Var,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(var: Var, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = Table { var, knots, values };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        if self.knots.is_empty() || self.knots.len() != self.values.len() {
            return Err(Error::config("table needs matching, nonempty knots and values"));
        }
        if self.knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("table knots must be strictly increasing"));
        }
        Ok(())
    }

    fn interpolate(&self, s: f64) -> f64 {
        let k = &self.knots;
        if s <= k[0] {
            return self.values[0];
        }
        let last = k.len() - 1;
        if s >= k[last] {
            return self.values[last];
        }
        let j = k.partition_point(|&knot| knot <= s) - 1;
        let w = (s - k[j]) / (k[j + 1] - k[j]);
        self.values[j] + w * (self.values[j + 1] - self.values[j])
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalarFn {
    Constant(f64),
    Affine(Affine),
    Table(Table),
}

impl Default for ScalarFn {
    fn default() -> Self {
        ScalarFn::Constant(0.0)
    }
}

impl ScalarFn {
    pub fn zero() -> Self {
        ScalarFn::Constant(0.0)
    }

    pub fn eval(&self, args: &Args<'_>) -> f64 {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::Affine(a) => a
                .terms
                .iter()
                .fold(a.constant, |acc, (var, w)| acc + w * args.get(*var)),
            ScalarFn::Table(table) => table.interpolate(args.get(table.var)),
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        match self {
            ScalarFn::Constant(_) => Vec::new(),
            ScalarFn::Affine(a) => a.terms.keys().copied().collect(),
            ScalarFn::Table(t) => vec![t.var],
        }
    }

    /// True when the function is affine in `y` (tables over `y` are not).
    pub fn affine_in_y(&self) -> bool {
        !matches!(self, ScalarFn::Table(t) if t.var == Var::Y)
    }

    pub fn nondecreasing_in(&self, var: Var) -> bool {
        match self {
            ScalarFn::Constant(_) => true,
            ScalarFn::Affine(a) => a.terms.get(&var).is_none_or(|w| *w >= 0.0),
            ScalarFn::Table(t) => t.var != var || t.values.windows(2).all(|w| w[1] >= w[0]),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Constant(c) => *c == 0.0,
            ScalarFn::Affine(a) => a.constant == 0.0 && a.terms.values().all(|w| *w == 0.0),
            ScalarFn::Table(t) => t.values.iter().all(|v| *v == 0.0),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            ScalarFn::Table(t) => t.check(),
            _ => Ok(()),
        }
    }
}

/// Problem dimensions: state `d`, diffusion control `q`, jump control `n`, point processes `I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d: usize,
    #[serde(default)]
    pub q: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub processes: usize,
}

/// Coefficients of the controlled jump diffusion.
///
/// `beta[i]` is the column `β_i` (length `d`) and `b[i]` the entry `b_i`.
/// With `compensated_jumps` the drift of `Y` carries `-Σ_i Σ_e b_i m_i(e)`,
/// which turns `∫ b λ(ds, de)` into an integral against the compensated measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub mu_x: Vec<ScalarFn>,
    pub sigma_x: Vec<Vec<ScalarFn>>,
    pub beta: Vec<Vec<ScalarFn>>,
    pub mu_y: ScalarFn,
    pub sigma_y: Vec<ScalarFn>,
    pub b: Vec<ScalarFn>,
    pub compensated_jumps: bool,
    exp_shift: f64,
}

impl Coefficients {
    pub fn zero(dims: Dims) -> Self {
        Coefficients {
            mu_x: vec![ScalarFn::zero(); dims.d],
            sigma_x: vec![vec![ScalarFn::zero(); dims.d]; dims.d],
            beta: vec![vec![ScalarFn::zero(); dims.d]; dims.processes],
            mu_y: ScalarFn::zero(),
            sigma_y: vec![ScalarFn::zero(); dims.d],
            b: vec![ScalarFn::zero(); dims.processes],
            compensated_jumps: false,
            exp_shift: 0.0,
        }
    }

    /// Exponential change of variables `Ỹ = e^{cs} Y`: the returned coefficients
    /// evaluate `μ̃_Y = c y + e^{ct} μ_Y(t, x, e^{-ct} y, u)`, `σ̃_Y = e^{ct} σ_Y(..)`
    /// and `b̃ = e^{ct} b(..)`. Repeated application composes the shifts.
    pub fn exp_transformed(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.exp_shift += c;
        out
    }

    pub fn exp_shift(&self) -> f64 {
        self.exp_shift
    }

    /// True when every `Y` coefficient is affine in `y`.
    pub fn affine_in_y(&self) -> bool {
        self.mu_y.affine_in_y()
            && self.sigma_y.iter().all(ScalarFn::affine_in_y)
            && self.b.iter().all(ScalarFn::affine_in_y)
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        let shape = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::config(format!("{name} has {got} entries, expected {want}")))
            }
        };
        shape("mu_x", self.mu_x.len(), dims.d)?;
        shape("sigma_x", self.sigma_x.len(), dims.d)?;
        for row in &self.sigma_x {
            shape("sigma_x row", row.len(), dims.d)?;
        }
        shape("beta", self.beta.len(), dims.processes)?;
        for col in &self.beta {
            shape("beta column", col.len(), dims.d)?;
        }
        shape("sigma_y", self.sigma_y.len(), dims.d)?;
        shape("b", self.b.len(), dims.processes)?;

        let allowed = |name: &str, f: &ScalarFn, y: bool, jump: bool| -> Result<()> {
            f.check()?;
            for var in f.vars() {
                let ok = match var {
                    Var::T => true,
                    Var::X(i) => i < dims.d,
                    Var::U(i) => i < dims.q,
                    Var::Y => y,
                    Var::V(i) => jump && i < dims.n,
                    Var::E => jump,
                };
                if !ok {
                    return Err(Error::config(format!("{name} may not depend on `{var}`")));
                }
            }
            Ok(())
        };
        for f in self.mu_x.iter().chain(self.sigma_x.iter().flatten()) {
            allowed("mu_x/sigma_x", f, false, false)?;
        }
        for f in self.beta.iter().flatten() {
            allowed("beta", f, false, true)?;
        }
        allowed("mu_y", &self.mu_y, true, false)?;
        for f in &self.sigma_y {
            allowed("sigma_y", f, true, false)?;
        }
        for f in &self.b {
            allowed("b", f, true, true)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tanh {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub component: usize,
}

fn one() -> f64 {
    1.0
}

/// Terminal target `g(x)`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Payoff {
    Constant(f64),
    Affine(Affine),
    Table(Table),
    /// `amplitude · tanh(scale · (x_component − center))`
    Tanh(Tanh),
}

impl Payoff {
    pub fn tanh() -> Self {
        Payoff::Tanh(Tanh {
            amplitude: 1.0,
            scale: 1.0,
            center: 0.0,
            component: 0,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let args = Args::new(0.0, x);
        match self {
            Payoff::Constant(c) => *c,
            Payoff::Affine(a) => ScalarFn::Affine(a.clone()).eval(&args),
            Payoff::Table(t) => t.interpolate(args.get(t.var)),
            Payoff::Tanh(h) => h.amplitude * (h.scale * (x[h.component] - h.center)).tanh(),
        }
    }

    pub(crate) fn validate(&self, d: usize) -> Result<()> {
        let vars = match self {
            Payoff::Constant(_) => Vec::new(),
            Payoff::Affine(a) => a.terms.keys().copied().collect(),
            Payoff::Table(t) => {
                t.check()?;
                vec![t.var]
            }
            Payoff::Tanh(h) => vec![Var::X(h.component)],
        };
        for var in vars {
            if !matches!(var, Var::X(i) if i < d) {
                return Err(Error::config(format!("payoff may not depend on `{var}`")));
            }
        }
        Ok(())
    }
}
