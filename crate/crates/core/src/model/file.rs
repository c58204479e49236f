//! TOML problem files.
//!
//! ```toml
//! horizon = 1.0
//! lipschitz = 1.0      # constant L of the growth/Lipschitz bounds
//! growth = 0.5         # optional constant C of the y-growth of μ_Y + ∫ b dm
//! g_bound = 1.0        # optional ‖g‖_∞
//!
//! [dims]
//! d = 1                # state dimension
//! q = 1                # diffusion-control dimension
//! n = 0                # jump-control dimension
//! processes = 1        # number of point processes I
//!
//! [domain]             # sampling box; u1 is also the control box U1
//! x = [[-2.0, 2.0]]
//! y = [-5.0, 5.0]
//! u1 = [[-1.0, 1.0]]
//! u2 = [-1.0, 1.0]
//!
//! [marks]
//! points = [0.0]
//! weights = [[0.5]]    # weights[i][e] = m_i({e})
//!
//! [coefficients]       # omitted entries are zero
//! compensated_jumps = false
//! mu_x = [{ constant = 0.0 }]
//! sigma_x = [[{ affine = { constant = 0.2, terms = { u0 = 1.0 } } }]]
//! beta = [[{ constant = 1.0 }]]              # one column per process
//! mu_y = { affine = { terms = { y = 0.05 } } }
//! sigma_y = [{ affine = { terms = { u0 = 0.3 } } }]
//! b = [{ table = { var = "x0", knots = [0.0, 1.0], values = [0.0, 1.0] } }]
//!
//! [payoff]
//! tanh = { amplitude = 1.0, scale = 1.0, center = 0.0 }
//! ```
//!
//! Variables are `t`, `x<i>`, `y`, `u<i>` (diffusion control), `v<i>` (jump
//! control at the current mark) and `e` (the mark). Unknown keys are errors.

use std::path::Path;

use serde::Deserialize;

use super::{Coefficients, Dims, Domain, Interval, MarkSpace, Payoff, ProblemSpec, ScalarFn};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    horizon: f64,
    #[serde(default)]
    lipschitz: f64,
    growth: Option<f64>,
    g_bound: Option<f64>,
    dims: Dims,
    #[serde(default)]
    domain: DomainFile,
    marks: Option<MarksFile>,
    #[serde(default)]
    coefficients: CoefficientsFile,
    payoff: Option<Payoff>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    x: Option<Vec<Interval>>,
    y: Option<Interval>,
    u1: Option<Vec<Interval>>,
    u2: Option<Interval>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarksFile {
    points: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientsFile {
    #[serde(default)]
    compensated_jumps: bool,
    mu_x: Option<Vec<ScalarFn>>,
    sigma_x: Option<Vec<Vec<ScalarFn>>>,
    beta: Option<Vec<Vec<ScalarFn>>>,
    mu_y: Option<ScalarFn>,
    sigma_y: Option<Vec<ScalarFn>>,
    b: Option<Vec<ScalarFn>>,
}

impl ProblemSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ProblemFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("problem file: {e}")))?;
        let dims = file.dims;
        let marks = match file.marks {
            Some(m) => MarkSpace::new(m.points, m.weights)?,
            None => MarkSpace::empty(),
        };
        let unit = Domain::unit(dims);
        let domain = Domain {
            x: file.domain.x.unwrap_or(unit.x),
            y: file.domain.y.unwrap_or(unit.y),
            u1: file.domain.u1.unwrap_or(unit.u1),
            u2: file.domain.u2.unwrap_or(unit.u2),
        };
        let c = file.coefficients;
        let mut coefficients = Coefficients::zero(dims);
        coefficients.compensated_jumps = c.compensated_jumps;
        if let Some(v) = c.mu_x {
            coefficients.mu_x = v;
        }
        if let Some(v) = c.sigma_x {
            coefficients.sigma_x = v;
        }
        if let Some(v) = c.beta {
            coefficients.beta = v;
        }
        if let Some(v) = c.mu_y {
            coefficients.mu_y = v;
        }
        if let Some(v) = c.sigma_y {
            coefficients.sigma_y = v;
        }
        if let Some(v) = c.b {
            coefficients.b = v;
        }
        let spec = ProblemSpec {
            dims,
            marks,
            coefficients,
            horizon: file.horizon,
            payoff: file.payoff.unwrap_or(Payoff::Constant(0.0)),
            g_bound: file.g_bound,
            lipschitz: file.lipschitz,
            growth: file.growth,
            domain,
        };
        spec.validate_structure()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        ProblemSpec::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlValue, Var};

    const SAMPLE: &str = r#"
horizon = 2.0
lipschitz = 1.0

[dims]
d = 1
q = 1
n = 1
processes = 1

[marks]
points = [0.0, 1.0]
weights = [[0.25, 0.75]]

[coefficients]
compensated_jumps = true
sigma_x = [[{ constant = 0.2 }]]
beta = [[{ affine = { terms = { e = 1.0 } } }]]
mu_y = { affine = { terms = { y = 0.05 } } }
sigma_y = [{ affine = { terms = { u0 = 0.3 } } }]
b = [{ affine = { terms = { v0 = 1.0 } } }]

[payoff]
tanh = { scale = 2.0 }
"#;

    #[test]
    fn parses_sample_problem() {
        let spec = ProblemSpec::from_toml_str(SAMPLE).unwrap();
        assert_eq!(spec.horizon, 2.0);
        assert_eq!(spec.marks.len(), 2);
        assert!(spec.coefficients.compensated_jumps);
        assert_eq!(spec.coefficients.mu_x[0], ScalarFn::Constant(0.0));
        let u = ControlValue::new(vec![1.0], vec![vec![0.0], vec![0.0]]);
        assert_eq!(spec.beta(0, 0.0, &[0.0], &u, 1).unwrap(), vec![1.0]);
        assert_eq!(spec.sigma_y(0.0, &[0.0], 0.0, &u).unwrap(), vec![0.3]);
        assert!((spec.g(&[0.5]).unwrap() - 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = SAMPLE.replace("horizon = 2.0", "horizon = 2.0\ncolour = 3");
        assert!(ProblemSpec::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("u0 = 0.3", "w0 = 0.3");
        assert!(ProblemSpec::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_out_of_range_variables() {
        let bad = SAMPLE.replace("terms = { u0 = 0.3 }", "terms = { u4 = 0.3 }");
        assert!(matches!(ProblemSpec::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("[payoff]\ntanh = { scale = 2.0 }", "[payoff]\naffine = { terms = { y = 1.0 } }");
        assert!(ProblemSpec::from_toml_str(&bad).is_err());
        assert_eq!(Var::X(0).to_string(), "x0");
    }
}
