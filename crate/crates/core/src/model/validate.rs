use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{control_norm, norm, ControlValue, ProblemSpec};
use crate::error::Result;

/// Relative slack allowed on finite-difference Lipschitz ratios.
const LIPSCHITZ_SLACK: f64 = 1e-6;
/// Relative round-off allowance on the growth bounds.
const GROWTH_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// `|μ_X| + |σ_X| ≤ L(1 + |x| + ‖u‖)`
    GrowthX,
    /// `|μ_Y| + |σ_Y| ≤ L(1 + |y| + ‖u‖)`
    GrowthY,
    LipschitzMuX,
    LipschitzSigmaX,
    LipschitzMuY,
    LipschitzSigmaY,
    PayoffBound,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::GrowthX => "growth_x",
            ViolationKind::GrowthY => "growth_y",
            ViolationKind::LipschitzMuX => "lipschitz_mu_x",
            ViolationKind::LipschitzSigmaX => "lipschitz_sigma_x",
            ViolationKind::LipschitzMuY => "lipschitz_mu_y",
            ViolationKind::LipschitzSigmaY => "lipschitz_sigma_y",
            ViolationKind::PayoffBound => "payoff_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    pub u_norm: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

fn sample_control(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> ControlValue {
    let u1 = spec
        .domain
        .u1
        .iter()
        .map(|iv| if iv.lo < iv.hi { rng.random_range(iv.lo..=iv.hi) } else { iv.lo })
        .collect();
    let iv = spec.domain.u2;
    let u2 = (0..spec.marks.len())
        .map(|_| {
            (0..spec.dims.n)
                .map(|_| if iv.lo < iv.hi { rng.random_range(iv.lo..=iv.hi) } else { iv.lo })
                .collect()
        })
        .collect();
    ControlValue::new(u1, u2)
}

fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Spot-checks the growth and Lipschitz bounds of the coefficients on
/// `n_samples` random points of the configured domain box.
///
/// Violations are collected in the report rather than returned as errors.
pub fn validate_problem(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = spec.lipschitz;
    let mut report = ValidationReport {
        samples: n_samples,
        violations: Vec::new(),
    };
    for _ in 0..n_samples {
        let t = sample_in(&mut rng, 0.0, spec.horizon);
        let x: Vec<f64> = spec.domain.x.iter().map(|iv| sample_in(&mut rng, iv.lo, iv.hi)).collect();
        let y = sample_in(&mut rng, spec.domain.y.lo, spec.domain.y.hi);
        let u = sample_control(spec, &mut rng);
        let un = control_norm(&u, &spec.marks)?;
        let mut record = |kind, value: f64, bound: f64| {
            if value > bound * (1.0 + GROWTH_SLACK) {
                report.violations.push(Violation {
                    kind,
                    t,
                    x: x.clone(),
                    y,
                    u_norm: un,
                    value,
                    bound,
                });
            }
        };

        let mu_x = spec.mu_x(t, &x, &u)?;
        let sigma_x = spec.sigma_x(t, &x, &u)?;
        let mu_y = spec.mu_y(t, &x, y, &u)?;
        let sigma_y = spec.sigma_y(t, &x, y, &u)?;
        record(
            ViolationKind::GrowthX,
            norm(&mu_x) + sigma_x.norm(),
            l * (1.0 + norm(&x) + un),
        );
        record(
            ViolationKind::GrowthY,
            mu_y.abs() + norm(&sigma_y),
            l * (1.0 + y.abs() + un),
        );

        // finite-difference ratios along a random direction in z = (x, y)
        let dir: Vec<f64> = (0..=spec.dims.d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let dn = norm(&dir).max(f64::MIN_POSITIVE);
        let z_scale = 1.0 + norm(&x) + y.abs();
        let h = 1e-4 * z_scale;
        let step: Vec<f64> = dir.iter().map(|v| v / dn * h).collect();
        let x2: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
        let y2 = y + step[spec.dims.d];
        let dx = norm(&step[..spec.dims.d]);
        let dz = norm(&step);
        let lip = l * (1.0 + LIPSCHITZ_SLACK);
        if dx > 0.0 {
            let mu_x2 = spec.mu_x(t, &x2, &u)?;
            let diff: Vec<f64> = mu_x2.iter().zip(&mu_x).map(|(a, b)| a - b).collect();
            record(ViolationKind::LipschitzMuX, norm(&diff) / dx, lip);
            let sigma_x2 = spec.sigma_x(t, &x2, &u)?;
            record(ViolationKind::LipschitzSigmaX, (sigma_x2 - &sigma_x).norm() / dx, lip);
        }
        let mu_y2 = spec.mu_y(t, &x2, y2, &u)?;
        record(ViolationKind::LipschitzMuY, (mu_y2 - mu_y).abs() / dz, lip);
        let sigma_y2 = spec.sigma_y(t, &x2, y2, &u)?;
        let diff: Vec<f64> = sigma_y2.iter().zip(&sigma_y).map(|(a, b)| a - b).collect();
        record(ViolationKind::LipschitzSigmaY, norm(&diff) / dz, lip);

        if let Some(bound) = spec.g_bound {
            record(ViolationKind::PayoffBound, spec.g(&x)?.abs(), bound);
        }
    }
    Ok(report)
}
