//! Finite surrogate of the relaxed semi-limits `H^*` and `H_*`.
//!
//! The limsup/liminf over `ε ↓ 0`, `η → 0`, `Θ′ → Θ` and `ψ → φ` is replaced by
//! a max/min over a finite index set: every `(ε, η)` pair of the schedule,
//! combined with the unperturbed `(Θ, φ)` and, for every perturbation level,
//! `samples` random `(Θ′, ψ)` with `|Θ′ − Θ|_∞ ≤ radius` and `ψ − φ` of
//! amplitude at most `scale`. Perturbations at a level depend only on the seed
//! and that level's `(radius, scale)`, so [`SemiLimitSchedule::refined`] yields
//! a subset of the index set: the upper value can only decrease and the lower
//! value only increase under refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{h_eps_eta, ControlSet, TestFunction, Theta};
use crate::error::{Error, Result};
use crate::model::ProblemSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiLimitSchedule {
    /// Strictly decreasing, positive.
    pub eps: Vec<f64>,
    /// Entries in `[-1, 1]` with strictly decreasing `|η|` and a nonzero last
    /// entry; either sign is allowed so that both sides of `η = 0` are probed.
    pub eta: Vec<f64>,
    /// Strictly decreasing, positive; paired index-wise with `phi_scales`.
    pub theta_radii: Vec<f64>,
    pub phi_scales: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

fn strictly_decreasing_positive(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(format!("{name} is empty")));
    }
    if v.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::config(format!("{name} entries must be positive")));
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SemiLimitSchedule {
    pub fn validate(&self) -> Result<()> {
        strictly_decreasing_positive("eps", &self.eps)?;
        strictly_decreasing_positive("theta_radii", &self.theta_radii)?;
        strictly_decreasing_positive("phi_scales", &self.phi_scales)?;
        if self.theta_radii.len() != self.phi_scales.len() {
            return Err(Error::config("theta_radii and phi_scales differ in length"));
        }
        if self.eta.is_empty() || self.eta.iter().any(|a| !(a.abs() <= 1.0)) {
            return Err(Error::config("eta entries must lie in [-1, 1]"));
        }
        if self.eta.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
            return Err(Error::config("|eta| must be strictly decreasing"));
        }
        if self.eta[self.eta.len() - 1] == 0.0 {
            return Err(Error::config("the last eta entry must be nonzero"));
        }
        Ok(())
    }

    pub fn final_eps(&self) -> f64 {
        self.eps[self.eps.len() - 1]
    }

    pub fn final_eta(&self) -> f64 {
        self.eta[self.eta.len() - 1]
    }

    /// Drops the coarsest entry of every list that has more than one.
    pub fn refined(&self) -> Option<Self> {
        let drop = |v: &Vec<f64>| if v.len() > 1 { v[1..].to_vec() } else { v.clone() };
        let next = SemiLimitSchedule {
            eps: drop(&self.eps),
            eta: drop(&self.eta),
            theta_radii: drop(&self.theta_radii),
            phi_scales: drop(&self.phi_scales),
            ..self.clone()
        };
        (next != *self).then_some(next)
    }

    fn sample_rng(&self, radius: f64, scale: f64, j: usize) -> ChaCha8Rng {
        let key = mix(self.seed ^ mix(radius.to_bits() ^ mix(scale.to_bits() ^ mix(j as u64))));
        ChaCha8Rng::seed_from_u64(key)
    }
}

fn perturb_theta(theta: &Theta, rng: &mut impl Rng, r: f64, horizon: f64) -> Theta {
    let mut z = || r * rng.random_range(-1.0..=1.0);
    let t = (theta.t + z()).clamp(0.0, horizon);
    let x = theta.x.iter().map(|v| v + z()).collect();
    let y = theta.y + z();
    let p = theta.p.iter().map(|v| v + z()).collect();
    let d = theta.x.len();
    let mut a = theta.a.clone();
    for j in 0..d {
        for k in 0..=j {
            let w = z();
            a[(j, k)] += w;
            if j != k {
                a[(k, j)] += w;
            }
        }
    }
    Theta { t, x, y, p, a }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiLimits {
    pub upper: f64,
    pub lower: f64,
    /// Number of `H_{ε,η}` evaluations.
    pub evaluations: usize,
    /// Evaluations whose admissible set was empty.
    pub empty: usize,
}

/// Max and min of `H_{ε,η}` over the schedule's index set.
pub fn semi_limits(
    theta: &Theta,
    phi: &TestFunction,
    schedule: &SemiLimitSchedule,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> Result<SemiLimits> {
    schedule.validate()?;
    let mut points = vec![(theta.clone(), phi.clone())];
    for (&r, &s) in schedule.theta_radii.iter().zip(&schedule.phi_scales) {
        for j in 0..schedule.samples {
            let mut rng = schedule.sample_rng(r, s, j);
            let th = perturb_theta(theta, &mut rng, r, spec.horizon);
            let psi = phi.perturbed(&mut rng, s);
            points.push((th, psi));
        }
    }
    let mut out = SemiLimits {
        upper: f64::NEG_INFINITY,
        lower: f64::INFINITY,
        evaluations: 0,
        empty: 0,
    };
    for (th, psi) in &points {
        for &eps in &schedule.eps {
            for &eta in &schedule.eta {
                let h = h_eps_eta(th, psi, eps, eta, controls, spec)?;
                out.upper = out.upper.max(h.value);
                out.lower = out.lower.min(h.value);
                out.evaluations += 1;
                if h.admissible == 0 {
                    out.empty += 1;
                }
            }
        }
    }
    Ok(out)
}

pub fn h_upper(
    theta: &Theta,
    phi: &TestFunction,
    schedule: &SemiLimitSchedule,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> Result<f64> {
    Ok(semi_limits(theta, phi, schedule, controls, spec)?.upper)
}

pub fn h_lower(
    theta: &Theta,
    phi: &TestFunction,
    schedule: &SemiLimitSchedule,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> Result<f64> {
    Ok(semi_limits(theta, phi, schedule, controls, spec)?.lower)
}
