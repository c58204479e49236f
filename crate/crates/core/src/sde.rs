//! Euler–Maruyama simulation of the controlled pair `(X, Y)`.
//!
//! Jumps are realized on the time grid: in each step, process `i` jumps with
//! probability `min(1, m_i(E)·Δt)` and the mark is drawn proportionally to
//! `m_i(e)`. Simultaneous jumps of distinct processes are applied in process
//! order. Every path owns an RNG stream derived from `(seed, path index)`, so
//! bundles do not depend on the number of worker threads.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ControlValue, Interval, ProblemSpec};

pub type FeedbackFn = dyn Fn(f64, &[f64], f64) -> ControlValue + Send + Sync;

/// Rule deciding when a concatenated policy switches to its second leg.
#[derive(Clone, Debug, PartialEq)]
pub enum StoppingRule {
    /// Switch in the grid step containing this time.
    Fixed(f64),
    /// Switch at the first grid time where `(x, y)` is outside the box.
    ExitBox { x: Vec<Interval>, y: Interval },
}

impl StoppingRule {
    fn triggered(&self, s_next: f64, x: &[f64], y: f64) -> bool {
        match self {
            StoppingRule::Fixed(s0) => s_next > *s0,
            StoppingRule::ExitBox { x: bx, y: by } => {
                !by.contains(y) || x.iter().zip(bx).any(|(v, iv)| !iv.contains(*v))
            }
        }
    }
}

#[derive(Clone)]
pub enum ControlPolicy {
    Constant(ControlValue),
    /// Markov policy `(s, x, y) ↦ u`.
    Feedback(Arc<FeedbackFn>),
    /// `first` strictly before `tau`, `second` from `tau` on.
    Concatenated {
        first: Box<ControlPolicy>,
        second: Box<ControlPolicy>,
        tau: StoppingRule,
    },
}

impl fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlPolicy::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            ControlPolicy::Feedback(_) => f.write_str("Feedback(..)"),
            ControlPolicy::Concatenated { first, second, tau } => f
                .debug_struct("Concatenated")
                .field("first", first)
                .field("second", second)
                .field("tau", tau)
                .finish(),
        }
    }
}

/// Concatenation `ν₁ ⊗_τ ν₂`.
pub fn concatenate(nu1: ControlPolicy, nu2: ControlPolicy, tau: StoppingRule) -> ControlPolicy {
    ControlPolicy::Concatenated {
        first: Box::new(nu1),
        second: Box::new(nu2),
        tau,
    }
}

impl ControlPolicy {
    pub fn feedback(f: impl Fn(f64, &[f64], f64) -> ControlValue + Send + Sync + 'static) -> Self {
        ControlPolicy::Feedback(Arc::new(f))
    }

    fn switches(&self) -> usize {
        match self {
            ControlPolicy::Concatenated { first, second, .. } => 1 + first.switches() + second.switches(),
            _ => 0,
        }
    }

    /// Fresh per-path state (one "stopped" flag per concatenation).
    pub fn cursor(&self) -> PolicyCursor {
        PolicyCursor(vec![false; self.switches()])
    }

    /// Control applied on the step `[s, s_next)` from state `(x, y)` at `s`.
    pub fn control(&self, cursor: &mut PolicyCursor, s: f64, s_next: f64, x: &[f64], y: f64) -> ControlValue {
        let mut slot = 0;
        self.eval(&mut cursor.0, &mut slot, s, s_next, x, y)
    }

    fn eval(&self, flags: &mut [bool], slot: &mut usize, s: f64, s_next: f64, x: &[f64], y: f64) -> ControlValue {
        match self {
            ControlPolicy::Constant(u) => u.clone(),
            ControlPolicy::Feedback(f) => f(s, x, y),
            ControlPolicy::Concatenated { first, second, tau } => {
                let me = *slot;
                *slot += 1;
                if !flags[me] && tau.triggered(s_next, x, y) {
                    flags[me] = true;
                }
                // both legs are walked so slot numbering stays stable
                let mut skip = *slot;
                if flags[me] {
                    skip += first.switches();
                    *slot = skip;
                    second.eval(flags, slot, s, s_next, x, y)
                } else {
                    let out = first.eval(flags, slot, s, s_next, x, y);
                    *slot = skip + first.switches() + second.switches();
                    out
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolicyCursor(Vec<bool>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub step: usize,
    pub time: f64,
    pub process: usize,
    pub mark: usize,
}

/// Simulated paths. Values at step `k` apply on `[t_k, t_{k+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub dim: usize,
    pub seed: u64,
    x: Vec<f64>,
    y: Vec<f64>,
    pub jumps: Vec<Vec<JumpEvent>>,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.jumps.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn x(&self, path: usize, step: usize) -> &[f64] {
        let off = (path * self.n_times() + step) * self.dim;
        &self.x[off..off + self.dim]
    }

    pub fn y(&self, path: usize, step: usize) -> f64 {
        self.y[path * self.n_times() + step]
    }

    pub fn terminal_y(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_paths()).map(move |p| self.y(p, self.n_times() - 1))
    }

    /// CSV with columns `path, step, time, x0.., y, jump0..` (jump flags per
    /// process); the first line records the seed.
    pub fn write_csv(&self, out: impl Write, processes: usize) -> Result<()> {
        let mut out = out;
        writeln!(out, "# seed={}", self.seed)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "step".into(), "time".into()];
        header.extend((0..self.dim).map(|j| format!("x{j}")));
        header.push("y".into());
        header.extend((0..processes).map(|i| format!("jump{i}")));
        w.write_record(&header)?;
        for p in 0..self.n_paths() {
            for k in 0..self.n_times() {
                let mut row = vec![p.to_string(), k.to_string(), self.times[k].to_string()];
                row.extend(self.x(p, k).iter().map(f64::to_string));
                row.push(self.y(p, k).to_string());
                for i in 0..processes {
                    // the jump realized in step k-1 shows up in the state at k
                    let hit = k > 0 && self.jumps[p].iter().any(|j| j.step + 1 == k && j.process == i);
                    row.push(if hit { "1".into() } else { "0".into() });
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, processes: usize) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), processes)
    }
}

/// One Euler step with the jump chain applied first, in process order, each
/// jump seeing the state left by the previous one; drift and diffusion are
/// evaluated at the pre-step state. `y = None` advances `X` only.
pub(crate) fn euler_step(
    spec: &ProblemSpec,
    t: f64,
    dt: f64,
    x: &[f64],
    y: Option<f64>,
    u: &ControlValue,
    dw: &[f64],
    jumps: &[(usize, usize)],
) -> Result<(Vec<f64>, f64)> {
    let mut x_run = x.to_vec();
    let mut y_run = y.unwrap_or(0.0);
    for &(i, e) in jumps {
        let beta = spec.beta(i, t, &x_run, u, e)?;
        if y.is_some() {
            y_run += spec.b(i, t, &x_run, y_run, u, e)?;
        }
        for (a, b) in x_run.iter_mut().zip(&beta) {
            *a += b;
        }
    }
    let mu = spec.mu_x(t, x, u)?;
    let sigma = spec.sigma_x(t, x, u)?;
    for (j, xj) in x_run.iter_mut().enumerate() {
        let mut inc = mu[j] * dt;
        for (k, w) in dw.iter().enumerate() {
            inc += sigma[(j, k)] * w;
        }
        *xj += inc;
    }
    if let Some(y0) = y {
        let mu_y = spec.mu_y(t, x, y0, u)?;
        let sigma_y = spec.sigma_y(t, x, y0, u)?;
        y_run += mu_y * dt + sigma_y.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok((x_run, y_run))
}

fn time_grid(t: f64, horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = (horizon - t) / n_steps as f64;
    let mut times: Vec<f64> = (0..=n_steps).map(|k| t + k as f64 * dt).collect();
    times[n_steps] = horizon;
    times
}

fn check_start(spec: &ProblemSpec, t: f64, x: &[f64], n_steps: usize) -> Result<()> {
    if !(0.0 <= t && t < spec.horizon) {
        return Err(Error::domain(format!("start time {t} outside [0, T)")));
    }
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be at least 1"));
    }
    if x.len() != spec.dims.d {
        return Err(Error::domain(format!("x has length {}, expected {}", x.len(), spec.dims.d)));
    }
    Ok(())
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

struct PathOutput {
    x: Vec<f64>,
    y: Vec<f64>,
    jumps: Vec<JumpEvent>,
}

#[allow(clippy::too_many_arguments)]
fn simulate_path(
    spec: &ProblemSpec,
    policy: &ControlPolicy,
    times: &[f64],
    x0: &[f64],
    y0: f64,
    seed: u64,
    path: usize,
    keep_all: bool,
) -> Result<PathOutput> {
    let d = spec.dims.d;
    let marks = &spec.marks;
    let jump_prob: Vec<f64> = (0..marks.processes())
        .map(|i| (marks.process_mass(i) * (times[1] - times[0])).min(1.0))
        .collect();
    let mut rng = path_rng(seed, path);
    let mut cursor = policy.cursor();
    let mut x = x0.to_vec();
    let mut y = y0;
    let mut out = PathOutput {
        x: Vec::with_capacity(if keep_all { times.len() * d } else { d }),
        y: Vec::with_capacity(if keep_all { times.len() } else { 1 }),
        jumps: Vec::new(),
    };
    if keep_all {
        out.x.extend_from_slice(&x);
        out.y.push(y);
    }
    let mut dw = vec![0.0; d];
    let mut fired = Vec::with_capacity(marks.processes());
    for k in 0..times.len() - 1 {
        let (s, s_next) = (times[k], times[k + 1]);
        let dt = s_next - s;
        let sq = dt.sqrt();
        for w in dw.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sq * z;
        }
        fired.clear();
        for (i, p) in jump_prob.iter().enumerate() {
            let occur: f64 = rng.random();
            let pick: f64 = rng.random();
            if occur < *p {
                let target = pick * marks.process_mass(i);
                let mut acc = 0.0;
                let mut mark = marks.len() - 1;
                for e in 0..marks.len() {
                    acc += marks.weight(i, e);
                    if target < acc {
                        mark = e;
                        break;
                    }
                }
                fired.push((i, mark));
                out.jumps.push(JumpEvent {
                    step: k,
                    time: s,
                    process: i,
                    mark,
                });
            }
        }
        let u = policy.control(&mut cursor, s, s_next, &x, y);
        let (xn, yn) = euler_step(spec, s, dt, &x, Some(y), &u, &dw, &fired).map_err(|e| match e {
            Error::NonFinite { what, location } => Error::NonFinite {
                what,
                location: format!("path {path}, step {k}: {location}"),
            },
            other => other,
        })?;
        x = xn;
        y = yn;
        if keep_all {
            out.x.extend_from_slice(&x);
            out.y.push(y);
        }
    }
    if !keep_all {
        out.x = x;
        out.y.push(y);
    }
    Ok(out)
}

/// Simulates `n_paths` paths of `(X, Y)` on `[t, T]` with `n_steps` Euler steps.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    spec: &ProblemSpec,
    policy: &ControlPolicy,
    t: f64,
    x: &[f64],
    y: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    check_start(spec, t, x, n_steps)?;
    let times = time_grid(t, spec.horizon, n_steps);
    let paths: Vec<PathOutput> = (0..n_paths)
        .into_par_iter()
        .map(|p| simulate_path(spec, policy, &times, x, y, seed, p, true))
        .collect::<Result<_>>()?;
    let mut bundle = PathBundle {
        times,
        dim: spec.dims.d,
        seed,
        x: Vec::with_capacity(n_paths * (n_steps + 1) * spec.dims.d),
        y: Vec::with_capacity(n_paths * (n_steps + 1)),
        jumps: Vec::with_capacity(n_paths),
    };
    for p in paths {
        bundle.x.extend(p.x);
        bundle.y.extend(p.y);
        bundle.jumps.push(p.jumps);
    }
    Ok(bundle)
}

/// Terminal states of simulated paths.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalSample {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl TerminalSample {
    /// Sample mean and standard error of `f(X_T)`.
    pub fn mean_and_stderr(&self, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let n = self.x.len() as f64;
        let vals: Vec<f64> = self.x.iter().map(|x| f(x)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// Same paths as [`simulate`] but only the terminal states are kept.
#[allow(clippy::too_many_arguments)]
pub fn simulate_terminal(
    spec: &ProblemSpec,
    policy: &ControlPolicy,
    t: f64,
    x: &[f64],
    y: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<TerminalSample> {
    check_start(spec, t, x, n_steps)?;
    let times = time_grid(t, spec.horizon, n_steps);
    let paths: Vec<PathOutput> = (0..n_paths)
        .into_par_iter()
        .map(|p| simulate_path(spec, policy, &times, x, y, seed, p, false))
        .collect::<Result<_>>()?;
    let mut sample = TerminalSample {
        x: Vec::with_capacity(n_paths),
        y: Vec::with_capacity(n_paths),
    };
    for p in paths {
        sample.x.push(p.x);
        sample.y.push(p.y[0]);
    }
    Ok(sample)
}

/// Compact region `C` of `(x, y)` checked on a lattice with `points` nodes per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityRegion {
    pub x: Vec<Interval>,
    pub y: Interval,
    pub points: usize,
}

impl AdmissibilityRegion {
    fn lattice(&self) -> Vec<(Vec<f64>, f64)> {
        let mut xs: Vec<Vec<f64>> = vec![Vec::new()];
        for iv in &self.x {
            let axis = iv.lattice(self.points);
            xs = xs
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        let ys = self.y.lattice(self.points);
        xs.iter()
            .flat_map(|x| ys.iter().map(move |y| (x.clone(), *y)))
            .collect()
    }
}

/// Checks the jump-size bound `|Σ b^⊤ λ({τ}, ·)| ≤ K` on `region` at every
/// realized jump step of `bundle`, with the control `policy` applied there.
pub fn check_admissibility(
    spec: &ProblemSpec,
    policy: &ControlPolicy,
    region: &AdmissibilityRegion,
    k: f64,
    bundle: &PathBundle,
) -> Result<bool> {
    let lattice = region.lattice();
    for p in 0..bundle.n_paths() {
        let mut cursor = policy.cursor();
        let mut events = bundle.jumps[p].iter().peekable();
        for step in 0..bundle.n_times() - 1 {
            let (s, s_next) = (bundle.times[step], bundle.times[step + 1]);
            let u = policy.control(&mut cursor, s, s_next, bundle.x(p, step), bundle.y(p, step));
            let mut fired = Vec::new();
            while let Some(ev) = events.next_if(|ev| ev.step == step) {
                fired.push(*ev);
            }
            if fired.is_empty() {
                continue;
            }
            for (x, y) in &lattice {
                let mut total = 0.0;
                for ev in &fired {
                    total += spec.b(ev.process, s, x, *y, &u, ev.mark)?;
                }
                if total.abs() > k {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Maximum over paths and grid times of `|Ỹ(s) e^{-cs} − Y(s)|`, where `Ỹ`
/// solves the exponentially transformed `Y` equation from `y` and `Y` the
/// original one from `y e^{-ct}`, both driven by the same noise.
#[allow(clippy::too_many_arguments)]
pub fn exp_transform_check(
    spec: &ProblemSpec,
    policy: &ControlPolicy,
    c: f64,
    t: f64,
    x: &[f64],
    y: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<f64> {
    if c < 0.0 {
        return Err(Error::domain("exponential shift c must be nonnegative"));
    }
    let transformed = spec
        .clone()
        .with_coefficients(spec.coefficients.exp_transformed(c))?;
    let tilde = simulate(&transformed, policy, t, x, y, n_paths, n_steps, seed)?;
    let plain = simulate(spec, policy, t, x, y * (-c * t).exp(), n_paths, n_steps, seed)?;
    let mut worst: f64 = 0.0;
    for p in 0..n_paths {
        for (k, s) in tilde.times.iter().enumerate() {
            let dev = (tilde.y(p, k) * (-c * s).exp() - plain.y(p, k)).abs();
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}
