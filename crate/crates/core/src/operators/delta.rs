//! Lattice rendering of the boundary gap `δ = dist(0, 𝐍^c) − dist(0, 𝐍)`,
//! where `𝐍 = {(r, s) : ∃u, r = N^u, s ≤ Δ^{u,e} for all e}`.

use serde::{Deserialize, Serialize};

use super::{j_u, n_u, ControlSet, SpatialFunction, ADMISSIBILITY_TOL};
use crate::error::{Error, Result};
use crate::model::{norm, ProblemSpec};

/// Centered box `[-r_half_width, r_half_width]^d × [-s_half_width, s_half_width]`
/// sampled with `2·points_per_side + 1` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSearch {
    pub r_half_width: f64,
    pub s_half_width: f64,
    pub points_per_side: usize,
}

impl Default for DeltaSearch {
    fn default() -> Self {
        DeltaSearch {
            r_half_width: 1.0,
            s_half_width: 1.0,
            points_per_side: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaGap {
    /// `+∞` when no lattice point lies outside `𝐍`, `−∞` when none lies inside.
    pub value: f64,
    pub dist_in: f64,
    pub dist_out: f64,
    pub inside: usize,
    pub outside: usize,
    pub cell_diameter: f64,
}

/// Classifies every lattice point and returns the lattice gap. A point
/// `(r, s)` counts as inside when some control has `|N^u − r|` within half an
/// `r`-cell diagonal and `Δ^{u,e} ≥ s` on every mark.
#[allow(clippy::too_many_arguments)]
pub fn delta_gap<F: SpatialFunction>(
    t: f64,
    x: &[f64],
    y: f64,
    p: &[f64],
    phi: &F,
    search: &DeltaSearch,
    controls: ControlSet<'_>,
    spec: &ProblemSpec,
) -> Result<DeltaGap> {
    let d = spec.dims.d;
    let k = search.points_per_side;
    if k == 0 || !(search.r_half_width > 0.0) || !(search.s_half_width > 0.0) {
        return Err(Error::config("δ search box must have positive widths and resolution"));
    }
    let hr = search.r_half_width / k as f64;
    let hs = search.s_half_width / k as f64;
    let tol = 0.5 * hr * (d as f64).sqrt();
    let cell_diameter = (d as f64 * hr * hr + hs * hs).sqrt();

    let grid_points: Vec<(Vec<f64>, f64)> = match controls {
        ControlSet::Grid(g) => g
            .values()
            .iter()
            .map(|u| Ok((n_u(t, x, y, p, u, spec)?, j_u(t, x, y, u, phi, spec)?)))
            .collect::<Result<_>>()?,
        ControlSet::Spanning(_) => Vec::new(),
    };
    let member = |r: &[f64], s: f64| -> Result<bool> {
        match controls {
            ControlSet::Grid(_) => Ok(grid_points.iter().any(|(nv, jm)| {
                let gap: Vec<f64> = nv.iter().zip(r).map(|(a, b)| a - b).collect();
                norm(&gap) <= tol && *jm >= s
            })),
            ControlSet::Spanning(span) => {
                for base in 0..span.len() {
                    let u = span.candidate(spec, base, t, x, p, phi, r, s)?;
                    let nv = n_u(t, x, y, p, &u, spec)?;
                    let gap: Vec<f64> = nv.iter().zip(r).map(|(a, b)| a - b).collect();
                    if norm(&gap) <= tol && j_u(t, x, y, &u, phi, spec)? >= s - ADMISSIBILITY_TOL {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    };

    let side = 2 * k + 1;
    let total = side.pow(d as u32 + 1);
    let mut out = DeltaGap {
        value: 0.0,
        dist_in: f64::INFINITY,
        dist_out: f64::INFINITY,
        inside: 0,
        outside: 0,
        cell_diameter,
    };
    let mut r = vec![0.0; d];
    for idx in 0..total {
        let mut rest = idx;
        for rj in r.iter_mut() {
            *rj = ((rest % side) as f64 - k as f64) * hr;
            rest /= side;
        }
        let s = (rest as f64 - k as f64) * hs;
        let dist = (r.iter().map(|v| v * v).sum::<f64>() + s * s).sqrt();
        if member(&r, s)? {
            out.inside += 1;
            out.dist_in = out.dist_in.min(dist);
        } else {
            out.outside += 1;
            out.dist_out = out.dist_out.min(dist);
        }
    }
    out.value = if out.outside == 0 {
        f64::INFINITY
    } else if out.inside == 0 {
        f64::NEG_INFINITY
    } else {
        out.dist_out - out.dist_in
    };
    Ok(out)
}
