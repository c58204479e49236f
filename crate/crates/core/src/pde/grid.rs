//! Space-time grids and value fields with multilinear interpolation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::SpatialFunction;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Coordinates are clamped to the box; ghost nodes copy the edge value.
    #[default]
    Clamp,
    /// Edge cells are extended linearly. Not monotone.
    LinearExtrapolate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

/// Uniform grid on `[0, horizon] × Π axes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeGrid {
    pub horizon: f64,
    pub n_time: usize,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub boundary: Boundary,
}

impl SpaceTimeGrid {
    pub fn new(horizon: f64, n_time: usize, axes: Vec<Axis>, boundary: Boundary) -> Result<Self> {
        let grid = SpaceTimeGrid {
            horizon,
            n_time,
            axes,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.n_time == 0 {
            return Err(Error::config("grid needs a positive horizon and at least one time step"));
        }
        if self.axes.is_empty() {
            return Err(Error::config("grid needs at least one space axis"));
        }
        for (j, a) in self.axes.iter().enumerate() {
            if a.nodes < 2 || !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::config(format!("axis {j} needs lo < hi and at least two nodes")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_time {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Multi-index of a flat node index; the first axis varies fastest.
    pub fn index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.axes
            .iter()
            .map(|a| {
                let i = rest % a.nodes;
                rest /= a.nodes;
                i
            })
            .collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.axes[..axis].iter().map(|a| a.nodes).product()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.index(node)
            .iter()
            .zip(&self.axes)
            .map(|(i, a)| a.node(*i))
            .collect()
    }

    /// `f` sampled at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|n| f(&self.coords(n))).collect()
    }

    /// Value at the neighbor `node ± 1` along `axis`, with a ghost value past the edge.
    pub fn neighbor(&self, values: &[f64], node: usize, axis: usize, forward: bool) -> f64 {
        let i = self.index(node)[axis];
        let s = self.stride(axis);
        let last = self.axes[axis].nodes - 1;
        match (forward, i) {
            (true, i) if i < last => values[node + s],
            (false, i) if i > 0 => values[node - s],
            _ => match self.boundary {
                Boundary::Clamp => values[node],
                Boundary::LinearExtrapolate => {
                    let inner = if forward { values[node - s] } else { values[node + s] };
                    2.0 * values[node] - inner
                }
            },
        }
    }

    /// Multilinear interpolation of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = 0;
        let mut weights = Vec::with_capacity(d);
        for (j, a) in self.axes.iter().enumerate() {
            let mut pos = (x[j] - a.lo) / a.spacing();
            if self.boundary == Boundary::Clamp {
                pos = pos.clamp(0.0, (a.nodes - 1) as f64);
            }
            let i0 = (pos.floor().max(0.0) as usize).min(a.nodes - 2);
            weights.push(pos - i0 as f64);
            base += i0 * self.stride(j);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut off = 0;
            for (j, wj) in weights.iter().enumerate() {
                if corner >> j & 1 == 1 {
                    w *= wj;
                    off += self.stride(j);
                } else {
                    w *= 1.0 - wj;
                }
            }
            if w != 0.0 {
                total += w * values[base + off];
            }
        }
        total
    }
}

/// Nodal values on one time slice, usable as a test function.
#[derive(Clone, Copy, Debug)]
pub struct SliceView<'a> {
    pub grid: &'a SpaceTimeGrid,
    pub values: &'a [f64],
}

impl SpatialFunction for SliceView<'_> {
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.grid.interpolate(self.values, x)
    }
}

/// Values on every time slice; `slices[k]` holds time `t_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub grid: SpaceTimeGrid,
    pub slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }

    pub fn view(&self, k: usize) -> SliceView<'_> {
        SliceView {
            grid: &self.grid,
            values: &self.slices[k],
        }
    }

    /// Spatial interpolation on slice `k`.
    pub fn at(&self, k: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.slices[k], x)
    }

    /// CSV rows `t, x0.., value` for every `every`-th time slice (terminal slice always included).
    pub fn write_csv(&self, out: impl Write, every: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.grid.dim()).map(|j| format!("x{j}")));
        header.push("value".into());
        w.write_record(&header)?;
        let every = every.max(1);
        for (k, slice) in self.slices.iter().enumerate() {
            if k % every != 0 && k != self.grid.n_time {
                continue;
            }
            let t = self.grid.time(k).to_string();
            for (n, v) in slice.iter().enumerate() {
                let mut row = vec![t.clone()];
                row.extend(self.grid.coords(n).iter().map(f64::to_string));
                row.push(v.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, every: usize) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), every)
    }
}
