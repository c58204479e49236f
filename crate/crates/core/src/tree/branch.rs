//! One-step branchings of the noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MarkSpace;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchScheme {
    /// `±√Δt` per Brownian coordinate times, per process, no jump or a jump
    /// with mark `e` (probability `min(1, m_i(E)Δt) · m_i(e)/m_i(E)`); the
    /// per-step law of the Monte Carlo engine.
    #[default]
    Product,
    /// `d + 1` simplex Brownian branches without jumps plus one branch per
    /// `(i, e)` carrying that single jump with probability `m_i(e)Δt`. It has
    /// as many branches as a martingale increment has coordinates, so every
    /// martingale on the tree is represented exactly.
    Complete,
}

/// One successor of a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub dw: Vec<f64>,
    /// `(process, mark)` pairs, in process order.
    pub jumps: Vec<(usize, usize)>,
}

/// Columns of the Helmert matrix scaled to unit covariance: `d + 1` points in
/// `ℝ^d` with zero mean and identity second moment under the uniform law.
pub fn simplex_vertices(d: usize) -> Vec<Vec<f64>> {
    let mut v = vec![vec![0.0; d]; d + 1];
    let scale = ((d + 1) as f64).sqrt();
    for r in 1..=d {
        let norm = ((r * (r + 1)) as f64).sqrt();
        for (k, vk) in v.iter_mut().enumerate() {
            let h = match k {
                k if k < r => 1.0,
                k if k == r => -(r as f64),
                _ => 0.0,
            };
            vk[r - 1] = scale * h / norm;
        }
    }
    v
}

pub fn branches(scheme: BranchScheme, d: usize, marks: &MarkSpace, dt: f64) -> Result<Vec<Branch>> {
    let sq = dt.sqrt();
    let out = match scheme {
        BranchScheme::Product => {
            let mut acc: Vec<Branch> = (0..1usize << d)
                .map(|signs| Branch {
                    prob: 0.5f64.powi(d as i32),
                    dw: (0..d).map(|j| if signs >> j & 1 == 0 { sq } else { -sq }).collect(),
                    jumps: Vec::new(),
                })
                .collect();
            for i in 0..marks.processes() {
                let mass = marks.process_mass(i);
                let p = (mass * dt).min(1.0);
                let mut next = Vec::new();
                for b in &acc {
                    next.push(Branch {
                        prob: b.prob * (1.0 - p),
                        ..b.clone()
                    });
                    for e in 0..marks.len() {
                        let mut jumps = b.jumps.clone();
                        jumps.push((i, e));
                        next.push(Branch {
                            prob: b.prob * p * marks.weight(i, e) / mass,
                            dw: b.dw.clone(),
                            jumps,
                        });
                    }
                }
                acc = next;
            }
            acc.retain(|b| b.prob > 0.0);
            acc
        }
        BranchScheme::Complete => {
            let q = 1.0 - marks.total_mass() * dt;
            if !(q > 0.0) {
                return Err(Error::config(format!(
                    "complete branching needs m(E)·Δt < 1, got {}",
                    marks.total_mass() * dt
                )));
            }
            let scale = (dt / q).sqrt();
            let mut out: Vec<Branch> = simplex_vertices(d)
                .into_iter()
                .map(|v| Branch {
                    prob: q / (d + 1) as f64,
                    dw: v.iter().map(|a| a * scale).collect(),
                    jumps: Vec::new(),
                })
                .collect();
            for i in 0..marks.processes() {
                for e in 0..marks.len() {
                    let w = marks.weight(i, e);
                    if w > 0.0 {
                        out.push(Branch {
                            prob: w * dt,
                            dw: vec![0.0; d],
                            jumps: vec![(i, e)],
                        });
                    }
                }
            }
            out
        }
    };
    let total: f64 = out.iter().map(|b| b.prob).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("branch probabilities sum to {total}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_moments() {
        for d in 1..5 {
            let v = simplex_vertices(d);
            for j in 0..d {
                let mean: f64 = v.iter().map(|p| p[j]).sum::<f64>() / (d + 1) as f64;
                assert!(mean.abs() < 1e-14);
                for l in 0..d {
                    let m: f64 = v.iter().map(|p| p[j] * p[l]).sum::<f64>() / (d + 1) as f64;
                    let want = if j == l { 1.0 } else { 0.0 };
                    assert!((m - want).abs() < 1e-14, "d = {d}");
                }
            }
        }
        assert_eq!(simplex_vertices(1), vec![vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn product_counts_and_moments() {
        let marks = MarkSpace::single(0.5).unwrap();
        let b = branches(BranchScheme::Product, 1, &marks, 0.1).unwrap();
        assert_eq!(b.len(), 4);
        let b0 = branches(BranchScheme::Product, 1, &MarkSpace::empty(), 0.1).unwrap();
        assert_eq!(b0.len(), 2);
    }

    #[test]
    fn complete_moments() {
        let marks = MarkSpace::new(vec![0.0, 1.0], vec![vec![0.5, 1.5], vec![0.25, 0.1]]).unwrap();
        let dt = 0.05;
        let b = branches(BranchScheme::Complete, 2, &marks, dt).unwrap();
        assert_eq!(b.len(), 3 + 4);
        for j in 0..2 {
            let m1: f64 = b.iter().map(|x| x.prob * x.dw[j]).sum();
            let m2: f64 = b.iter().map(|x| x.prob * x.dw[j] * x.dw[j]).sum();
            assert!(m1.abs() < 1e-15 && (m2 - dt).abs() < 1e-15);
        }
        let jump_prob: f64 = b.iter().filter(|x| x.jumps == vec![(0, 1)]).map(|x| x.prob).sum();
        assert!((jump_prob - 1.5 * dt).abs() < 1e-15);
    }

    #[test]
    fn complete_rejects_large_steps() {
        let marks = MarkSpace::single(20.0).unwrap();
        assert!(branches(BranchScheme::Complete, 1, &marks, 0.1).is_err());
    }
}
