use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rules::jacobi_symmetric;
use crate::vecmath::unit_sphere_area;

/// Default cap on the number of nodes a self-refining rule may use.
pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;

/// A positive-weight cubature rule for `dσ` on `S^{d-1}`.
///
/// Nodes are stored contiguously, `d` coordinates each.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    d: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    accuracy: Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy {
    pub level: usize,
    /// Largest change over the test battery between this rule and the previous level.
    pub error_estimate: f64,
    pub tolerance: f64,
}

impl SphereQuadrature {
    /// The tensor rule at a fixed refinement level.
    ///
    /// The innermost circle `(xi_1, xi_2)` uses `16 * 2^level` equispaced angles offset by half a
    /// step, so the rule is symmetric under `xi_1 -> -xi_1`, `xi_2 -> -xi_2` and `xi_1 <-> xi_2`.
    /// Each further coordinate `xi_k = t` is a Gauss-Jacobi node for the weight
    /// `(1 - t^2)^{(k-3)/2}` with `8 * 2^level` points.
    pub fn product(d: usize, level: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("sphere rule needs d >= 2, got {d}")));
        }
        let count = product_node_count(d, level);
        if count > DEFAULT_NODE_BUDGET * 8 {
            return Err(Error::BudgetExceeded(format!(
                "product rule d={d} level={level} would have {count} nodes"
            )));
        }
        let m = 16usize << level;
        let step = 2.0 * PI / m as f64;
        let mut nodes = Vec::with_capacity(2 * m);
        let mut weights = vec![step; m];
        for k in 0..m {
            let phi = (k as f64 + 0.5) * step;
            nodes.push(phi.cos());
            nodes.push(phi.sin());
        }
        let nt = 8usize << level;
        for dim in 3..=d {
            let rule = jacobi_symmetric(nt, 0.5 * (dim as f64 - 3.0));
            let prev = dim - 1;
            let mut next_nodes = Vec::with_capacity(nodes.len() / prev * dim * rule.len());
            let mut next_weights = Vec::with_capacity(weights.len() * rule.len());
            for &(t, wt) in &rule {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for (eta, w) in nodes.chunks_exact(prev).zip(&weights) {
                    next_nodes.extend(eta.iter().map(|e| s * e));
                    next_nodes.push(t);
                    next_weights.push(wt * w);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        Ok(SphereQuadrature {
            d,
            nodes,
            weights,
            accuracy: Accuracy {
                level,
                error_estimate: f64::NAN,
                tolerance: f64::NAN,
            },
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.d)
    }

    /// Iterates `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes().zip(self.weights.iter().copied())
    }

    pub fn accuracy(&self) -> Accuracy {
        self.accuracy
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(xi, w)| w * f(xi)).sum()
    }
}

fn product_node_count(d: usize, level: usize) -> usize {
    let mut n = 16usize << level;
    for _ in 3..=d {
        n = n.saturating_mul(8usize << level);
    }
    n
}

/// Smooth integrands bounded by 1 on the sphere used to estimate the rule error.
fn battery(d: usize) -> Vec<Box<dyn Fn(&[f64]) -> f64>> {
    let v: Vec<f64> = (0..d).map(|i| [0.3, -0.5, 0.7, 0.2][i % 4]).collect();
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    vec![
        Box::new(|xi: &[f64]| xi[0] * xi[0] * xi[1] * xi[1]),
        Box::new(move |xi: &[f64]| {
            (xi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - vn).exp()
        }),
        Box::new(move |xi: &[f64]| (3.0 * xi[0] + 2.0 * xi[d - 1]).cos()),
        Box::new(|xi: &[f64]| (xi[0] * xi[1] * 4.0).sin() * xi[2]),
    ]
}

/// Refines the product rule until two consecutive levels agree to `tolerance` on the
/// test battery, and returns the finer of the two.
pub fn sphere_quadrature(d: usize, tolerance: f64) -> Result<SphereQuadrature> {
    sphere_quadrature_with_budget(d, tolerance, DEFAULT_NODE_BUDGET)
}

pub fn sphere_quadrature_with_budget(
    d: usize,
    tolerance: f64,
    node_budget: usize,
) -> Result<SphereQuadrature> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("sphere rule needs d >= 3, got {d}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tolerance} must be positive")));
    }
    let tests = battery(d);
    let eval = |q: &SphereQuadrature| -> Vec<f64> {
        tests.iter().map(|f| q.integrate(|xi| f(xi))).collect()
    };
    let mut coarse_vals = eval(&SphereQuadrature::product(d, 0)?);
    let mut level = 1;
    loop {
        if product_node_count(d, level) > node_budget {
            return Err(Error::BudgetExceeded(format!(
                "sphere rule for d={d} cannot reach tolerance {tolerance:e} within {node_budget} nodes"
            )));
        }
        let mut fine = SphereQuadrature::product(d, level)?;
        let fine_vals = eval(&fine);
        let area_err = (fine.weights.iter().sum::<f64>() - unit_sphere_area(d)).abs();
        let err = coarse_vals
            .iter()
            .zip(&fine_vals)
            .map(|(a, b)| (a - b).abs())
            .fold(area_err, f64::max);
        if err <= tolerance {
            fine.accuracy = Accuracy {
                level,
                error_estimate: err,
                tolerance,
            };
            return Ok(fine);
        }
        coarse_vals = fine_vals;
        level += 1;
    }
}
