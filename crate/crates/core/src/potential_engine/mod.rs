//! Potentials `∫ K(x - y) dmu^m(y)`, their truncations and annular pieces, evaluated leaf by
//! leaf or hierarchically with mass-matched uniform surrogates for far nodes, together with the
//! uniform-ball integrals and their closed form.

mod shell;
mod tree;

pub use shell::{annulus_uniform_oracle, ball_lebesgue_integral, shell_ball_integral};
pub use tree::{
    annulus_integral, annulus_treecode, nearest_leaf, potential_breakdown, potential_direct,
    potential_treecode, ring_decomposition, truncated_sio, Anchor, RingDecomposition,
    DEFAULT_LEAF_BUDGET,
};

use serde::Serialize;

use crate::error::{check_dim, Result};
use crate::sphere_kernel::{symmetry_report, MomentMatrix, SphericalKernel};

/// Accuracy controls for every Lebesgue integral over a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral being computed. Measure-level routines rescale it so
    /// that the sum over leaves stays below this value in units of total mass.
    pub tolerance: f64,
    pub max_refinement: usize,
    pub mc_fallback_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            tolerance: 1e-10,
            max_refinement: 9,
            mc_fallback_samples: 200_000,
            seed: 0,
        }
    }
}

/// One Lebesgue integral with its estimated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: u64,
    /// Set when the deterministic rule did not converge and Monte Carlo was used; the error is
    /// then a three-sigma estimate.
    pub statistical: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
            statistical: false,
        }
    }
}

/// Sup norm and Hoelder seminorm of `Omega`, the two constants in the far-field error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub sup_norm: f64,
    pub holder: f64,
    pub alpha: f64,
}

impl KernelConstants {
    /// Sampled estimate with a fixed seed, so repeated calls agree.
    pub fn estimate(kernel: &SphericalKernel) -> Self {
        let r = symmetry_report(kernel, 40_000, 0x5eed);
        KernelConstants {
            sup_norm: r.sup_norm,
            holder: r.holder_quotient,
            alpha: kernel.alpha(),
        }
    }

    pub fn holder_norm(&self) -> f64 {
        self.sup_norm + self.holder
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreecodeConfig {
    /// A node at level `k` is admissible when `dist(x, cube) >= eta * s_k`.
    pub eta: f64,
    /// Multiplies the far-field bound by four.
    pub rigorous: bool,
    /// Kernel constants; estimated from the kernel when absent.
    pub constants: Option<KernelConstants>,
}

impl Default for TreecodeConfig {
    fn default() -> Self {
        TreecodeConfig {
            eta: 0.125,
            rigorous: false,
            constants: None,
        }
    }
}

impl TreecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.125) {
            return Err(crate::Error::InvalidArgument(format!(
                "admissibility factor {} below 1/8",
                self.eta
            )));
        }
        Ok(())
    }

    pub(crate) fn safety(&self) -> f64 {
        if self.rigorous {
            4.0
        } else {
            1.0
        }
    }
}

/// A potential value with its error bound and cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub kernel_evals: u64,
    /// Contribution grouped by how long a node's path agrees with the anchor leaf's path:
    /// entry `j < m` is the mass in the anchor's level-`j` ancestor but outside its level-`j+1`
    /// ancestor; entry `m` is the anchor leaf itself. A single entry when there is no anchor.
    pub breakdown: Vec<f64>,
    pub surrogate_nodes: u64,
    pub exact_leaves: u64,
    /// Some Lebesgue integral fell back to Monte Carlo.
    pub statistical: bool,
}

/// `x^T M x` on the unit ball; for `B(c, R)` the value is `R^2 u^T M u` with `u = (x - c)/R`.
///
/// For even `Omega` with zero mean this equals `∫_{B(0,1)} K(x - y) dy` for `|x| <= 1`.
pub fn reflectionless_closed_form(m: &MomentMatrix, x: &[f64]) -> Result<f64> {
    check_dim(m.d, x.len())?;
    Ok(m.quadratic_form(x))
}

/// `∫_{B(0,1)} K(x - y) dy`.
pub fn reflectionless_integral(
    kernel: &SphericalKernel,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let origin = vec![0.0; kernel.d()];
    ball_lebesgue_integral(kernel, &origin, 1.0, x, spec)
}
