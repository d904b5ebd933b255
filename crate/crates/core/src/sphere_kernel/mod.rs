//! Even angular profiles on the sphere, the induced `(d-2)`-homogeneous kernels and
//! spherical integrals against them.

mod kernel;
mod quadrature;

pub use kernel::{
    eval_kernel, make_example_kernel, make_monomial_kernel, make_quadratic_kernel,
    make_zero_kernel, PhiProfile, SphericalKernel,
};
pub use quadrature::{
    sphere_quadrature, sphere_quadrature_with_budget, Accuracy, SphereQuadrature,
    DEFAULT_NODE_BUDGET,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::vecmath::{dist, norm, Coords};

/// A unit vector in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Coords);

impl Direction {
    /// Normalises `v`; fails on the zero vector.
    pub fn new(v: &[f64]) -> Result<Self> {
        let n = norm(v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalise a zero or non-finite vector".into()));
        }
        Ok(Direction(v.iter().map(|x| x / n).collect()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }
}

/// Uniformly distributed direction.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Coords {
    loop {
        let g: Coords = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-12 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}

/// `M_ij = ∫ xi_i xi_j Omega(xi) dσ(xi)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentMatrix {
    pub d: usize,
    pub entries: Vec<f64>,
}

impl MomentMatrix {
    pub fn zeros(d: usize) -> Self {
        MomentMatrix {
            d,
            entries: vec![0.0; d * d],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                s += x[i] * self.get(i, j) * x[j];
            }
        }
        s
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.entries.chunks_exact(self.d)
    }
}

/// `Σ w_i Omega(node_i)`.
pub fn mean_integral(kernel: &SphericalKernel, quad: &SphereQuadrature) -> Result<f64> {
    check_dim(kernel.d(), quad.d())?;
    Ok(quad.integrate(|xi| kernel.omega(xi)))
}

/// Second-moment matrix. Only the upper triangle is accumulated and then mirrored,
/// so the result is exactly symmetric.
pub fn moment_matrix(kernel: &SphericalKernel, quad: &SphereQuadrature) -> Result<MomentMatrix> {
    check_dim(kernel.d(), quad.d())?;
    let d = kernel.d();
    let mut m = MomentMatrix::zeros(d);
    let mut upper = vec![0.0; d * (d + 1) / 2];
    for (xi, w) in quad.iter() {
        let wo = w * kernel.omega(xi);
        if wo == 0.0 {
            continue;
        }
        let mut k = 0;
        for i in 0..d {
            let a = wo * xi[i];
            for j in i..d {
                upper[k] += a * xi[j];
                k += 1;
            }
        }
    }
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m.entries[i * d + j] = upper[k];
            m.entries[j * d + i] = upper[k];
            k += 1;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `max |Omega(xi) - Omega(-xi)|` over the samples.
    pub evenness_defect: f64,
    /// `max |Omega(w) - Omega(xi)| / |w - xi|^alpha` over the sampled pairs.
    pub holder_quotient: f64,
    /// `max |Omega(xi)|` over the samples.
    pub sup_norm: f64,
}

impl SymmetryReport {
    /// Sampled `C^alpha` norm: sup plus Hoelder seminorm.
    pub fn holder_norm(&self) -> f64 {
        self.sup_norm + self.holder_quotient
    }
}

/// Samples evenness, the Hoelder quotient and the sup norm of `Omega`.
///
/// Half of the pairs are independent uniform directions; the other half are close pairs at
/// log-uniform separations in `[1e-4, 1]`, which is where the quotient of a Lipschitz profile
/// is largest.
pub fn symmetry_report(kernel: &SphericalKernel, n_samples: usize, seed: u64) -> SymmetryReport {
    let d = kernel.d();
    let alpha = kernel.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SymmetryReport {
        evenness_defect: 0.0,
        holder_quotient: 0.0,
        sup_norm: 0.0,
    };
    let mut neg = Coords::from_elem(0.0, d);
    for i in 0..n_samples.max(1) {
        let xi = random_direction(&mut rng, d);
        for (n, x) in neg.iter_mut().zip(&xi) {
            *n = -x;
        }
        let o = kernel.omega(&xi);
        report.sup_norm = report.sup_norm.max(o.abs());
        report.evenness_defect = report.evenness_defect.max((o - kernel.omega(&neg)).abs());
        let other: Coords = if i % 2 == 0 {
            random_direction(&mut rng, d)
        } else {
            let h = 10f64.powf(-4.0 * rng.random::<f64>());
            let t = random_direction(&mut rng, d);
            let v: Coords = xi.iter().zip(&t).map(|(a, b)| a + h * b).collect();
            let n = norm(&v);
            v.iter().map(|x| x / n).collect()
        };
        let r = dist(&xi, &other);
        if r > 0.0 {
            let q = (kernel.omega(&other) - o).abs() / r.powf(alpha);
            report.holder_quotient = report.holder_quotient.max(q);
        }
    }
    report
}
