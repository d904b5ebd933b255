use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{check_dim, Error, Result};
use crate::vecmath::norm2;

/// Radial profile `phi` on `[0, 1]` used by the quadrant-glued example kernel.
#[derive(Clone)]
pub enum PhiProfile {
    /// `(1 - t)^p`, `p >= 1`.
    Power(f64),
    /// `a + b t`. Only valid when `a + b = 0`; exists so that bad profiles can be named in configs.
    Affine { a: f64, b: f64 },
    Custom {
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl Default for PhiProfile {
    fn default() -> Self {
        PhiProfile::Power(2.0)
    }
}

impl fmt::Debug for PhiProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhiProfile({})", self.label())
    }
}

impl PhiProfile {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            PhiProfile::Power(p) => {
                let u = 1.0 - t;
                if *p == 2.0 {
                    u * u
                } else {
                    u.powf(*p)
                }
            }
            PhiProfile::Affine { a, b } => a + b * t,
            PhiProfile::Custom { f, .. } => f(t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PhiProfile::Power(p) => format!("power:{p}"),
            PhiProfile::Affine { a, b } => format!("affine:{a},{b}"),
            PhiProfile::Custom { label, .. } => label.clone(),
        }
    }

    /// Parses `power:p` or `affine:a,b`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidKernel(format!("unrecognised phi profile `{s}`"));
        if let Some(rest) = s.strip_prefix("power:") {
            let p: f64 = rest.trim().parse().map_err(|_| bad())?;
            return Ok(PhiProfile::Power(p));
        }
        if let Some(rest) = s.strip_prefix("affine:") {
            let mut it = rest.split(',');
            let a: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let b: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            if it.next().is_some() {
                return Err(bad());
            }
            return Ok(PhiProfile::Affine { a, b });
        }
        Err(bad())
    }

    fn validate(&self) -> Result<()> {
        if let PhiProfile::Power(p) = self {
            if !(p.is_finite() && *p >= 1.0) {
                return Err(Error::InvalidKernel(format!(
                    "phi = (1-t)^{p} is not C^1 on [0,1] (need p >= 1)"
                )));
            }
        }
        let at_one = self.eval(1.0);
        if !at_one.is_finite() || at_one.abs() > 1e-12 {
            return Err(Error::InvalidKernel(format!(
                "phi(1) = {at_one}, must vanish or the kernel jumps across the quadrant seams"
            )));
        }
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let v = self.eval(t);
            if !v.is_finite() || v < -1e-15 {
                return Err(Error::InvalidKernel(format!(
                    "phi({t}) = {v}, must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
enum Shape {
    Example(PhiProfile),
    /// `xi_i xi_j`, zero-based, `i < j`.
    Monomial(usize, usize),
    /// `xi_i^2 - xi_j^2`, zero-based, `i != j`.
    QuadraticDiff(usize, usize),
    Zero,
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// An angular profile `Omega` on `S^{d-1}` together with the induced
/// `(d-2)`-homogeneous kernel `K(x) = Omega(x/|x|) / |x|^{d-2}`.
#[derive(Clone)]
pub struct SphericalKernel {
    d: usize,
    shape: Shape,
    alpha: f64,
    label: String,
}

impl fmt::Debug for SphericalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphericalKernel")
            .field("d", &self.d)
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .finish()
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::InvalidKernel(format!("dimension {d} < 3")));
    }
    Ok(())
}

/// The even, mean-zero kernel built quadrant-wise from
/// `a(xi) = (xi_2^2 - xi_1^2) phi(xi_1^2 + |xi'|^2) phi(xi_2^2 + |xi'|^2)`,
/// with the sign flipped on the quadrants where `xi_1 xi_2 < 0`.
pub fn make_example_kernel(d: usize, phi: PhiProfile) -> Result<SphericalKernel> {
    check_dimension(d)?;
    phi.validate()?;
    let label = match &phi {
        PhiProfile::Power(p) if *p == 2.0 => "example".to_string(),
        other => format!("example[{}]", other.label()),
    };
    Ok(SphericalKernel {
        d,
        shape: Shape::Example(phi),
        alpha: 1.0,
        label,
    })
}

/// `Omega(xi) = xi_i xi_j` with one-based indices, `i != j`.
pub fn make_monomial_kernel(d: usize, i: usize, j: usize) -> Result<SphericalKernel> {
    check_dimension(d)?;
    if i == j {
        return Err(Error::InvalidKernel(format!(
            "monomial xi_{i}^2 is not mean-zero"
        )));
    }
    let (i, j) = (i.min(j), i.max(j));
    if i == 0 || j > d {
        return Err(Error::InvalidKernel(format!(
            "monomial indices ({i},{j}) out of range 1..={d}"
        )));
    }
    Ok(SphericalKernel {
        d,
        shape: Shape::Monomial(i - 1, j - 1),
        alpha: 1.0,
        label: format!("monomial:{i},{j}"),
    })
}

/// `Omega(xi) = xi_i^2 - xi_j^2` with one-based indices, `i != j`.
pub fn make_quadratic_kernel(d: usize, i: usize, j: usize) -> Result<SphericalKernel> {
    check_dimension(d)?;
    if i == j || i == 0 || j == 0 || i > d || j > d {
        return Err(Error::InvalidKernel(format!(
            "quadratic indices ({i},{j}) must be distinct and in 1..={d}"
        )));
    }
    Ok(SphericalKernel {
        d,
        shape: Shape::QuadraticDiff(i - 1, j - 1),
        alpha: 1.0,
        label: format!("quadratic:{i},{j}"),
    })
}

pub fn make_zero_kernel(d: usize) -> Result<SphericalKernel> {
    check_dimension(d)?;
    Ok(SphericalKernel {
        d,
        shape: Shape::Zero,
        alpha: 1.0,
        label: "zero".into(),
    })
}

/// Evaluates `K(x) = Omega(x/|x|) |x|^{-(d-2)}`.
pub fn eval_kernel(kernel: &SphericalKernel, x: &[f64]) -> Result<f64> {
    kernel.eval(x)
}

impl SphericalKernel {
    /// Wraps an arbitrary angular function. No evenness or mean-zero check is made,
    /// which is what test inputs such as `Omega = 1` need.
    pub fn custom<F>(d: usize, label: impl Into<String>, alpha: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dimension(d)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidKernel(format!(
                "Hoelder exponent {alpha} outside (0,1]"
            )));
        }
        Ok(SphericalKernel {
            d,
            shape: Shape::Custom(Arc::new(f)),
            alpha,
            label: label.into(),
        })
    }

    /// Builds a kernel from its configuration label:
    /// `example`, `monomial:i,j`, `quadratic:i,j` or `zero`.
    pub fn from_label(d: usize, label: &str, phi: PhiProfile) -> Result<Self> {
        let label = label.trim();
        let pair = |rest: &str| -> Result<(usize, usize)> {
            let mut it = rest.split(',').map(|s| s.trim().parse::<usize>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => Ok((i, j)),
                _ => Err(Error::InvalidKernel(format!("bad index pair in `{label}`"))),
            }
        };
        if label == "example" {
            make_example_kernel(d, phi)
        } else if label == "zero" {
            make_zero_kernel(d)
        } else if let Some(rest) = label.strip_prefix("monomial:") {
            let (i, j) = pair(rest)?;
            make_monomial_kernel(d, i, j)
        } else if let Some(rest) = label.strip_prefix("quadratic:") {
            let (i, j) = pair(rest)?;
            make_quadratic_kernel(d, i, j)
        } else {
            Err(Error::InvalidKernel(format!("unknown kernel label `{label}`")))
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }

    /// `Omega` at a unit vector.
    #[inline]
    pub fn omega(&self, xi: &[f64]) -> f64 {
        self.omega_scaled(xi, 1.0)
    }

    /// `Omega(v / |v|)` for any nonzero `v`.
    #[inline]
    pub fn omega_of(&self, v: &[f64]) -> f64 {
        let n2 = norm2(v);
        self.omega_scaled(v, 1.0 / n2)
    }

    /// Evaluates `Omega(v / |v|)` given `inv_n2 = 1 / |v|^2`; built-in shapes only
    /// depend on products of pairs of coordinates, so no square root is needed.
    #[inline]
    fn omega_scaled(&self, v: &[f64], inv_n2: f64) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Monomial(i, j) => v[*i] * v[*j] * inv_n2,
            Shape::QuadraticDiff(i, j) => (v[*i] * v[*i] - v[*j] * v[*j]) * inv_n2,
            Shape::Example(phi) => {
                let s1 = v[0] * v[0] * inv_n2;
                let s2 = v[1] * v[1] * inv_n2;
                let rest: f64 = v[2..].iter().map(|x| x * x).sum::<f64>() * inv_n2;
                let a = (s2 - s1) * phi.eval(s1 + rest) * phi.eval(s2 + rest);
                // the seams xi_1 = 0, xi_2 = 0 belong to the first branch; a vanishes there
                if v[0] * v[1] >= 0.0 {
                    a
                } else {
                    -a
                }
            }
            Shape::Custom(f) => {
                if inv_n2 == 1.0 {
                    f(v)
                } else {
                    let s = inv_n2.sqrt();
                    let xi: SmallVec<[f64; 4]> = v.iter().map(|x| x * s).collect();
                    f(&xi)
                }
            }
        }
    }

    /// `K(x) = Omega(x/|x|) / |x|^{d-2}`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let n2 = norm2(x);
        if n2 == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(self.omega_scaled(x, 1.0 / n2) * n2.sqrt().powi(-(self.d as i32 - 2)))
    }
}
