//! Integrals of `K(x - y)` over `B(c, R) ∩ {a < |y - x| <= b}` against Lebesgue measure.
//!
//! In polar coordinates about `x` the radial integral is exact: with `y = x + t zeta`,
//! `K(x - y) dy = Omega(-zeta) t dt dσ(zeta)`, so the integral is
//! `∫ Omega(-zeta) (hi^2 - lo^2) / 2 dσ`, where `[lo, hi]` is the chord of the ball along the ray
//! clipped to `(a, b]`. The chord depends on `zeta` only through its angle `theta` with the axis
//! `c - x`, which leaves a one-dimensional Gauss rule in `theta` times a rule on the
//! `(d-2)`-sphere of directions orthogonal to the axis.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{QuadResult, QuadratureSpec};
use crate::error::{check_dim, Error, Result};
use crate::rules::legendre_level;
use crate::sphere_kernel::{random_direction, SphereQuadrature, SphericalKernel};
use crate::vecmath::{norm, orthonormal_complement, unit_sphere_area, Coords};

/// `∫_{B(c, R) ∩ {a < |y - x| <= b}} K(x - y) dy`. Use `a = 0`, `b = inf` for the whole ball.
pub fn shell_ball_integral(
    kernel: &SphericalKernel,
    c: &[f64],
    radius: f64,
    x: &[f64],
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let d = kernel.d();
    check_dim(d, c.len())?;
    check_dim(d, x.len())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
    }
    if !(a >= 0.0 && b >= a) {
        return Err(Error::InvalidArgument(format!("shell ({a}, {b}] is not a valid range")));
    }
    let w: Coords = c.iter().zip(x).map(|(ci, xi)| ci - xi).collect();
    let dd = norm(&w);
    if kernel.is_zero() || b == a || dd - radius >= b || dd + radius <= a {
        return Ok(QuadResult::zero());
    }
    let axis: Coords = if dd > 0.0 {
        w.iter().map(|v| v / dd).collect()
    } else {
        (0..d).map(|i| if i + 1 == d { 1.0 } else { 0.0 }).collect()
    };
    let geo = Geometry::new(dd, radius, a, b);
    let perp = orthonormal_complement(&axis);
    let tol = spec.tolerance;

    let mut evals = 0u64;
    let mut prev = geo.integrate(kernel, &axis, &perp, 0, &mut evals)?;
    for level in 1..=spec.max_refinement {
        let cur = geo.integrate(kernel, &axis, &perp, level, &mut evals)?;
        let diff = (cur - prev).abs();
        if diff <= tol {
            return Ok(QuadResult {
                value: cur,
                error: diff,
                evals,
                statistical: false,
            });
        }
        prev = cur;
    }
    let mc = geo.monte_carlo(kernel, &axis, spec);
    Ok(QuadResult {
        value: mc.value,
        error: mc.error,
        evals: evals + mc.evals,
        statistical: true,
    })
}

/// `∫_{B(c, R)} K(x - y) dy`; `x` may lie inside the ball.
pub fn ball_lebesgue_integral(
    kernel: &SphericalKernel,
    center: &[f64],
    radius: f64,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    shell_ball_integral(kernel, center, radius, x, 0.0, f64::INFINITY, spec)
}

/// `∫_{B(0,1) ∩ {s < |z - y| <= t}} K(z - y) dy`: the scale-free annulus reference value.
pub fn annulus_uniform_oracle(
    kernel: &SphericalKernel,
    z_rel: &[f64],
    inner_rel: f64,
    outer_rel: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(inner_rel > 0.0 && outer_rel > inner_rel) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < inner < outer, got ({inner_rel}, {outer_rel})"
        )));
    }
    let origin = vec![0.0; kernel.d()];
    shell_ball_integral(kernel, &origin, 1.0, z_rel, inner_rel, outer_rel, spec)
}

/// Piecewise description of the chord along rays from `x` through `B(c, R)`.
struct Geometry {
    dd: f64,
    r: f64,
    a: f64,
    b: f64,
    inside: bool,
    /// `R^2 - D^2`, or `(D - R)(D + R)` outside.
    h: f64,
    /// Outside only: `1 - (R/D)^2`.
    eps2: f64,
    breaks: Vec<f64>,
}

struct Ray {
    cos_t: f64,
    sin_t: f64,
    /// `sin^{d-2}(theta)` times the Jacobian of the angular substitution, times the clipped
    /// radial integral.
    factor: f64,
}

impl Geometry {
    fn new(dd: f64, r: f64, a: f64, b: f64) -> Self {
        let inside = dd < r;
        let mut g = Geometry {
            dd,
            r,
            a,
            b,
            inside,
            h: if inside { (r - dd) * (r + dd) } else { (dd - r) * (dd + r) },
            eps2: if inside { 0.0 } else { (dd - r) * (dd + r) / (dd * dd) },
            breaks: Vec::new(),
        };
        g.breaks = g.breakpoints();
        g
    }

    fn upper(&self) -> f64 {
        if self.inside {
            PI
        } else {
            FRAC_PI_2
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let hi = self.upper();
        let mut br = vec![0.0, hi];
        // where the sphere |y - x| = s crosses the ball boundary
        for s in [self.a, self.b] {
            if s > 0.0 && s.is_finite() && self.dd > 0.0 {
                let cos_s = (s * s + (self.dd - self.r) * (self.dd + self.r)) / (2.0 * s * self.dd);
                if cos_s.abs() < 1.0 {
                    let th = cos_s.acos();
                    let v = if self.inside {
                        th
                    } else {
                        ((self.dd / self.r) * th.sin()).min(1.0).asin()
                    };
                    br.push(v);
                }
            }
        }
        // graded panels where the chord length changes on a short angular scale
        if self.dd > 0.0 {
            let width = if self.inside {
                self.h.sqrt() / self.dd
            } else {
                self.eps2.sqrt()
            };
            if width < 0.25 {
                let mut w = width.max(1e-300);
                while w < 0.5 {
                    if self.inside {
                        br.push(FRAC_PI_2 - w);
                        br.push(FRAC_PI_2 + w);
                    } else {
                        br.push(FRAC_PI_2 - w);
                    }
                    w *= 2.0;
                }
            }
        }
        br.retain(|v| (0.0..=hi).contains(v));
        br.sort_by(f64::total_cmp);
        br.dedup_by(|p, q| (*p - *q).abs() <= 1e-15);
        br
    }

    /// Chord data for the angular variable `v` (theta inside, psi outside).
    #[inline]
    fn ray(&self, v: f64, dm2: i32) -> Ray {
        let (dd, r) = (self.dd, self.r);
        let (lo, hi, cos_t, sin_t, jac) = if self.inside {
            let (sin_t, cos_t) = v.sin_cos();
            let sq = (self.h + dd * dd * cos_t * cos_t).sqrt();
            let t_hi = if cos_t >= 0.0 {
                dd * cos_t + sq
            } else {
                self.h / (sq - dd * cos_t)
            };
            (0.0, t_hi, cos_t, sin_t, 1.0)
        } else {
            let (sin_p, cos_p) = v.sin_cos();
            let q = r / dd;
            let sin_t = q * sin_p;
            let cos_t = (self.eps2 + q * q * cos_p * cos_p).sqrt();
            let sum = dd * cos_t + r * cos_p;
            let t_lo = self.h / sum;
            let t_hi = sum;
            (t_lo, t_hi, cos_t, sin_t, q * cos_p / cos_t)
        };
        let top = hi.min(self.b);
        let bot = lo.max(self.a);
        let radial = if top <= bot {
            0.0
        } else if top == hi && bot == lo && !self.inside {
            // unclipped outside chord: (t+^2 - t-^2)/2 = 2 R D cos(psi) cos(theta), and the
            // cos(theta) cancels against the Jacobian
            let cos_p = v.cos();
            2.0 * r * r * cos_p * cos_p
        } else {
            0.5 * (top - bot) * (top + bot) * jac
        };
        Ray {
            cos_t,
            sin_t,
            factor: radial * sin_t.powi(dm2),
        }
    }

    fn integrate(
        &self,
        kernel: &SphericalKernel,
        axis: &[f64],
        perp: &[Coords],
        level: usize,
        evals: &mut u64,
    ) -> Result<f64> {
        let d = kernel.d();
        let dm2 = d as i32 - 2;
        let (dirs, weights) = perp_rule(d, perp, level)?;
        let rule = legendre_level(level);
        let mut total = 0.0;
        let mut v: Coords = Coords::from_elem(0.0, d);
        for p in self.breaks.windows(2) {
            let (lo, hi) = (p[0], p[1]);
            if hi <= lo {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for &(t, w) in rule {
                let ray = self.ray(mid + half * t, dm2);
                if ray.factor == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for (e, we) in dirs.chunks_exact(d).zip(&weights) {
                    for i in 0..d {
                        v[i] = -(ray.cos_t * axis[i] + ray.sin_t * e[i]);
                    }
                    inner += we * kernel.omega(&v);
                }
                *evals += weights.len() as u64;
                total += half * w * ray.factor * inner;
            }
        }
        Ok(total)
    }

    fn monte_carlo(&self, kernel: &SphericalKernel, axis: &[f64], spec: &QuadratureSpec) -> QuadResult {
        let d = kernel.d();
        let n = spec.mc_fallback_samples.max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = random_direction(&mut rng, d);
            let cos_t: f64 = z.iter().zip(axis).map(|(p, q)| p * q).sum();
            let (lo, hi) = self.chord(cos_t);
            let (top, bot) = (hi.min(self.b), lo.max(self.a));
            let g = if top > bot { 0.5 * (top - bot) * (top + bot) } else { 0.0 };
            let neg: Coords = z.iter().map(|v| -v).collect();
            let f = g * kernel.omega(&neg);
            s1 += f;
            s2 += f * f;
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = (s2 / nf - mean * mean).max(0.0) / (nf - 1.0);
        let area = unit_sphere_area(d);
        QuadResult {
            value: area * mean,
            error: 3.0 * area * var.sqrt(),
            evals: n as u64,
            statistical: true,
        }
    }

    /// Chord `[lo, hi]` along a ray at `cos(theta) = cos_t`; empty as `(0, 0)`.
    fn chord(&self, cos_t: f64) -> (f64, f64) {
        let (dd, r) = (self.dd, self.r);
        let p = dd * cos_t;
        let q = r * r - dd * dd * (1.0 - cos_t * cos_t);
        if q < 0.0 {
            return (0.0, 0.0);
        }
        let sq = q.sqrt();
        if self.inside {
            (0.0, p + sq)
        } else if p <= 0.0 {
            (0.0, 0.0)
        } else {
            (p - sq, p + sq)
        }
    }
}

/// Directions orthogonal to the axis with their weights: a trapezoid circle for `d = 3`, the
/// product sphere rule on `S^{d-2}` rotated into the complement otherwise.
fn perp_rule(d: usize, perp: &[Coords], level: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if d == 3 {
        let m = 8usize << level;
        let step = 2.0 * PI / m as f64;
        let mut dirs = Vec::with_capacity(3 * m);
        for k in 0..m {
            let (s, c) = ((k as f64 + 0.5) * step).sin_cos();
            for i in 0..3 {
                dirs.push(c * perp[0][i] + s * perp[1][i]);
            }
        }
        return Ok((dirs, vec![step; m]));
    }
    let q = SphereQuadrature::product(d - 1, level.saturating_sub(1))?;
    let mut dirs = Vec::with_capacity(q.len() * d);
    for eta in q.nodes() {
        for i in 0..d {
            dirs.push(eta.iter().zip(perp).map(|(e, p)| e * p[i]).sum());
        }
    }
    Ok((dirs, q.weights().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_kernel::{make_monomial_kernel, make_zero_kernel};
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec {
            tolerance: 1e-11,
            ..QuadratureSpec::default()
        }
    }

    fn one(d: usize) -> SphericalKernel {
        SphericalKernel::custom(d, "one", 1.0, |_| 1.0).unwrap()
    }

    #[test]
    fn newtonian_potential_of_ball() {
        // Omega = 1, d = 3: ∫_B dy / |x - y| = 2 pi R^2 - 2 pi D^2 / 3 inside, 4 pi R^3 / (3 D) outside
        let k = one(3);
        let c = [0.1, -0.2, 0.3];
        for (x, want) in [
            ([0.1, -0.2, 0.3], 2.0 * PI),
            ([0.6, -0.2, 0.3], 2.0 * PI - 2.0 * PI * 0.25 / 3.0),
            ([0.1, 1.8, 0.3], 4.0 * PI / (3.0 * 2.0)),
            ([1.1, -0.2, 0.3], 4.0 * PI / 3.0),
            ([0.1, -0.2, 1.3 + 1e-9], 4.0 * PI / (3.0 * (1.0 + 1e-9))),
        ] {
            let v = ball_lebesgue_integral(&k, &c, 1.0, &x, &spec()).unwrap();
            assert_relative_eq!(v.value, want, epsilon = 1e-9);
            assert!(!v.statistical);
        }
    }

    #[test]
    fn shell_of_constant_kernel() {
        // ball fully inside the shell around its centre: 4 pi (b^2 - a^2)/2 restricted to t <= R
        let k = one(3);
        let v = shell_ball_integral(&k, &[0.0; 3], 1.0, &[0.0; 3], 0.25, 0.5, &spec()).unwrap();
        assert_relative_eq!(v.value, 2.0 * PI * (0.25 - 0.0625), epsilon = 1e-12);
        // shells add up to the ball
        let x = [0.3, 0.4, -0.1];
        let full = ball_lebesgue_integral(&k, &[0.0; 3], 1.0, &x, &spec()).unwrap().value;
        let parts: f64 = [(0.0, 0.2), (0.2, 0.7), (0.7, 1.1), (1.1, 5.0)]
            .iter()
            .map(|&(a, b)| shell_ball_integral(&k, &[0.0; 3], 1.0, &x, a, b, &spec()).unwrap().value)
            .sum();
        assert_relative_eq!(parts, full, epsilon = 1e-10);
    }

    #[test]
    fn four_dimensional_constant_kernel() {
        // Omega = 1, d = 4, x at the centre: |S^3| R^2 / 2 = pi^2 R^2
        let k = one(4);
        let v = ball_lebesgue_integral(&k, &[0.0; 4], 1.0, &[0.0; 4], &spec()).unwrap();
        assert_relative_eq!(v.value, PI * PI, epsilon = 1e-9);
        // outside: total volume / D^2 by Newton's theorem in R^4
        let v = ball_lebesgue_integral(&k, &[0.0; 4], 1.0, &[0.0, 0.0, 3.0, 0.0], &spec()).unwrap();
        assert_relative_eq!(v.value, PI * PI / 2.0 / 9.0, epsilon = 1e-9);
    }

    #[test]
    fn monomial_ball_integrals_match_monte_carlo() {
        // oracles: 10^7-sample Monte Carlo over the unit ball
        let k = make_monomial_kernel(3, 1, 2).unwrap();
        let v = ball_lebesgue_integral(&k, &[0.0; 3], 1.0, &[0.5, 0.5, 0.0], &spec()).unwrap();
        assert!((v.value - 0.418_776).abs() < 3.0 * 0.000_523);
        let v = ball_lebesgue_integral(&k, &[0.0; 3], 1.0, &[2.0, 1.0, 0.5], &spec()).unwrap();
        assert!((v.value - 0.617_002).abs() < 3.0 * 7.9e-5);
        let v = ball_lebesgue_integral(&k, &[0.0; 3], 1.0, &[0.3, -0.2, 0.6], &spec()).unwrap();
        assert!((v.value + 0.099_514).abs() < 3.0 * 0.000_524);
    }

    #[test]
    fn annulus_oracle_values() {
        let k = make_monomial_kernel(3, 1, 2).unwrap();
        let z = [0.6 / 2f64.sqrt(), 0.6 / 2f64.sqrt(), 0.0];
        let v = annulus_uniform_oracle(&k, &z, 1.0, 2.0, &spec()).unwrap();
        assert!((v.value - 0.344_271).abs() < 3.0 * 0.000_182, "{}", v.value);
        let v = annulus_uniform_oracle(&k, &[0.0; 3], 0.2, 0.9, &spec()).unwrap();
        assert!(v.value.abs() < 1e-12);
        let z0 = make_zero_kernel(3).unwrap();
        assert_eq!(annulus_uniform_oracle(&z0, &z, 1.0, 2.0, &spec()).unwrap().value, 0.0);
    }

    #[test]
    fn monte_carlo_fallback_is_flagged() {
        let k = make_monomial_kernel(3, 1, 2).unwrap();
        let sp = QuadratureSpec {
            tolerance: 1e-300,
            max_refinement: 1,
            mc_fallback_samples: 200_000,
            seed: 5,
        };
        let v = ball_lebesgue_integral(&k, &[0.0; 3], 1.0, &[0.5, 0.5, 0.0], &sp).unwrap();
        assert!(v.statistical);
        assert!((v.value - 2.0 * PI / 15.0).abs() < v.error, "{v:?} {}", 2.0 * PI / 15.0);
    }
}
