//! Volumes of balls, caps and ball-ball intersections.

use std::f64::consts::PI;

use statrs::function::beta::beta_reg;

use crate::vecmath::unit_ball_volume;

pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

/// Volume of the cap of height `h` cut from a ball of radius `r`, `0 <= h <= 2r`.
pub fn cap_volume(d: usize, r: f64, h: f64) -> f64 {
    let h = h.clamp(0.0, 2.0 * r);
    if h == 0.0 {
        return 0.0;
    }
    if d == 3 {
        return PI * h * h * (3.0 * r - h) / 3.0;
    }
    if h > r {
        return ball_volume(d, r) - cap_volume(d, r, 2.0 * r - h);
    }
    let x = (h * (2.0 * r - h) / (r * r)).min(1.0);
    0.5 * ball_volume(d, r) * beta_reg(0.5 * (d as f64 + 1.0), 0.5, x)
}

/// `|B(0, a) ∩ B(p, b)|` with `|p| = dist`.
///
/// The cap heights are formed from factored differences so that a tiny ball near the
/// boundary of a large one loses no precision.
pub fn lens_volume(d: usize, a: f64, b: f64, dist: f64) -> f64 {
    if dist >= a + b {
        return 0.0;
    }
    if dist + b <= a {
        return ball_volume(d, b);
    }
    if dist + a <= b {
        return ball_volume(d, a);
    }
    let two_d = 2.0 * dist;
    let h_a = (b - dist + a) * (b + dist - a) / two_d;
    let h_b = (a - dist + b) * (a + dist - b) / two_d;
    cap_volume(d, a, h_a) + cap_volume(d, b, h_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn caps_agree_with_beta_formula() {
        // d = 3 closed form against the incomplete-beta route used for d >= 4
        for &(r, h) in &[(1.0, 0.3), (2.0, 1.7), (0.5, 0.9)] {
            let x: f64 = if h <= r { h * (2.0 * r - h) / (r * r) } else { 1.0 };
            let beta = if h <= r {
                0.5 * ball_volume(3, r) * beta_reg(2.0, 0.5, x)
            } else {
                ball_volume(3, r) - 0.5 * ball_volume(3, r) * beta_reg(2.0, 0.5, (2.0 * r - h) * h / (r * r))
            };
            assert_relative_eq!(cap_volume(3, r, h), beta, epsilon = 1e-13);
        }
        assert_relative_eq!(cap_volume(4, 1.0, 1.0), 0.5 * ball_volume(4, 1.0), epsilon = 1e-14);
        assert_relative_eq!(cap_volume(5, 1.0, 2.0), ball_volume(5, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn equal_balls_at_unit_distance() {
        // two unit balls at distance 1 in R^3 share 5 pi / 12
        assert_relative_eq!(lens_volume(3, 1.0, 1.0, 1.0), 5.0 * PI / 12.0, epsilon = 1e-14);
        assert_eq!(lens_volume(3, 1.0, 0.1, 2.0), 0.0);
        assert_relative_eq!(lens_volume(3, 1.0, 0.1, 0.5), ball_volume(3, 0.1), epsilon = 1e-15);
    }

    #[test]
    fn tiny_ball_on_boundary_is_half_inside() {
        let r = 2f64.powi(-21);
        let v = lens_volume(3, 1.0, r, 1.0);
        assert_relative_eq!(v / ball_volume(3, r), 0.5, epsilon = 1e-5);
        let v4 = lens_volume(4, 1.0, r, 1.0);
        assert_relative_eq!(v4 / ball_volume(4, r), 0.5, epsilon = 1e-5);
    }
}
