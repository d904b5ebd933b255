//! Small dense-vector helpers shared by the geometry and quadrature code.

use smallvec::SmallVec;

/// Inline storage for points in low dimension; spills to the heap above 4.
pub type Coords = SmallVec<[f64; 4]>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance from `x` to the closed axis-aligned cube of side `side`
/// centred at `center`.
pub fn dist_to_cube(x: &[f64], center: &[f64], side: f64) -> f64 {
    let half = 0.5 * side;
    x.iter()
        .zip(center)
        .map(|(xi, ci)| {
            let e = ((xi - ci).abs() - half).max(0.0);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Orthonormal basis of the hyperplane perpendicular to the unit vector `axis`,
/// by Gram-Schmidt on the coordinate vectors other than the one most aligned with it.
pub fn orthonormal_complement(axis: &[f64]) -> Vec<Coords> {
    let d = axis.len();
    let skip = (0..d)
        .max_by(|&i, &j| axis[i].abs().total_cmp(&axis[j].abs()))
        .unwrap_or(0);
    let mut basis: Vec<Coords> = Vec::with_capacity(d.saturating_sub(1));
    for k in (0..d).filter(|&k| k != skip) {
        let mut v: Coords = (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        let p = dot(&v, axis);
        for (vi, ai) in v.iter_mut().zip(axis) {
            *vi -= p * ai;
        }
        for b in &basis {
            let p = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b.iter()) {
                *vi -= p * bi;
            }
        }
        let n = norm(&v);
        for vi in v.iter_mut() {
            *vi /= n;
        }
        basis.push(v);
    }
    basis
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // kappa_d = 2 pi / d * kappa_{d-2}
    let mut k = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if d % 2 == 0 { 2 } else { 3 };
    while j <= d {
        k *= 2.0 * std::f64::consts::PI / j as f64;
        j += 2;
    }
    k
}

/// Surface area of the unit sphere `S^{d-1}`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}
