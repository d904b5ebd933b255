use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ball_mass, sample_one, uniform_in_ball, LevelMeasure};
use crate::error::{check_dim, Result};
use crate::vecmath::{dist, Coords};

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub level: usize,
    pub trials: usize,
    pub seed: u64,
    /// Largest observed `mu(B(x, r)) / r^{d-2}`.
    pub c_emp: f64,
    pub argmax_center: Vec<f64>,
    pub argmax_radius: f64,
    /// Largest ratio among trials with `r >= 2`; never above one.
    pub max_ratio_large_scale: f64,
}

/// Empirical growth constant `sup mu(B(x, r)) / r^{d-2}`.
///
/// Even trials centre the ball at a `mu`-sample, odd trials at a uniform point of the root
/// dilated ball; radii are log-uniform in `[r_m, 2]`. Each `mu`-sample also contributes the
/// node-scale ball around its leaf centre of radius `r_m`, whose ratio is one.
pub fn growth_scan(mu: &LevelMeasure, n_trials: usize, seed: u64) -> Result<GrowthReport> {
    let d = mu.d();
    let rm = mu.schedule().radius(mu.level());
    let root = mu.schedule().dilated_radius(0);
    let rows: Vec<(f64, Coords, f64)> = (0..n_trials.max(1) as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, Coords, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(i);
            let r = rm * (2.0 / rm).powf(rng.random::<f64>());
            let mut out = Vec::with_capacity(2);
            let x = if i % 2 == 0 {
                let s = sample_one(mu, seed, i);
                let leaf = mu.schedule().center_of_path(&s.path)?;
                let v = ball_mass(mu, &leaf, rm, MASS_TOL)?;
                out.push((v / rm.powi(d as i32 - 2), leaf, rm));
                s.point
            } else {
                uniform_in_ball(&mut rng, d, root)
            };
            let v = ball_mass(mu, &x, r, MASS_TOL)?;
            out.push((v / r.powi(d as i32 - 2), x, r));
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut best = (f64::NEG_INFINITY, Coords::new(), 0.0);
    let mut large = 0.0f64;
    for (q, x, r) in rows {
        if r >= 2.0 {
            large = large.max(q);
        }
        if q > best.0 {
            best = (q, x, r);
        }
    }
    Ok(GrowthReport {
        level: mu.level(),
        trials: n_trials,
        seed,
        c_emp: best.0,
        argmax_center: best.1.to_vec(),
        argmax_radius: best.2,
        max_ratio_large_scale: large,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub x: Vec<f64>,
    /// `(r, mu(B(x, r)) / r^{d-2})`.
    pub rows: Vec<(f64, f64)>,
}

/// Tabulates `mu(B(x, r)) / r^{d-2}` at the given scales.
pub fn density_profile(mu: &LevelMeasure, x: &[f64], scales: &[f64]) -> Result<DensityProfile> {
    check_dim(mu.d(), x.len())?;
    let dm2 = mu.d() as i32 - 2;
    let rows = scales
        .iter()
        .map(|&r| Ok((r, ball_mass(mu, x, r, MASS_TOL)? / r.powi(dm2))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityProfile {
        x: x.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityDip {
    pub sample: usize,
    pub level: usize,
    /// Largest radius about `x` that provably meets no other level-`k` node:
    /// `s_k - rho_k - |x - c_k|`.
    pub isolation_radius: f64,
    pub dip_ratio: f64,
    /// Ratio at the node scale, `mu(B(c_k, rho_k)) / rho_k^{d-2} = (r_k / rho_k)^{d-2}`.
    pub node_ratio: f64,
    /// `dip_ratio / node_ratio`.
    pub relative: f64,
}

/// Density dips at `mu`-sampled points: for each level `k` the ball about `x` that reaches to
/// the nearest possible sibling holds only the mass `r_k^{d-2}` of `x`'s own node while its
/// radius is of order `s_k`, so the density ratio falls well below its node-scale value.
pub fn density_dips(mu: &LevelMeasure, n_samples: usize, seed: u64) -> Result<Vec<DensityDip>> {
    let sched = mu.schedule();
    let dm2 = mu.d() as i32 - 2;
    let per: Vec<Vec<DensityDip>> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<DensityDip>> {
            let s = sample_one(mu, seed, i as u64);
            let mut rows = Vec::new();
            for k in 1..=mu.level() {
                let c = sched.center_of_path(&s.path[..k])?;
                let rho = mu.support_radius(k);
                // stay a hair inside so that the neighbour's boundary is never touched
                let r = (sched.side(k) - rho - dist(&c, &s.point)) * (1.0 - 1e-9);
                let dip = ball_mass(mu, &s.point, r, MASS_TOL)? / r.powi(dm2);
                let node = ball_mass(mu, &c, rho, MASS_TOL)? / rho.powi(dm2);
                rows.push(DensityDip {
                    sample: i,
                    level: k,
                    isolation_radius: r,
                    dip_ratio: dip,
                    node_ratio: node,
                    relative: dip / node,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor_geometry::ConstructionSchedule;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn desk(m: usize) -> LevelMeasure {
        LevelMeasure::new(Arc::new(ConstructionSchedule::default_desk()), m).unwrap()
    }

    #[test]
    fn growth_constant_at_least_one() {
        let g = growth_scan(&desk(2), 400, 3).unwrap();
        assert!(g.c_emp >= 1.0 - 1e-12 && g.c_emp < 100.0, "{g:?}");
        assert!(g.max_ratio_large_scale <= 1.0);
        assert_eq!(g, growth_scan(&desk(2), 400, 3).unwrap());
    }

    #[test]
    fn profile_rows() {
        let mu = desk(2);
        let c = mu.schedule().center_of_path(&[4, 9]).unwrap();
        let p = density_profile(&mu, &c, &[mu.schedule().radius(2), 2.0, 5.0]).unwrap();
        assert_relative_eq!(p.rows[0].1, 1.0, epsilon = 1e-12);
        assert!(p.rows[1].1 <= 1.0 / 2.0 + 1e-15);
        assert!(p.rows[2].1 <= 1.0 / 5.0 + 1e-15);
    }

    #[test]
    fn dips_below_a_tenth() {
        let rows = density_dips(&desk(3), 20, 11).unwrap();
        assert_eq!(rows.len(), 60);
        for r in &rows {
            assert!(r.relative <= 0.1, "{r:?}");
        }
    }
}
