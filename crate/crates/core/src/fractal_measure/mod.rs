//! The level measures `mu^m`: uniform density `1 / (kappa_d r_m^2)` on every level-`m` core
//! ball, so that the total mass is one and each level-`k` ball carries `r_k^{d-2}`.

mod growth;
mod lens;

pub use growth::{
    density_dips, density_profile, growth_scan, DensityDip, DensityProfile, GrowthReport,
};
pub use lens::{ball_volume, cap_volume, lens_volume};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cantor_geometry::{random_path, ConstructionSchedule};
use crate::error::{check_dim, Error, Result};
use crate::sphere_kernel::random_direction;
use crate::vecmath::{dist, Coords};

/// Default cap on nodes visited by a single mass query.
pub const DEFAULT_MASS_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone)]
pub struct LevelMeasure {
    schedule: Arc<ConstructionSchedule>,
    level: usize,
    node_mass: Vec<f64>,
}

impl LevelMeasure {
    pub fn new(schedule: Arc<ConstructionSchedule>, level: usize) -> Result<Self> {
        if level > schedule.depth() {
            return Err(Error::InvalidArgument(format!(
                "measure level {level} exceeds schedule depth {}",
                schedule.depth()
            )));
        }
        let leaf = schedule.radius(level).powi(schedule.d() as i32 - 2);
        // mass of a level-k node = leaf mass times the number of its level-m descendants
        let mut node_mass = vec![leaf; level + 1];
        for k in (0..level).rev() {
            node_mass[k] = node_mass[k + 1] * schedule.child_count(k + 1) as f64;
        }
        Ok(LevelMeasure {
            schedule,
            level,
            node_mass,
        })
    }

    pub fn schedule(&self) -> &ConstructionSchedule {
        &self.schedule
    }

    pub fn schedule_arc(&self) -> &Arc<ConstructionSchedule> {
        &self.schedule
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn d(&self) -> usize {
        self.schedule.d()
    }

    /// Mass per unit volume on each leaf core ball.
    pub fn density(&self) -> f64 {
        let r = self.schedule.radius(self.level);
        1.0 / (self.schedule.kappa() * r * r)
    }

    /// `r_m^{d-2}`.
    pub fn leaf_mass(&self) -> f64 {
        self.node_mass[self.level]
    }

    /// Mass carried by any level-`k` node.
    #[inline]
    pub fn node_mass(&self, k: usize) -> f64 {
        self.node_mass[k]
    }

    /// Radius of a ball around a level-`k` centre that contains all the mass of that node:
    /// the dilated radius above the leaves, the core radius at the leaves.
    #[inline]
    pub fn support_radius(&self, k: usize) -> f64 {
        if k == self.level {
            self.schedule.radius(k)
        } else {
            self.schedule.dilated_radius(k)
        }
    }

    pub fn leaf_count(&self) -> u128 {
        self.schedule.level_count(self.level)
    }
}

/// `count * leaf_mass`, which is exactly one for schedules with `1/r_k` a power of two.
pub fn total_mass(mu: &LevelMeasure) -> f64 {
    mu.leaf_count() as f64 * mu.leaf_mass()
}

/// Floating-point sum of the leaf masses below the node at `path`.
pub fn subtree_mass_sum(mu: &LevelMeasure, path: &[u32]) -> Result<f64> {
    if path.len() > mu.level {
        return Err(Error::InvalidArgument("path deeper than the measure level".into()));
    }
    fn rec(mu: &LevelMeasure, k: usize) -> f64 {
        if k == mu.level {
            mu.leaf_mass()
        } else {
            (0..mu.schedule.child_count(k + 1)).map(|_| rec(mu, k + 1)).sum()
        }
    }
    Ok(rec(mu, path.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    /// Mass of the straddling nodes that had to be approximated when the budget ran out.
    pub error_bound: f64,
    pub nodes_visited: usize,
}

/// `mu^m(B(center, radius))` within `tolerance`.
pub fn ball_mass(mu: &LevelMeasure, center: &[f64], radius: f64, tolerance: f64) -> Result<f64> {
    ball_mass_detailed(mu, center, radius, tolerance, DEFAULT_MASS_BUDGET).map(|m| m.value)
}

/// Mass query by lazy traversal. Nodes whose support ball is inside the query ball count their
/// full mass, disjoint ones count zero, straddling nodes recurse; straddling leaves use the exact
/// lens volume. If `budget` nodes have been visited, the remaining straddlers are approximated
/// by the volume fraction of their support ball, with their whole mass as the error.
pub fn ball_mass_detailed(
    mu: &LevelMeasure,
    center: &[f64],
    radius: f64,
    tolerance: f64,
    budget: usize,
) -> Result<MassEstimate> {
    check_dim(mu.d(), center.len())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
    }
    let d = mu.d();
    let m = mu.level;
    let sched = &*mu.schedule;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut visited = 0usize;
    let mut stack: Vec<(usize, Coords)> = vec![(0, Coords::from_elem(0.0, d))];
    while let Some((k, c)) = stack.pop() {
        visited += 1;
        let dd = dist(&c, center);
        let rho = mu.support_radius(k);
        if dd + rho <= radius {
            value += mu.node_mass[k];
            continue;
        }
        if dd - rho >= radius {
            continue;
        }
        if k == m {
            value += mu.density() * lens_volume(d, radius, rho, dd);
            continue;
        }
        if visited >= budget {
            let frac = lens_volume(d, radius, rho, dd) / ball_volume(d, rho);
            value += frac * mu.node_mass[k];
            err += frac.max(1.0 - frac) * mu.node_mass[k];
            continue;
        }
        let off = sched.child_offsets(k + 1);
        for o in off.chunks_exact(d) {
            let mut cc = c.clone();
            crate::cantor_geometry::add_offset(&mut cc, o);
            stack.push((k + 1, cc));
        }
    }
    if err > tolerance {
        return Err(Error::BudgetExceeded(format!(
            "ball mass error {err:e} exceeds tolerance {tolerance:e} after {visited} nodes"
        )));
    }
    Ok(MassEstimate {
        value,
        error_bound: err,
        nodes_visited: visited,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    pub point: Coords,
    /// Leaf path of the core ball containing `point`.
    pub path: Vec<u32>,
}

/// Uniform point in `B(0, r)`.
pub(crate) fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, r: f64) -> Coords {
    let u = random_direction(rng, d);
    let t = r * rng.random::<f64>().powf(1.0 / d as f64);
    u.iter().map(|x| x * t).collect()
}

/// The `i`-th sample of the stream identified by `seed`.
pub fn sample_one(mu: &LevelMeasure, seed: u64, index: u64) -> MeasureSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let path = random_path(&mu.schedule, mu.level, &mut rng);
    let mut point = mu.schedule.center_of_path(&path).expect("random path is valid");
    let u = uniform_in_ball(&mut rng, mu.d(), mu.schedule.radius(mu.level));
    crate::cantor_geometry::add_offset(&mut point, &u);
    MeasureSample { point, path }
}

/// `n` independent samples of `mu^m`: a uniform child at each level (siblings carry equal
/// mass), then a uniform point in the leaf core ball. Sample `i` depends only on `(seed, i)`.
pub fn sample_points(mu: &LevelMeasure, n: usize, seed: u64) -> Vec<MeasureSample> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_one(mu, seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor_geometry::HierarchyNode;
    use approx::assert_relative_eq;

    fn desk(m: usize) -> LevelMeasure {
        LevelMeasure::new(Arc::new(ConstructionSchedule::default_desk()), m).unwrap()
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(total_mass(&desk(0)), 1.0);
        let one = LevelMeasure::new(Arc::new(ConstructionSchedule::new(3, vec![1.0, 2f64.powi(-6)]).unwrap()), 1).unwrap();
        assert_eq!(total_mass(&one), 1.0);
        let four = LevelMeasure::new(Arc::new(ConstructionSchedule::new(4, vec![1.0, 0.25]).unwrap()), 1).unwrap();
        assert_eq!(total_mass(&four), 1.0);
        assert_eq!(total_mass(&desk(3)), 1.0);
        assert_relative_eq!(subtree_mass_sum(&desk(2), &[]).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(subtree_mass_sum(&desk(3), &[3, 8]).unwrap(), 2f64.powi(-13), epsilon = 1e-18);
    }

    #[test]
    fn dilated_ball_masses_are_exact() {
        let mu = desk(3);
        let s = mu.schedule();
        for path in [vec![], vec![5], vec![5, 77], vec![5, 77, 200]] {
            let n = HierarchyNode::from_path(s, &path).unwrap();
            let k = path.len();
            let v = ball_mass(&mu, &n.center, n.dilated_radius, 1e-12).unwrap();
            assert_relative_eq!(v, s.radius(k), epsilon = 1e-12 * s.radius(k));
        }
    }

    #[test]
    fn central_child_only() {
        let mu = LevelMeasure::new(Arc::new(ConstructionSchedule::new(3, vec![1.0, 2f64.powi(-6)]).unwrap()), 1).unwrap();
        let v = ball_mass(&mu, &[0.0; 3], 0.1, 1e-12).unwrap();
        assert_eq!(v, 2f64.powi(-6));
        assert_eq!(ball_mass(&mu, &[10.0, 0.0, 0.0], 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn straddling_leaf_uses_lens() {
        let mu = LevelMeasure::new(Arc::new(ConstructionSchedule::new(3, vec![1.0]).unwrap()), 0).unwrap();
        let v = ball_mass(&mu, &[1.0, 0.0, 0.0], 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, (5.0 * std::f64::consts::PI / 12.0) / (4.0 * std::f64::consts::PI / 3.0), epsilon = 1e-14);
    }

    #[test]
    fn budget_fallback_reports_error() {
        let mu = desk(2);
        let e = ball_mass_detailed(&mu, &[0.3, 0.1, 0.0], 0.5, 1.0, 3).unwrap();
        assert!(e.error_bound > 0.0);
        let exact = ball_mass(&mu, &[0.3, 0.1, 0.0], 0.5, 1e-12).unwrap();
        assert!((e.value - exact).abs() <= e.error_bound);
        assert!(matches!(
            ball_mass_detailed(&mu, &[0.3, 0.1, 0.0], 0.5, 1e-9, 3),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn samples_are_reproducible_and_in_leaves() {
        let mu = desk(2);
        let a = sample_points(&mu, 200, 7);
        assert_eq!(a, sample_points(&mu, 200, 7));
        for s in &a {
            let c = mu.schedule().center_of_path(&s.path).unwrap();
            assert!(dist(&c, &s.point) <= mu.schedule().radius(2));
        }
    }
}
