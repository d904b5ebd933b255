use std::collections::HashMap;

use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::vecmath::{unit_ball_volume, Coords};

/// Relative slack used when deciding whether a ratio of radii is an integer.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// Largest child count a single generation step may request.
const MAX_CHILDREN: usize = 20_000_000;

pub(crate) type GridIndex = SmallVec<[i32; 4]>;

/// Packing data for one generation step, shared by every parent of that level.
#[derive(Debug, Clone)]
pub(crate) struct LevelPacking {
    /// `index * s_k`, flattened, `d` per child.
    pub offsets: Vec<f64>,
    pub lookup: HashMap<GridIndex, u32>,
}

/// Radii `1 = r_0 > r_1 > ... > r_K` in `R^d` together with every derived per-level quantity.
#[derive(Debug, Clone)]
pub struct ConstructionSchedule {
    d: usize,
    radii: Vec<f64>,
    kappa: f64,
    a_const: f64,
    sides: Vec<f64>,
    deltas: Vec<f64>,
    child_counts: Vec<usize>,
    dilated: Vec<f64>,
    packing: Vec<LevelPacking>,
}

impl ConstructionSchedule {
    /// Builds the schedule and the per-level packing tables. Feasibility of the
    /// separation inequalities is not checked here; see [`super::validate_schedule`].
    pub fn new(d: usize, radii: Vec<f64>) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidSchedule(format!("dimension {d} < 3")));
        }
        if radii.first() != Some(&1.0) {
            return Err(Error::InvalidSchedule("radii must start with r_0 = 1".into()));
        }
        for (k, w) in radii.windows(2).enumerate() {
            if !(w[1] > 0.0 && w[1] < w[0]) {
                return Err(Error::InvalidSchedule(format!(
                    "radii not strictly decreasing and positive at level {}",
                    k + 1
                )));
            }
        }
        let kappa = unit_ball_volume(d);
        let a_const = (d as f64).sqrt() * kappa.powf(1.0 / d as f64);
        let depth = radii.len() - 1;
        let dm2 = d as f64 - 2.0;
        let mut sides = vec![f64::INFINITY];
        let mut deltas = vec![0.0];
        let mut child_counts = vec![1];
        for k in 1..=depth {
            let (r, rp) = (radii[k], radii[k - 1]);
            sides.push((kappa * r.powf(dm2) * rp * rp).powf(1.0 / d as f64));
            deltas.push(a_const * (r / rp).powf(dm2 / d as f64));
            child_counts.push(count_for(rp / r, d)?);
        }
        deltas.push(0.0);
        let dilated = (0..=depth).map(|k| (1.0 + deltas[k + 1]) * radii[k]).collect();
        let mut packing = vec![LevelPacking {
            offsets: vec![],
            lookup: HashMap::new(),
        }];
        for k in 1..=depth {
            let indices = pack_indices(radii[k - 1], sides[k], child_counts[k], d)?;
            let offsets = indices
                .iter()
                .flat_map(|ix| ix.iter().map(|&i| i as f64 * sides[k]).collect::<Vec<_>>())
                .collect();
            let lookup = indices
                .iter()
                .enumerate()
                .map(|(j, ix)| (ix.clone(), j as u32))
                .collect();
            packing.push(LevelPacking {
                offsets,
                lookup,
            });
        }
        Ok(ConstructionSchedule {
            d,
            radii,
            kappa,
            a_const,
            sides,
            deltas,
            child_counts,
            dilated,
            packing,
        })
    }

    /// Radii `r_k = prod_{j<=k} 1 / (first_ratio * ratio_growth^(j-1))`.
    pub fn from_ratios(d: usize, first_ratio: f64, ratio_growth: f64, depth: usize) -> Result<Self> {
        if !(first_ratio > 1.0 && ratio_growth >= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "generator needs first_ratio > 1 and ratio_growth >= 1, got {first_ratio}, {ratio_growth}"
            )));
        }
        let mut radii = vec![1.0];
        let mut q = first_ratio;
        for _ in 0..depth {
            radii.push(radii.last().unwrap() / q);
            q *= ratio_growth;
        }
        Self::new(d, radii)
    }

    /// `d = 3`, radii `(1, 2^-6, 2^-13, 2^-21)`.
    pub fn default_desk() -> Self {
        Self::new(3, vec![1.0, 2f64.powi(-6), 2f64.powi(-13), 2f64.powi(-21)])
            .expect("default schedule is well formed")
    }

    /// The same schedule cut at `depth`.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate depth {} schedule to {depth}",
                self.depth()
            )));
        }
        Self::new(self.d, self.radii[..=depth].to_vec())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Deepest level `K`.
    pub fn depth(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    #[inline]
    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    /// Volume of the unit ball.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `A = sqrt(d) kappa_d^{1/d}`.
    pub fn a_const(&self) -> f64 {
        self.a_const
    }

    /// Cube side `s_k`; `s_0 = inf`.
    #[inline]
    pub fn side(&self, k: usize) -> f64 {
        self.sides[k]
    }

    /// `delta_k` for `1 <= k <= K`, and `delta_{K+1} = 0`.
    #[inline]
    pub fn delta(&self, k: usize) -> f64 {
        self.deltas[k]
    }

    /// `n_k`, the number of children of each level `k-1` node.
    #[inline]
    pub fn child_count(&self, k: usize) -> usize {
        self.child_counts[k]
    }

    /// `(1 + delta_{k+1}) r_k`.
    #[inline]
    pub fn dilated_radius(&self, k: usize) -> f64 {
        self.dilated[k]
    }

    /// Number of level-`k` nodes, `prod_{j<=k} n_j`.
    pub fn level_count(&self, k: usize) -> u128 {
        self.child_counts[1..=k].iter().map(|&n| n as u128).product()
    }

    /// Offsets of the level-`k` children from their parent's centre, `d` per child.
    #[inline]
    pub fn child_offsets(&self, k: usize) -> &[f64] {
        &self.packing[k].offsets
    }

    pub(crate) fn packing(&self, k: usize) -> &LevelPacking {
        &self.packing[k]
    }

    /// Centre of the node reached by following `path` from the root.
    pub fn center_of_path(&self, path: &[u32]) -> Result<Coords> {
        if path.len() > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "path of length {} exceeds depth {}",
                path.len(),
                self.depth()
            )));
        }
        let mut c = Coords::from_elem(0.0, self.d);
        for (k, &j) in path.iter().enumerate() {
            let off = self.child_offsets(k + 1);
            let j = j as usize;
            if j >= self.child_counts[k + 1] {
                return Err(Error::InvalidArgument(format!(
                    "child index {j} out of range at level {}",
                    k + 1
                )));
            }
            add_offset(&mut c, &off[j * self.d..(j + 1) * self.d]);
        }
        Ok(c)
    }
}

/// The one place where a child centre is formed from its parent, so that every traversal
/// reproduces the same bits.
#[inline]
pub(crate) fn add_offset(c: &mut [f64], off: &[f64]) {
    for (ci, oi) in c.iter_mut().zip(off) {
        *ci += oi;
    }
}

fn count_for(ratio: f64, d: usize) -> Result<usize> {
    let n = ratio.powi(d as i32 - 2);
    if !n.is_finite() || n > MAX_CHILDREN as f64 {
        return Err(Error::BudgetExceeded(format!(
            "child count {n:e} exceeds the supported maximum {MAX_CHILDREN}"
        )));
    }
    let rounded = n.round();
    Ok(if (n - rounded).abs() <= INTEGRALITY_TOL * rounded.max(1.0) {
        rounded as usize
    } else {
        n.ceil() as usize
    })
}

/// Grid indices of the `n` cubes of side `s` (grid anchored at the ball centre) kept for a
/// ball of radius `big_r`: all cubes meeting the open ball, ordered by distance of the cube
/// centre and then lexicographically.
pub(crate) fn pack_indices(big_r: f64, s: f64, n: usize, d: usize) -> Result<Vec<GridIndex>> {
    let reach = (big_r / s + 0.5).ceil() as i32;
    let width = (2 * reach + 1) as usize;
    let total = width.checked_pow(d as u32).filter(|&t| t <= 200_000_000).ok_or_else(|| {
        Error::BudgetExceeded(format!("packing grid with {width}^{d} candidate cubes"))
    })?;
    let mut keep: Vec<(i64, GridIndex)> = Vec::new();
    let mut ix: GridIndex = SmallVec::from_elem(-reach, d);
    for _ in 0..total {
        let gap2: f64 = ix
            .iter()
            .map(|&i| {
                let e = (i.abs() as f64 - 0.5).max(0.0);
                e * e
            })
            .sum();
        if s * gap2.sqrt() < big_r {
            let r2: i64 = ix.iter().map(|&i| i as i64 * i as i64).sum();
            keep.push((r2, ix.clone()));
        }
        for v in ix.iter_mut().rev() {
            if *v < reach {
                *v += 1;
                break;
            }
            *v = -reach;
        }
    }
    if keep.len() < n {
        return Err(Error::Internal(format!(
            "only {} grid cubes meet the ball, {n} needed",
            keep.len()
        )));
    }
    keep.sort();
    keep.truncate(n);
    Ok(keep.into_iter().map(|(_, ix)| ix).collect())
}

/// Centres of `(R/r)^{d-2}` grid cubes of side `(kappa_d r^{d-2} R^2)^{1/d}` covering
/// `B(center, R)` essentially disjointly.
pub fn pack_cubes(center: &[f64], big_r: f64, r: f64, d: usize) -> Result<Vec<Coords>> {
    if center.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: center.len(),
        });
    }
    if d < 3 {
        return Err(Error::InvalidArgument(format!("dimension {d} < 3")));
    }
    if !(r > 0.0 && r < big_r) {
        return Err(Error::InvalidArgument(format!("need 0 < r < R, got r={r}, R={big_r}")));
    }
    let s = cube_side(big_r, r, d);
    let n = count_for(big_r / r, d)?;
    let ix = pack_indices(big_r, s, n, d)?;
    Ok(ix
        .iter()
        .map(|ix| {
            let mut c: Coords = center.iter().copied().collect();
            let off: Coords = ix.iter().map(|&i| i as f64 * s).collect();
            add_offset(&mut c, &off);
            c
        })
        .collect())
}

/// `(kappa_d r^{d-2} R^2)^{1/d}`.
pub fn cube_side(big_r: f64, r: f64, d: usize) -> f64 {
    (unit_ball_volume(d) * r.powi(d as i32 - 2) * big_r * big_r).powf(1.0 / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelValidation {
    pub level: usize,
    pub radius: f64,
    pub inverse_radius_integral: bool,
    pub ratio_integral: bool,
    pub cube_side: f64,
    pub delta: f64,
    pub dilated_radius: f64,
    /// `(1 + delta_{k+1}) r_k`.
    pub feasibility_lhs: f64,
    /// `s_k / 4`.
    pub feasibility_rhs: f64,
    pub feasible: bool,
    /// `sum_{j<=k} delta_j^{2 alpha / d}`.
    pub delta_partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleFailure {
    pub level: usize,
    pub inequality: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleValidation {
    pub d: usize,
    pub alpha: f64,
    pub levels: Vec<LevelValidation>,
    pub delta_decreasing: bool,
    pub failure: Option<ScheduleFailure>,
}

impl ScheduleValidation {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::InvalidSchedule(format!(
                "level {}: {}",
                f.level, f.inequality
            ))),
        }
    }
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= INTEGRALITY_TOL * x.abs().max(1.0)
}

/// Checks integrality of `1/r_k` and `r_{k-1}/r_k` and the separation inequality
/// `(1 + delta_{k+1}) r_k <= s_k / 4` at every level, and tabulates the partial sums of
/// `delta_k^{2 alpha / d}`.
pub fn validate_schedule(schedule: &ConstructionSchedule, alpha: f64) -> ScheduleValidation {
    let d = schedule.d();
    let mut levels = Vec::with_capacity(schedule.depth());
    let mut failure = None;
    let mut partial = 0.0;
    let fail = |level: usize, msg: String, failure: &mut Option<ScheduleFailure>| {
        if failure.is_none() {
            *failure = Some(ScheduleFailure {
                level,
                inequality: msg,
            });
        }
    };
    for k in 1..=schedule.depth() {
        let r = schedule.radius(k);
        let inv = 1.0 / r;
        let ratio = schedule.radius(k - 1) / r;
        let delta = schedule.delta(k);
        partial += delta.powf(2.0 * alpha / d as f64);
        let lhs = schedule.dilated_radius(k);
        let rhs = schedule.side(k) / 4.0;
        let row = LevelValidation {
            level: k,
            radius: r,
            inverse_radius_integral: is_integral(inv),
            ratio_integral: is_integral(ratio),
            cube_side: schedule.side(k),
            delta,
            dilated_radius: lhs,
            feasibility_lhs: lhs,
            feasibility_rhs: rhs,
            feasible: lhs <= rhs,
            delta_partial_sum: partial,
        };
        if !row.inverse_radius_integral {
            fail(k, format!("1/r_{k} = {inv} is not an integer"), &mut failure);
        }
        if !row.ratio_integral {
            fail(k, format!("r_{}/r_{k} = {ratio} is not an integer", k - 1), &mut failure);
        }
        if !row.feasible {
            fail(
                k,
                format!(
                    "(1 + delta_{}) r_{k} = {lhs:.6} > s_{k}/4 = {rhs:.6}",
                    k + 1
                ),
                &mut failure,
            );
        }
        levels.push(row);
    }
    let delta_decreasing = (2..=schedule.depth()).all(|k| schedule.delta(k) < schedule.delta(k - 1));
    ScheduleValidation {
        d,
        alpha,
        levels,
        delta_decreasing,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_schedule_constants() {
        let s = ConstructionSchedule::default_desk();
        assert_relative_eq!(s.a_const(), 2.792_1, epsilon = 1e-4);
        assert_relative_eq!(s.delta(1), s.a_const() / 4.0, epsilon = 1e-14);
        assert_relative_eq!(s.side(1), 0.4030, epsilon = 1e-4);
        assert_eq!(
            (s.child_count(1), s.child_count(2), s.child_count(3)),
            (64, 128, 256)
        );
        assert_eq!(s.level_count(3), 2_097_152);
        assert_eq!(s.delta(4), 0.0);
        assert_eq!(s.dilated_radius(3), s.radius(3));
    }

    #[test]
    fn validation_examples() {
        let s = ConstructionSchedule::default_desk();
        let v = validate_schedule(&s, 1.0);
        assert!(v.passed(), "{v:?}");
        assert!(v.delta_decreasing);
        assert_relative_eq!(v.levels[0].feasibility_lhs, 0.0243, epsilon = 1e-4);
        assert_relative_eq!(v.levels[0].feasibility_rhs, 0.1007, epsilon = 1e-4);

        let bad = ConstructionSchedule::new(3, vec![1.0, 0.125, 0.015625]).unwrap();
        let v = validate_schedule(&bad, 1.0);
        let f = v.failure.clone().unwrap();
        assert_eq!(f.level, 1);
        assert_relative_eq!(v.levels[0].feasibility_lhs, 0.2995, epsilon = 1e-4);
        assert_relative_eq!(v.levels[0].feasibility_rhs, 0.2015, epsilon = 1e-4);

        let third = ConstructionSchedule::new(3, vec![1.0, 1.0 / 3.0]).unwrap();
        let v = validate_schedule(&third, 1.0);
        assert!(v.levels[0].inverse_radius_integral && v.levels[0].ratio_integral);
        assert!(!v.passed());
        assert!(v.into_result().is_err());
    }

    #[test]
    fn non_integral_ratio_is_named() {
        let s = ConstructionSchedule::new(3, vec![1.0, 1.0 / 64.5]).unwrap();
        let v = validate_schedule(&s, 1.0);
        assert!(v.failure.unwrap().inequality.contains("not an integer"));
    }

    #[test]
    fn generator_matches_explicit_radii() {
        let g = ConstructionSchedule::from_ratios(3, 64.0, 2.0, 3).unwrap();
        assert_eq!(g.radii(), ConstructionSchedule::default_desk().radii());
        assert!(ConstructionSchedule::new(3, vec![1.0, 0.5, 0.5]).is_err());
        assert!(ConstructionSchedule::new(3, vec![0.5]).is_err());
    }

    #[test]
    fn pack_cubes_examples() {
        let c = pack_cubes(&[0.0; 3], 1.0, 0.125, 3).unwrap();
        assert_eq!(c.len(), 8);
        assert_relative_eq!(cube_side(1.0, 0.125, 3), 0.8060, epsilon = 1e-4);
        assert!(pack_cubes(&[0.0; 3], 1.0, 1.0, 3).is_err());
        let c4 = pack_cubes(&[0.0; 4], 1.0, 0.25, 4).unwrap();
        assert_eq!(c4.len(), 16);
        assert_relative_eq!(cube_side(1.0, 0.25, 4), 0.7452, epsilon = 1e-4);
    }
}
