use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::schedule::{add_offset, ConstructionSchedule, GridIndex};
use crate::error::{check_dim, Error, Result};
use crate::vecmath::{dist, Coords};

/// One generation ball of the construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub level: usize,
    /// Child index taken at each level `1..=level`.
    pub path: Vec<u32>,
    pub center: Coords,
    /// `r_k`.
    pub core_radius: f64,
    /// `(1 + delta_{k+1}) r_k`.
    pub dilated_radius: f64,
    /// `s_k`, infinite for the root.
    pub cube_side: f64,
}

impl HierarchyNode {
    pub fn root(schedule: &ConstructionSchedule) -> Self {
        HierarchyNode {
            level: 0,
            path: Vec::new(),
            center: Coords::from_elem(0.0, schedule.d()),
            core_radius: 1.0,
            dilated_radius: schedule.dilated_radius(0),
            cube_side: f64::INFINITY,
        }
    }

    /// Rebuilds a node from its path alone.
    pub fn from_path(schedule: &ConstructionSchedule, path: &[u32]) -> Result<Self> {
        let center = schedule.center_of_path(path)?;
        let k = path.len();
        Ok(HierarchyNode {
            level: k,
            path: path.to_vec(),
            center,
            core_radius: schedule.radius(k),
            dilated_radius: schedule.dilated_radius(k),
            cube_side: schedule.side(k),
        })
    }

    fn child(&self, schedule: &ConstructionSchedule, j: usize) -> HierarchyNode {
        let d = schedule.d();
        let k = self.level + 1;
        let mut center = self.center.clone();
        add_offset(&mut center, &schedule.child_offsets(k)[j * d..(j + 1) * d]);
        let mut path = self.path.clone();
        path.push(j as u32);
        HierarchyNode {
            level: k,
            path,
            center,
            core_radius: schedule.radius(k),
            dilated_radius: schedule.dilated_radius(k),
            cube_side: schedule.side(k),
        }
    }

    pub fn contains_in_dilated(&self, x: &[f64]) -> bool {
        dist(&self.center, x) <= self.dilated_radius
    }
}

/// The `n_{k+1}` children of a level-`k` node.
pub fn expand_children(
    node: &HierarchyNode,
    schedule: &ConstructionSchedule,
) -> Result<Vec<HierarchyNode>> {
    if node.level >= schedule.depth() {
        return Err(Error::InvalidArgument(format!(
            "node at level {} has no children in a depth {} schedule",
            node.level,
            schedule.depth()
        )));
    }
    Ok((0..schedule.child_count(node.level + 1))
        .map(|j| node.child(schedule, j))
        .collect())
}

/// Ancestor chain of `x`: the root, then at each level the unique node whose dilated ball
/// contains `x`, stopping at the first level where there is none.
pub fn locate_branch(
    x: &[f64],
    schedule: &ConstructionSchedule,
    max_level: usize,
) -> Result<Vec<HierarchyNode>> {
    check_dim(schedule.d(), x.len())?;
    let mut chain = vec![HierarchyNode::root(schedule)];
    for k in 1..=max_level.min(schedule.depth()) {
        let parent = chain.last().unwrap();
        let s = schedule.side(k);
        let ix: GridIndex = x
            .iter()
            .zip(&parent.center)
            .map(|(xi, ci)| ((xi - ci) / s).round() as i32)
            .collect();
        let Some(&j) = schedule.packing(k).lookup.get(&ix) else {
            break;
        };
        let child = parent.child(schedule, j as usize);
        if !child.contains_in_dilated(x) {
            break;
        }
        chain.push(child);
    }
    Ok(chain)
}

/// Uniformly random path of length `level`.
pub fn random_path<R: Rng + ?Sized>(
    schedule: &ConstructionSchedule,
    level: usize,
    rng: &mut R,
) -> Vec<u32> {
    (1..=level)
        .map(|k| rng.random_range(0..schedule.child_count(k)) as u32)
        .collect()
}

/// All paths of length `level`, in lexicographic order.
pub fn enumerate_paths(schedule: &ConstructionSchedule, level: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for k in 1..=level {
        let n = schedule.child_count(k) as u32;
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |j| {
                    let mut q = p.clone();
                    q.push(j);
                    q
                })
            })
            .collect();
    }
    out
}

/// Levels with at most this many nodes are checked by full enumeration.
pub const FULL_ENUMERATION_LIMIT: u128 = 100_000;
/// Levels with at most this many nodes also get an all-pairs separation check across parents.
const ALL_PAIRS_LIMIT: u128 = 10_000;
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelGeometry {
    pub level: usize,
    pub node_count: u128,
    pub cube_side: f64,
    pub threshold: f64,
    pub full_enumeration: bool,
    pub groups_checked: usize,
    pub nodes_checked: usize,
    pub expected_children: usize,
    pub child_count_violations: usize,
    /// Largest `farthest point - parent dilated radius` over child cubes and dilated balls.
    pub max_containment_excess: f64,
    pub containment_violations: usize,
    pub min_margin: f64,
    pub margin_violations: usize,
    pub min_sibling_gap: f64,
    /// Minimum gap between same-level balls with different parents, when checked.
    pub min_cross_gap: Option<f64>,
    pub gap_violations: usize,
    pub determinism_violations: usize,
    pub property_i: bool,
    pub property_ii: bool,
    pub property_iii: bool,
    pub child_counts_ok: bool,
    pub determinism_ok: bool,
}

impl LevelGeometry {
    pub fn passed(&self) -> bool {
        self.property_i
            && self.property_ii
            && self.property_iii
            && self.child_counts_ok
            && self.determinism_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub d: usize,
    pub depth: usize,
    pub seed: u64,
    pub samples_per_level: usize,
    pub levels: Vec<LevelGeometry>,
    pub pass: bool,
}

#[derive(Default)]
struct GroupStats {
    nodes: usize,
    count_bad: usize,
    contain_excess: f64,
    contain_bad: usize,
    min_margin: f64,
    margin_bad: usize,
    min_gap: f64,
    gap_bad: usize,
    determinism_bad: usize,
}

impl GroupStats {
    fn empty() -> Self {
        GroupStats {
            contain_excess: f64::NEG_INFINITY,
            min_margin: f64::INFINITY,
            min_gap: f64::INFINITY,
            ..Default::default()
        }
    }

    fn merge(mut self, o: GroupStats) -> Self {
        self.nodes += o.nodes;
        self.count_bad += o.count_bad;
        self.contain_excess = self.contain_excess.max(o.contain_excess);
        self.contain_bad += o.contain_bad;
        self.min_margin = self.min_margin.min(o.min_margin);
        self.margin_bad += o.margin_bad;
        self.min_gap = self.min_gap.min(o.min_gap);
        self.gap_bad += o.gap_bad;
        self.determinism_bad += o.determinism_bad;
        self
    }
}

fn check_group(schedule: &ConstructionSchedule, parent_path: &[u32]) -> GroupStats {
    let mut st = GroupStats::empty();
    let Ok(parent) = HierarchyNode::from_path(schedule, parent_path) else {
        st.determinism_bad += 1;
        return st;
    };
    let k = parent.level + 1;
    let Ok(children) = expand_children(&parent, schedule) else {
        st.count_bad += 1;
        return st;
    };
    let s = schedule.side(k);
    let quarter = s / 4.0;
    let slack = REL_SLACK * s.max(parent.dilated_radius);
    let expected = schedule.child_count(k);
    st.nodes = children.len();
    let distinct: std::collections::HashSet<Vec<u64>> = children
        .iter()
        .map(|c| c.center.iter().map(|x| x.to_bits()).collect())
        .collect();
    if children.len() != expected || distinct.len() != expected {
        st.count_bad += 1;
    }
    for c in &children {
        // (i): farthest corner of the child cube and the child dilated ball stay in the parent
        let corner2: f64 = c
            .center
            .iter()
            .zip(&parent.center)
            .map(|(a, b)| {
                let e = (a - b).abs() + 0.5 * s;
                e * e
            })
            .sum();
        let excess = (corner2.sqrt() - parent.dilated_radius)
            .max(dist(&c.center, &parent.center) + c.dilated_radius - parent.dilated_radius);
        st.contain_excess = st.contain_excess.max(excess);
        if excess > slack {
            st.contain_bad += 1;
        }
        // (ii): the ball is centred in its cube, so the margin is s/2 - rho
        let margin = 0.5 * s - c.dilated_radius;
        st.min_margin = st.min_margin.min(margin);
        if margin < quarter - slack {
            st.margin_bad += 1;
        }
        match HierarchyNode::from_path(schedule, &c.path) {
            Ok(again) if again == *c => {}
            _ => st.determinism_bad += 1,
        }
    }
    // (iii): brute-force sibling separation
    for (i, a) in children.iter().enumerate() {
        for b in &children[i + 1..] {
            let gap = dist(&a.center, &b.center) - a.dilated_radius - b.dilated_radius;
            st.min_gap = st.min_gap.min(gap);
            if gap < quarter - slack {
                st.gap_bad += 1;
            }
        }
    }
    st
}

fn cross_parent_gap(schedule: &ConstructionSchedule, k: usize) -> f64 {
    let nodes: Vec<HierarchyNode> = enumerate_paths(schedule, k)
        .iter()
        .map(|p| HierarchyNode::from_path(schedule, p).expect("enumerated path"))
        .collect();
    let rho = schedule.dilated_radius(k);
    (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let a = &nodes[i];
            let mut m = f64::INFINITY;
            for b in &nodes[i + 1..] {
                if a.path[..k - 1] != b.path[..k - 1] {
                    m = m.min(dist(&a.center, &b.center) - 2.0 * rho);
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Checks child counts, nesting (i), ball-in-cube margin (ii), sibling separation (iii) and
/// path determinism, level by level. Levels with at most [`FULL_ENUMERATION_LIMIT`] nodes are
/// enumerated; deeper levels use `n_samples` seeded random sibling groups.
pub fn verify_geometry(schedule: &ConstructionSchedule, n_samples: usize, seed: u64) -> GeometryReport {
    let mut levels = Vec::new();
    for k in 1..=schedule.depth() {
        let count = schedule.level_count(k);
        let full = count <= FULL_ENUMERATION_LIMIT;
        let parents: Vec<Vec<u32>> = if full {
            enumerate_paths(schedule, k - 1)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..n_samples).map(|_| random_path(schedule, k - 1, &mut rng)).collect()
        };
        let st = parents
            .par_iter()
            .map(|p| check_group(schedule, p))
            .reduce(GroupStats::empty, GroupStats::merge);
        let s = schedule.side(k);
        let quarter = s / 4.0;
        let cross = (count <= ALL_PAIRS_LIMIT && schedule.level_count(k - 1) > 1)
            .then(|| cross_parent_gap(schedule, k));
        let cross_bad = cross.is_some_and(|g| g < quarter - REL_SLACK * s);
        levels.push(LevelGeometry {
            level: k,
            node_count: count,
            cube_side: s,
            threshold: quarter,
            full_enumeration: full,
            groups_checked: parents.len(),
            nodes_checked: st.nodes,
            expected_children: schedule.child_count(k),
            child_count_violations: st.count_bad,
            max_containment_excess: st.contain_excess,
            containment_violations: st.contain_bad,
            min_margin: st.min_margin,
            margin_violations: st.margin_bad,
            min_sibling_gap: st.min_gap,
            min_cross_gap: cross,
            gap_violations: st.gap_bad + usize::from(cross_bad),
            determinism_violations: st.determinism_bad,
            property_i: st.contain_bad == 0,
            property_ii: st.margin_bad == 0,
            property_iii: st.gap_bad == 0 && !cross_bad,
            child_counts_ok: st.count_bad == 0,
            determinism_ok: st.determinism_bad == 0,
        });
    }
    let pass = levels.iter().all(LevelGeometry::passed);
    GeometryReport {
        d: schedule.d(),
        depth: schedule.depth(),
        seed,
        samples_per_level: n_samples,
        levels,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_has_64_children_and_deepest_has_none() {
        let s = ConstructionSchedule::default_desk();
        let root = HierarchyNode::root(&s);
        let ch = expand_children(&root, &s).unwrap();
        assert_eq!(ch.len(), 64);
        assert_eq!(ch[0].center.as_slice(), &[0.0, 0.0, 0.0]);
        let deep = HierarchyNode::from_path(&s, &[3, 5, 7]).unwrap();
        assert!(expand_children(&deep, &s).is_err());
        assert_eq!(expand_children(&root, &s).unwrap(), ch);
    }

    #[test]
    fn path_rebuild_is_bit_exact() {
        let s = ConstructionSchedule::default_desk();
        let n1 = &expand_children(&HierarchyNode::root(&s), &s).unwrap()[17];
        let n2 = &expand_children(n1, &s).unwrap()[101];
        let n3 = &expand_children(n2, &s).unwrap()[200];
        let again = HierarchyNode::from_path(&s, &n3.path).unwrap();
        for (a, b) in again.center.iter().zip(&n3.center) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn locate_examples() {
        let s = ConstructionSchedule::default_desk();
        let chain = locate_branch(&[0.0; 3], &s, 3).unwrap();
        assert_eq!(chain.len(), 4);
        assert!(chain.iter().all(|n| n.path.iter().all(|&j| j == 0)));

        let far = 1.0 + s.delta(1) + 0.1;
        assert_eq!(locate_branch(&[far, 0.0, 0.0], &s, 3).unwrap().len(), 1);

        let target = HierarchyNode::from_path(&s, &[9, 44]).unwrap();
        let chain = locate_branch(&target.center, &s, 2).unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[2], target);
    }

    #[test]
    fn geometry_default_depth_two_passes() {
        let s = ConstructionSchedule::default_desk().truncated(2).unwrap();
        let r = verify_geometry(&s, 10, 1);
        assert!(r.pass, "{r:#?}");
        assert!(r.levels.iter().all(|l| l.full_enumeration));
        assert_eq!(r.levels[1].nodes_checked, 8192);
    }

    #[test]
    fn infeasible_schedule_fails_margin() {
        let s = ConstructionSchedule::new(3, vec![1.0, 0.125, 0.015625]).unwrap();
        let r = verify_geometry(&s, 10, 1);
        assert!(!r.pass);
        assert!(!r.levels[0].property_ii);
    }

    #[test]
    fn depth_zero_is_vacuous() {
        let s = ConstructionSchedule::new(3, vec![1.0]).unwrap();
        let r = verify_geometry(&s, 10, 1);
        assert!(r.pass && r.levels.is_empty());
    }
}
