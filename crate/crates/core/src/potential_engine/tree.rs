use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::shell::shell_ball_integral;
use super::{KernelConstants, PotentialEstimate, QuadratureSpec, TreecodeConfig};
use crate::cantor_geometry::add_offset;
use crate::error::{check_dim, Error, Result};
use crate::fractal_measure::LevelMeasure;
use crate::sphere_kernel::SphericalKernel;
use crate::vecmath::{dist, dist_to_cube, Coords};

/// Leaves a single direct evaluation may integrate.
pub const DEFAULT_LEAF_BUDGET: u64 = 1 << 20;

/// Which leaf the breakdown of a potential is organised around.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    None,
    /// The leaf whose core ball is closest to the evaluation point.
    Nearest,
    Leaf(Vec<u32>),
}

struct Walk<'a> {
    kernel: &'a SphericalKernel,
    mu: &'a LevelMeasure,
    x: &'a [f64],
    inner: f64,
    outer: f64,
    surrogates: Option<(f64, f64, KernelConstants)>,
    spec: &'a QuadratureSpec,
    anchor: Option<Vec<u32>>,
    start: &'a [u32],
    allow_on_support: bool,
    leaf_budget: u64,
}

struct Item {
    level: usize,
    center: Coords,
    /// `None` while the node lies on the anchor chain.
    bucket: Option<usize>,
}

/// Far-field bound for replacing a node's mass by a uniform ball: with
/// `rho_min = |x - c| - rho` and `|y - c| <= t`,
/// `|K(x - y) - K(x - c)| <= H min(2, 2t/rho_min)^alpha / rho_min^{d-2} + |Omega|_inf (d-2) t / rho_min^{d-1}`.
fn kernel_variation(c: &KernelConstants, d: usize, rho_min: f64, t: f64) -> f64 {
    let dm2 = d as i32 - 2;
    c.holder * (2.0 * t / rho_min).min(2.0).powf(c.alpha) / rho_min.powi(dm2)
        + c.sup_norm * (d as f64 - 2.0) * t / rho_min.powi(dm2 + 1)
}

impl Walk<'_> {
    fn run(&self) -> Result<PotentialEstimate> {
        let mu = self.mu;
        let sched = mu.schedule();
        let d = mu.d();
        let m = mu.level();
        check_dim(d, self.x.len())?;
        if self.start.len() > m {
            return Err(Error::InvalidArgument("start node below the measure level".into()));
        }
        let nb = if self.anchor.is_some() { m + 1 } else { 1 };
        let mut est = PotentialEstimate {
            value: 0.0,
            error_bound: 0.0,
            kernel_evals: 0,
            breakdown: vec![0.0; nb],
            surrogate_nodes: 0,
            exact_leaves: 0,
            statistical: false,
        };
        if self.kernel.is_zero() {
            return Ok(est);
        }
        let start_bucket = match &self.anchor {
            None => Some(0),
            Some(a) => {
                let common = self.start.iter().zip(a).take_while(|(p, q)| p == q).count();
                (common < self.start.len()).then_some(common)
            }
        };
        let mut stack = vec![Item {
            level: self.start.len(),
            center: sched.center_of_path(self.start)?,
            bucket: start_bucket,
        }];
        let kappa = sched.kappa();
        let leaf_density = mu.density();
        let leaf_tol = self.spec.tolerance * mu.leaf_mass() / leaf_density;
        let leaf_spec = QuadratureSpec {
            tolerance: leaf_tol,
            ..*self.spec
        };
        while let Some(it) = stack.pop() {
            let k = it.level;
            let dd = dist(&it.center, self.x);
            let rho = mu.support_radius(k);
            if dd + rho <= self.inner || dd - rho >= self.outer {
                continue;
            }
            let full = dd - rho >= self.inner && dd + rho <= self.outer;
            if k == m {
                let rm = sched.radius(m);
                if dd < rm && self.inner == 0.0 && !self.allow_on_support {
                    return Err(Error::OnSupport);
                }
                est.exact_leaves += 1;
                if est.exact_leaves > self.leaf_budget {
                    return Err(Error::BudgetExceeded(format!(
                        "more than {} leaves needed; use the treecode",
                        self.leaf_budget
                    )));
                }
                let q = shell_ball_integral(
                    self.kernel,
                    &it.center,
                    rm,
                    self.x,
                    self.inner,
                    self.outer,
                    &leaf_spec,
                )?;
                let v = leaf_density * q.value;
                est.value += v;
                est.breakdown[it.bucket.unwrap_or(m).min(nb - 1)] += v;
                est.error_bound += leaf_density * q.error;
                est.kernel_evals += q.evals;
                est.statistical |= q.statistical;
                continue;
            }
            if let (Some((eta, safety, consts)), Some(bucket)) = (&self.surrogates, it.bucket) {
                let side = if k == 0 { 2.0 * rho } else { sched.side(k) };
                let rho_min = dd - rho;
                if full && rho_min > 0.0 && dist_to_cube(self.x, &it.center, side) >= eta * side {
                    let rk = sched.radius(k);
                    let mass = mu.node_mass(k);
                    let dens = mass / (kappa * rk.powi(d as i32));
                    let sp = QuadratureSpec {
                        tolerance: self.spec.tolerance * mass / dens,
                        ..*self.spec
                    };
                    let q = shell_ball_integral(
                        self.kernel,
                        &it.center,
                        rk,
                        self.x,
                        0.0,
                        f64::INFINITY,
                        &sp,
                    )?;
                    let v = dens * q.value;
                    // The node's mass sits in its children; with each child collapsed to its
                    // centre the difference to the surrogate is computed outright, and only the
                    // within-child variation is bounded by the Hoelder estimate.
                    let rc = mu.support_radius(k + 1);
                    let child_mass = mu.node_mass(k + 1);
                    let mut point_sum = 0.0;
                    let mut variation = 0.0;
                    let off = sched.child_offsets(k + 1);
                    for o in off.chunks_exact(d) {
                        let mut c = it.center.clone();
                        add_offset(&mut c, o);
                        let y: Coords = self.x.iter().zip(&c).map(|(a, b)| a - b).collect();
                        let dc = dist(&c, self.x);
                        point_sum += child_mass * self.kernel.eval(&y)?;
                        variation += child_mass * kernel_variation(consts, d, dc - rc, rc);
                    }
                    est.value += v;
                    est.breakdown[bucket.min(nb - 1)] += v;
                    est.error_bound += dens * q.error + (point_sum - v).abs() + safety * variation;
                    est.kernel_evals += q.evals + (off.len() / d) as u64;
                    est.statistical |= q.statistical;
                    est.surrogate_nodes += 1;
                    continue;
                }
            }
            let on_chain_next = match (&self.anchor, it.bucket) {
                (Some(a), None) => Some(a[k]),
                _ => None,
            };
            let off = sched.child_offsets(k + 1);
            for (j, o) in off.chunks_exact(d).enumerate().rev() {
                let mut c = it.center.clone();
                add_offset(&mut c, o);
                let bucket = match on_chain_next {
                    Some(aj) if aj as usize == j => None,
                    Some(_) => Some(k),
                    None => it.bucket,
                };
                stack.push(Item {
                    level: k + 1,
                    center: c,
                    bucket,
                });
            }
        }
        Ok(est)
    }
}

fn resolve_anchor(mu: &LevelMeasure, x: &[f64], anchor: &Anchor) -> Result<Option<Vec<u32>>> {
    Ok(match anchor {
        Anchor::None => None,
        Anchor::Nearest => Some(nearest_leaf(mu, x)?.0),
        Anchor::Leaf(p) => {
            if p.len() != mu.level() {
                return Err(Error::InvalidArgument(format!(
                    "anchor path has length {}, measure level is {}",
                    p.len(),
                    mu.level()
                )));
            }
            mu.schedule().center_of_path(p)?;
            Some(p.clone())
        }
    })
}

fn surrogate_params(
    kernel: &SphericalKernel,
    cfg: &TreecodeConfig,
) -> Result<Option<(f64, f64, KernelConstants)>> {
    cfg.validate()?;
    let consts = cfg.constants.unwrap_or_else(|| KernelConstants::estimate(kernel));
    Ok(Some((cfg.eta, cfg.safety(), consts)))
}

/// Leaf-by-leaf evaluation of `∫ K(x - y) dmu^m(y)` using the polar reduction on every core ball.
pub fn potential_direct(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    x: &[f64],
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    potential_direct_with_budget(kernel, mu, x, spec, DEFAULT_LEAF_BUDGET)
}

pub fn potential_direct_with_budget(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    x: &[f64],
    spec: &QuadratureSpec,
    leaf_budget: u64,
) -> Result<PotentialEstimate> {
    Walk {
        kernel,
        mu,
        x,
        inner: 0.0,
        outer: f64::INFINITY,
        surrogates: None,
        spec,
        anchor: None,
        start: &[],
        allow_on_support: false,
        leaf_budget,
    }
    .run()
}

/// Hierarchical evaluation: admissible nodes (`dist(x, cube) >= eta s_k`) are replaced by the
/// uniform density of equal mass on their core ball, with the kernel-variation bound added to
/// the error.
pub fn potential_treecode(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    x: &[f64],
    cfg: &TreecodeConfig,
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    Walk {
        kernel,
        mu,
        x,
        inner: 0.0,
        outer: f64::INFINITY,
        surrogates: surrogate_params(kernel, cfg)?,
        spec,
        anchor: None,
        start: &[],
        allow_on_support: false,
        leaf_budget: u64::MAX,
    }
    .run()
}

/// Treecode potential with the contribution split along the ancestor chain of an anchor leaf.
/// Nodes on the chain are never replaced by surrogates, so each entry of the breakdown is the
/// integral over one ring of the chain.
pub fn potential_breakdown(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    x: &[f64],
    anchor: &Anchor,
    allow_on_support: bool,
    cfg: &TreecodeConfig,
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    let anchor = resolve_anchor(mu, x, anchor)?;
    Walk {
        kernel,
        mu,
        x,
        inner: 0.0,
        outer: f64::INFINITY,
        surrogates: surrogate_params(kernel, cfg)?,
        spec,
        anchor,
        start: &[],
        allow_on_support,
        leaf_budget: u64::MAX,
    }
    .run()
}

/// `∫_{|x - y| > eps} K(x - y) dmu^m(y)`, exact leaf by leaf.
pub fn truncated_sio(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    x: &[f64],
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation radius {eps} must be positive")));
    }
    Walk {
        kernel,
        mu,
        x,
        inner: eps,
        outer: f64::INFINITY,
        surrogates: None,
        spec,
        anchor: None,
        start: &[],
        allow_on_support: true,
        leaf_budget: DEFAULT_LEAF_BUDGET,
    }
    .run()
}

/// `∫_{inner < |z - y| <= outer} K(z - y) dmu^m(y)`, exact leaf by leaf.
pub fn annulus_integral(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    z: &[f64],
    inner: f64,
    outer: f64,
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < inner < outer, got ({inner}, {outer})"
        )));
    }
    Walk {
        kernel,
        mu,
        x: z,
        inner,
        outer,
        surrogates: None,
        spec,
        anchor: None,
        start: &[],
        allow_on_support: true,
        leaf_budget: DEFAULT_LEAF_BUDGET,
    }
    .run()
}

/// Annulus integral with surrogates for nodes lying wholly inside the annulus, optionally
/// restricted to the mass of the node at `within`.
#[allow(clippy::too_many_arguments)]
pub fn annulus_treecode(
    kernel: &SphericalKernel,
    mu: &LevelMeasure,
    z: &[f64],
    inner: f64,
    outer: f64,
    within: &[u32],
    cfg: &TreecodeConfig,
    spec: &QuadratureSpec,
) -> Result<PotentialEstimate> {
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < inner < outer, got ({inner}, {outer})"
        )));
    }
    Walk {
        kernel,
        mu,
        x: z,
        inner,
        outer,
        surrogates: surrogate_params(kernel, cfg)?,
        spec,
        anchor: None,
        start: within,
        allow_on_support: true,
        leaf_budget: u64::MAX,
    }
    .run()
}

#[derive(Clone, Copy)]
struct Candidate {
    bound: f64,
    level: usize,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // min-heap on the bound, ties by insertion order
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound
            .total_cmp(&self.bound)
            .then_with(|| o.index.cmp(&self.index))
    }
}

/// Path of the leaf whose core ball is nearest to `x`, with the signed distance
/// `|x - c| - r_m` (negative inside). Best-first search on `|x - c| - rho_k`.
pub fn nearest_leaf(mu: &LevelMeasure, x: &[f64]) -> Result<(Vec<u32>, f64)> {
    let sched = mu.schedule();
    let d = mu.d();
    check_dim(d, x.len())?;
    let m = mu.level();
    let mut nodes: Vec<(Coords, Vec<u32>)> = vec![(Coords::from_elem(0.0, d), Vec::new())];
    let mut heap = BinaryHeap::new();
    heap.push(Candidate {
        bound: dist(&nodes[0].0, x) - mu.support_radius(0),
        level: 0,
        index: 0,
    });
    while let Some(c) = heap.pop() {
        if c.level == m {
            return Ok((nodes[c.index].1.clone(), c.bound));
        }
        let (center, path) = nodes[c.index].clone();
        for (j, o) in sched.child_offsets(c.level + 1).chunks_exact(d).enumerate() {
            let mut cc = center.clone();
            add_offset(&mut cc, o);
            let mut p = path.clone();
            p.push(j as u32);
            let bound = dist(&cc, x) - mu.support_radius(c.level + 1);
            nodes.push((cc, p));
            heap.push(Candidate {
                bound,
                level: c.level + 1,
                index: nodes.len() - 1,
            });
        }
    }
    Err(Error::Internal("hierarchy has no leaves".into()))
}

/// Split of a broken-down potential into the local part (the anchor's level-`n`
/// ancestor) and the ring terms at levels `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingDecomposition {
    pub n: usize,
    pub local: f64,
    pub per_level: Vec<f64>,
}

impl RingDecomposition {
    pub fn total(&self) -> f64 {
        self.local + self.per_level.iter().sum::<f64>()
    }
}

pub fn ring_decomposition(est: &PotentialEstimate, n: usize) -> RingDecomposition {
    let n = n.min(est.breakdown.len());
    RingDecomposition {
        n,
        local: est.breakdown[n..].iter().sum(),
        per_level: est.breakdown[..n].to_vec(),
    }
}
