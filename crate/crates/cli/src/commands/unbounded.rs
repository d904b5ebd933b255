use std::sync::Arc;

use cantor_sio::sphere_kernel::random_direction;
use cantor_sio::vecmath::{dist, unit_ball_volume};
use cantor_sio::{
    potential_breakdown, reflectionless_closed_form, Anchor, KernelConstants, LevelMeasure,
    MomentMatrix, TreecodeConfig,
};

use super::{moments, new_report, rng_for, uniform_in_unit_ball};
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

const BOUNDARY_POINTS: usize = 2000;

/// Grid over `[-1, 1]^d` with `g` points per axis.
fn grid_points(d: usize, g: usize) -> impl Iterator<Item = Vec<f64>> {
    let total = g.pow(d as u32);
    (0..total).map(move |mut idx| {
        (0..d)
            .map(|_| {
                let i = idx % g;
                idx /= g;
                -1.0 + 2.0 * i as f64 / (g - 1) as f64
            })
            .collect()
    })
}

struct GoodBall {
    x0: Vec<f64>,
    sign: f64,
    peak: f64,
    /// Least signed closed-form value over `B(x0, r0)`.
    floor: f64,
}

/// Best grid point for `|x^T M x|` with `B(x0, r0)` inside the unit ball, and the least value of
/// the same sign over that ball (grid points plus sampled boundary points).
fn good_ball(m: &MomentMatrix, d: usize, g: usize, r0: f64, seed: u64) -> Result<GoodBall, LabError> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x in grid_points(d, g) {
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2.sqrt() > 1.0 - r0 {
            continue;
        }
        let v = reflectionless_closed_form(m, &x)?;
        if best.as_ref().is_none_or(|b| v.abs() > b.0.abs()) {
            best = Some((v, x));
        }
    }
    let (peak, x0) = best.ok_or_else(|| LabError::Config(format!("no grid point with |x| <= 1 - r0 = {}", 1.0 - r0)))?;
    let sign = if peak >= 0.0 { 1.0 } else { -1.0 };
    let mut floor = f64::INFINITY;
    for y in grid_points(d, g) {
        if dist(&y, &x0) <= r0 {
            floor = floor.min(sign * reflectionless_closed_form(m, &y)?);
        }
    }
    let mut rng = rng_for(seed, u64::MAX);
    for _ in 0..BOUNDARY_POINTS {
        let u = random_direction(&mut rng, d);
        let y: Vec<f64> = x0.iter().zip(&u).map(|(a, b)| a + r0 * b).collect();
        floor = floor.min(sign * reflectionless_closed_form(m, &y)?);
    }
    Ok(GoodBall {
        x0,
        sign,
        peak: peak.abs(),
        floor,
    })
}

/// Monte Carlo estimate of `∫_{B(0,1)} K(x - y) dy` with its standard error.
fn monte_carlo_ball(r: &Resolved, x: &[f64], n: usize) -> Result<(f64, f64), LabError> {
    let d = x.len();
    let mut rng = rng_for(r.config.seed ^ 0x6d63, 0);
    let (mut s1, mut s2, mut used) = (0.0, 0.0, 0usize);
    for _ in 0..n {
        let mut y = uniform_in_unit_ball(&mut rng, d);
        for (a, b) in y.iter_mut().zip(x) {
            *a = b - *a;
        }
        if y.iter().all(|v| *v == 0.0) {
            continue;
        }
        let f = r.kernel.eval(&y)?;
        s1 += f;
        s2 += f * f;
        used += 1;
    }
    let nf = used as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) / (nf - 1.0);
    let vol = unit_ball_volume(d);
    Ok((vol * mean, vol * var.sqrt()))
}

/// Potential at a good position `c_m + r_m x0` along the branch that keeps the point at the
/// relative position `x0` in every ancestor, split into the contributions of the ancestor rings.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let (_, m, _) = moments(r)?;
    if m.max_abs() <= r.config.moment.threshold {
        return Err(LabError::Refused(format!(
            "kernel {} has vanishing second moments (max |M_ij| = {:e}); use `bounded`",
            r.kernel.label(),
            m.max_abs()
        )));
    }
    let cfg = &r.config.unbounded;
    let sched = &r.schedule;
    let d = sched.d();
    if cfg.depth > sched.depth() {
        return Err(LabError::Config(format!(
            "unbounded.depth = {} exceeds the schedule depth {}",
            cfg.depth,
            sched.depth()
        )));
    }
    let mut rep = new_report("unbounded", r);
    let kappa = unit_ball_volume(d);
    let gb = good_ball(&m, d, cfg.grid, cfg.r0, r.config.seed)?;
    // mu-units: a level-n node carries density 1 / (kappa r_n^2) on its core ball
    let c0 = gb.floor / kappa;
    let (mc, mc_se) = monte_carlo_ball(r, &gb.x0, cfg.mc_samples)?;
    let cf0 = reflectionless_closed_form(&m, &gb.x0)?;
    rep.put("x0", &gb.x0);
    rep.put("r0", cfg.r0);
    rep.put("closed_form_peak", gb.peak);
    rep.put("closed_form_floor_on_ball", gb.floor);
    rep.put("c0", c0);
    rep.put("monte_carlo_at_x0", mc);
    rep.put("monte_carlo_standard_error", mc_se);
    rep.put("closed_form_at_x0", cf0);
    rep.verdict(Verdict::at_least("c0_positive", c0, 0.0, f64::MIN_POSITIVE));
    rep.verdict(Verdict::at_most("c0_monte_carlo_gap", (mc - cf0).abs(), 0.0, 4.0 * mc_se));

    // descend towards c_n + r_n x0 at every level
    let depth = cfg.depth;
    let mut path = Vec::with_capacity(depth);
    let mut centers = vec![sched.center_of_path(&[])?.to_vec()];
    for n in 0..depth {
        let c = &centers[n];
        let target: Vec<f64> = c.iter().zip(&gb.x0).map(|(a, b)| a + sched.radius(n) * b).collect();
        let (j, _) = sched
            .child_offsets(n + 1)
            .chunks_exact(d)
            .map(|o| c.iter().zip(o).map(|(a, b)| a + b).collect::<Vec<f64>>())
            .enumerate()
            .map(|(j, cc)| (j, dist(&cc, &target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nodes have children");
        path.push(j as u32);
        centers.push(sched.center_of_path(&path)?.to_vec());
    }
    let x: Vec<f64> = centers[depth]
        .iter()
        .zip(&gb.x0)
        .map(|(a, b)| a + sched.radius(depth) * b)
        .collect();
    let mu = LevelMeasure::new(Arc::clone(sched), depth)?;
    let tc = TreecodeConfig {
        constants: Some(KernelConstants::estimate(&r.kernel)),
        ..r.treecode()
    };
    let est = potential_breakdown(&r.kernel, &mu, &x, &Anchor::Leaf(path.clone()), true, &tc, &r.spec())?;
    rep.put("x", &x);
    rep.put("path", &path);
    rep.put("potential", est.value);
    rep.put("error_bound", est.error_bound);
    rep.put("kernel_evals", est.kernel_evals);

    let exponent = 2.0 * r.kernel.alpha() / d as f64;
    let mut table = Table::new(
        "increments",
        &["level", "increment", "uniform_prediction", "relative_position_norm", "delta_power", "cumulative"],
    );
    let mut cumulative = 0.0;
    for n in 0..=depth {
        let inc = gb.sign * est.breakdown[n];
        let u: Vec<f64> = x.iter().zip(&centers[n]).map(|(a, b)| (a - b) / sched.radius(n)).collect();
        let pred = gb.sign * reflectionless_closed_form(&m, &u)? / kappa;
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n >= 1 {
            cumulative += inc;
            rep.verdict(Verdict::at_least(
                &format!("increment_{n}"),
                inc,
                est.error_bound,
                cfg.increment_factor * c0,
            ));
        }
        table.push(row![n, inc, pred, un, sched.delta(n).powf(exponent), cumulative]);
    }
    rep.tables.push(table);
    rep.put("cumulative", cumulative);
    rep.verdict(Verdict::at_least("cumulative", cumulative, est.error_bound, cfg.cumulative_factor * c0));
    rep.note("increment n < depth is the signed contribution of the level-n ancestor minus its level-(n+1) child; the last level is the anchor leaf itself; level 0 is reported but not judged");
    Ok(rep)
}
