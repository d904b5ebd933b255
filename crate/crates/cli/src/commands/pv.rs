use std::sync::Arc;

use cantor_sio::fractal_measure::sample_one;
use cantor_sio::sphere_kernel::random_direction;
use cantor_sio::vecmath::unit_ball_volume;
use cantor_sio::{
    annulus_treecode, annulus_uniform_oracle, KernelConstants, LevelMeasure, QuadratureSpec,
    TreecodeConfig,
};
use rayon::prelude::*;

use super::{median, new_report, rng_for, uniform_in_unit_ball};
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

/// Radii tried, largest first, for the disc around the best relative position.
const DISC_LADDER: [f64; 6] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625];
const DISC_PROBES: usize = 64;
const ORACLE_TOL: f64 = 1e-9;

struct GoodDisc {
    z_rel: Vec<f64>,
    radius: f64,
    peak: f64,
    /// Least `|oracle|` found on the disc, all of one sign.
    floor: f64,
}

fn find_disc(r: &Resolved, s: f64, t: f64, g: usize, spec: &QuadratureSpec) -> Result<GoodDisc, LabError> {
    let d = r.config.d;
    let pts: Vec<Vec<f64>> = (0..g.pow(d as u32))
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let i = idx % g;
                    idx /= g;
                    -1.0 + 2.0 * i as f64 / (g - 1) as f64
                })
                .collect::<Vec<f64>>()
        })
        .filter(|z| z.iter().map(|v| v * v).sum::<f64>() < 0.95 * 0.95)
        .collect();
    let vals = pts
        .par_iter()
        .map(|z| Ok(annulus_uniform_oracle(&r.kernel, z, s, t, spec)?.value))
        .collect::<Result<Vec<f64>, LabError>>()?;
    let (bi, peak) = vals
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or_else(|| LabError::Config("empty oracle grid".into()))?;
    let z = pts[bi].clone();
    let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = peak.signum();
    for &a in &DISC_LADDER {
        if zn + a >= 1.0 {
            continue;
        }
        let mut rng = rng_for(r.config.seed ^ 0xd15c, 0);
        let probes: Vec<Vec<f64>> = (0..DISC_PROBES)
            .map(|i| {
                let u = random_direction(&mut rng, d);
                // alternate boundary and half-radius points
                let f = if i % 2 == 0 { a } else { 0.5 * a };
                z.iter().zip(&u).map(|(p, q)| p + f * q).collect()
            })
            .collect();
        let floor = probes
            .par_iter()
            .map(|y| Ok(sign * annulus_uniform_oracle(&r.kernel, y, s, t, spec)?.value))
            .collect::<Result<Vec<f64>, LabError>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if floor >= 0.5 * peak.abs() {
            return Ok(GoodDisc {
                z_rel: z,
                radius: a,
                peak: peak.abs(),
                floor,
            });
        }
    }
    Err(LabError::Config(format!(
        "no disc of radius >= {} keeps the annulus value within half of its peak {peak:e}",
        DISC_LADDER[DISC_LADDER.len() - 1]
    )))
}

struct Row {
    sample: usize,
    level: usize,
    value: f64,
    error: f64,
    node_value: f64,
    node_error: f64,
    uniform: f64,
    uniform_error: f64,
}

/// Annular integrals `∫_{s r_n < |z - y| <= t r_n} K(z - y) dmu^m(y)` at points `z` placed in the
/// good disc of the level-`n` ancestor of `mu`-samples. Non-decay in `n` witnesses the failure
/// of the principal value. The same annulus restricted to the ancestor is compared with the
/// uniform-density value.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    if r.kernel.is_zero() {
        return Err(LabError::Refused("the zero kernel has no divergent principal value".into()));
    }
    let cfg = &r.config.pv;
    let sched = &r.schedule;
    let d = sched.d();
    if cfg.depth > sched.depth() {
        return Err(LabError::Config(format!(
            "pv.depth = {} exceeds the schedule depth {}",
            cfg.depth,
            sched.depth()
        )));
    }
    let mut rep = new_report("pv", r);
    let kappa = unit_ball_volume(d);
    let spec = r.spec();
    let ospec = QuadratureSpec {
        tolerance: ORACLE_TOL,
        ..spec
    };
    let disc = find_disc(r, cfg.s, cfg.t, cfg.grid, &ospec)?;
    let c0 = disc.floor / kappa;
    rep.put("z_rel", &disc.z_rel);
    rep.put("disc_radius", disc.radius);
    rep.put("oracle_peak", disc.peak);
    rep.put("oracle_floor_on_disc", disc.floor);
    rep.put("c0", c0);
    rep.put("s", cfg.s);
    rep.put("t", cfg.t);

    let mu = LevelMeasure::new(Arc::clone(sched), cfg.depth)?;
    let tc = TreecodeConfig {
        constants: Some(KernelConstants::estimate(&r.kernel)),
        ..r.treecode()
    };
    let rows: Vec<Row> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<Row>, LabError> {
            let smp = sample_one(&mu, r.config.seed, i as u64);
            let mut rng = rng_for(r.config.seed ^ 0x7a7a, i as u64);
            let v = uniform_in_unit_ball(&mut rng, d);
            let zr: Vec<f64> = disc.z_rel.iter().zip(&v).map(|(a, b)| a + disc.radius * b).collect();
            let uo = annulus_uniform_oracle(&r.kernel, &zr, cfg.s, cfg.t, &ospec)?;
            (1..cfg.depth)
                .map(|n| {
                    let rn = sched.radius(n);
                    let c = sched.center_of_path(&smp.path[..n])?;
                    let z: Vec<f64> = c.iter().zip(&zr).map(|(a, b)| a + rn * b).collect();
                    let (inner, outer) = (cfg.s * rn, cfg.t * rn);
                    let full = annulus_treecode(&r.kernel, &mu, &z, inner, outer, &[], &tc, &spec)?;
                    let node = annulus_treecode(&r.kernel, &mu, &z, inner, outer, &smp.path[..n], &tc, &spec)?;
                    Ok(Row {
                        sample: i,
                        level: n,
                        value: full.value,
                        error: full.error_bound,
                        node_value: node.value,
                        node_error: node.error_bound,
                        uniform: uo.value / kappa,
                        uniform_error: uo.error / kappa,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let alpha = r.kernel.alpha();
    let mut table = Table::new(
        "annulus_profile",
        &["sample", "level", "value", "error_bound", "node_value", "uniform_value", "surrogate_gap", "delta_next_pow_alpha"],
    );
    let mut worst_q = 0.0f64;
    let mut worst_q_err = 0.0f64;
    for row in &rows {
        let gap = (row.node_value - row.uniform).abs();
        let scale = sched.delta(row.level + 1).powf(alpha);
        let q = gap / scale;
        if q >= worst_q {
            worst_q = q;
            worst_q_err = (row.node_error + row.uniform_error) / scale;
        }
        table.push(row![row.sample, row.level, row.value, row.error, row.node_value, row.uniform, gap, scale]);
    }
    rep.tables.push(table);

    let mut levels = Table::new("medians", &["level", "median_abs_value", "median_error_bound", "min_abs_value"]);
    let mut meds = Vec::new();
    for n in 1..cfg.depth {
        let mut a: Vec<f64> = rows.iter().filter(|x| x.level == n).map(|x| x.value.abs()).collect();
        let mut e: Vec<f64> = rows.iter().filter(|x| x.level == n).map(|x| x.error).collect();
        let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        let (ma, me) = (median(&mut a), median(&mut e));
        levels.push(row![n, ma, me, lo]);
        meds.push((ma, me));
    }
    rep.tables.push(levels);
    let good = (0..cfg.samples)
        .filter(|i| {
            rows.iter()
                .filter(|x| x.sample == *i)
                .all(|x| x.value.abs() - x.error >= cfg.floor_factor * c0)
        })
        .count();
    rep.put("fraction_above_floor", good as f64 / cfg.samples as f64);
    rep.put("floor", cfg.floor_factor * c0);

    let (m1, e1) = meds[0];
    let (md, ed) = *meds.last().expect("depth >= 2");
    let ratio = md / m1;
    let lower = if m1 + e1 > 0.0 { (md - ed) / (m1 + e1) } else { f64::NAN };
    rep.put("median_ratio", ratio);
    rep.verdict(Verdict::at_least("median_ratio_deepest_to_first", ratio, ratio - lower, cfg.median_ratio));
    rep.put("max_surrogate_gap_over_delta_pow_alpha", worst_q);
    rep.verdict(Verdict::at_most("surrogate_gap_constant", worst_q, worst_q_err, cfg.surrogate_constant));
    Ok(rep)
}
