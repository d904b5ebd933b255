use std::sync::Arc;

use cantor_sio::fractal_measure::sample_one;
use cantor_sio::sphere_kernel::random_direction;
use cantor_sio::{potential_treecode, KernelConstants, LevelMeasure, TreecodeConfig};
use rayon::prelude::*;

use super::{moments, new_report, rng_for};
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

/// Potentials of `mu^m` for `m = 1..=max_depth` at probes beside sampled level-`n` nodes,
/// at distance `2 r_n (1 + delta_{n+1})` from the node centre. With vanishing second moments the
/// sup over the battery must not grow with the depth.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let (_, m, _) = moments(r)?;
    if m.max_abs() > r.config.moment.threshold {
        return Err(LabError::Refused(format!(
            "kernel {} has max |M_ij| = {:e} above {:e}; its potentials are unbounded, use `unbounded`",
            r.kernel.label(),
            m.max_abs(),
            r.config.moment.threshold
        )));
    }
    let mut rep = new_report("bounded", r);
    let cfg = &r.config.bounded;
    let sched = &r.schedule;
    let d = sched.d();
    let depth = cfg.max_depth.min(sched.depth());
    let spec = r.spec();
    let tc = TreecodeConfig {
        constants: Some(KernelConstants::estimate(&r.kernel)),
        ..r.treecode()
    };

    let mut table = Table::new(
        "probes",
        &["depth", "probe", "node_level", "distance", "value", "error_bound", "kernel_evals"],
    );
    let mut profile = Table::new("profile", &["depth", "sup_abs_value", "error_bound", "probes"]);
    let mut sups = Vec::new();
    for depth_m in 1..=depth {
        let mu = LevelMeasure::new(Arc::clone(sched), depth_m)?;
        let rows = (0..cfg.probes)
            .into_par_iter()
            .map(|i| -> Result<(usize, f64, f64, f64, u64), LabError> {
                let n = 1 + i % depth_m;
                let s = sample_one(&mu, r.config.seed, i as u64);
                let c = sched.center_of_path(&s.path[..n])?;
                let mut rng = rng_for(r.config.seed ^ 0xb0b0, i as u64);
                let u = random_direction(&mut rng, d);
                let eps = 2.0 * sched.radius(n) * (1.0 + sched.delta(n + 1));
                let x: Vec<f64> = c.iter().zip(&u).map(|(a, b)| a + eps * b).collect();
                let p = potential_treecode(&r.kernel, &mu, &x, &tc, &spec)?;
                Ok((n, eps, p.value, p.error_bound, p.kernel_evals))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (mut sup, mut err) = (0.0f64, 0.0f64);
        for (i, (n, eps, v, e, evals)) in rows.iter().enumerate() {
            sup = sup.max(v.abs());
            err = err.max(*e);
            table.push(row![depth_m, i, *n, *eps, *v, *e, *evals]);
        }
        profile.push(row![depth_m, sup, err, cfg.probes]);
        sups.push((depth_m, sup, err));
    }
    rep.tables.push(table);
    rep.tables.push(profile);
    rep.put("sup_by_depth", &sups);

    let (_, s1, e1) = sups[0];
    let (dm, sm, em) = *sups.last().expect("at least depth 1");
    rep.put("deepest", dm);
    // each sup is known to within the largest probe bound at its depth
    let (ratio, ratio_err) = if sm + em == 0.0 {
        (0.0, 0.0)
    } else if s1 > e1 {
        (sm / s1, (sm + em) / (s1 - e1) - sm / s1)
    } else {
        (sm / s1, f64::INFINITY)
    };
    rep.verdict(Verdict::at_most("sup_ratio_deepest_to_first", ratio, ratio_err, cfg.growth_factor));
    Ok(rep)
}
