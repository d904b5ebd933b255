use cantor_sio::{mean_integral, moment_matrix, SphereQuadrature};

use super::{expected_moments, moments, new_report};
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

/// Mean and second moments of `Omega` at the converged sphere rule and one level coarser.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let mut rep = new_report("moment", r);
    let d = r.config.d;
    let (q, m, change) = moments(r)?;
    let level = q.accuracy().level;
    let coarse_q = SphereQuadrature::product(d, level - 1)?;
    let coarse = moment_matrix(&r.kernel, &coarse_q)?;
    let mean = mean_integral(&r.kernel, &q)?;
    let mean_coarse = mean_integral(&r.kernel, &coarse_q)?;

    let mut table = Table::new("moment_matrix", &["refinement", "nodes", "i", "j", "value"]);
    for (lvl, nodes, mm) in [(level - 1, coarse_q.len(), &coarse), (level, q.len(), &m)] {
        for i in 0..d {
            for j in 0..d {
                table.push(row![lvl, nodes, i + 1, j + 1, mm.get(i, j)]);
            }
        }
    }
    rep.tables.push(table);
    rep.put("refinement", level);
    rep.put("nodes", q.len());
    rep.put("sphere_rule_error_estimate", q.accuracy().error_estimate);
    rep.put("mean_integral", mean);
    rep.put("mean_integral_coarse", mean_coarse);
    rep.put("max_abs_moment", m.max_abs());
    rep.put("moment_refinement_change", change);
    rep.put("moments_vanish", m.max_abs() <= r.config.moment.threshold);

    let thr = &r.config.moment;
    rep.verdict(Verdict::at_most(
        "mean_integral",
        mean.abs(),
        (mean - mean_coarse).abs(),
        thr.mean_threshold,
    ));
    match expected_moments(&r.kernel) {
        Some(e) => {
            let dev = m
                .entries
                .iter()
                .zip(&e.entries)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            rep.put("max_deviation_from_closed_form", dev);
            rep.verdict(Verdict::at_most("moment_matrix_deviation", dev, change, thr.threshold));
        }
        None => rep.note("no closed-form moments for this kernel; matrix reported only"),
    }
    Ok(rep)
}
