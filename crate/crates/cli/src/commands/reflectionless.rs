use cantor_sio::{reflectionless_closed_form, reflectionless_integral, QuadratureSpec};
use rayon::prelude::*;

use super::{moments, new_report, rng_for, uniform_in_unit_ball};
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

/// Uniform-ball integrals `∫_{B(0,1)} K(x - y) dy` against the closed form `x^T M x` at the
/// origin, at `(1/2, 1/2, 0, ...)` and at seeded points of the unit ball.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let mut rep = new_report("reflectionless", r);
    let d = r.config.d;
    let cfg = &r.config.reflectionless;
    let (_, m, m_change) = moments(r)?;
    let vanishing = m.max_abs() <= r.config.moment.threshold;

    let mut probes: Vec<(String, Vec<f64>)> = vec![("origin".into(), vec![0.0; d])];
    let mut half = vec![0.0; d];
    half[0] = 0.5;
    half[1] = 0.5;
    probes.push(("half_diagonal".into(), half));
    for i in 0..cfg.probes {
        let mut rng = rng_for(r.config.seed, i as u64);
        probes.push((format!("random_{i}"), uniform_in_unit_ball(&mut rng, d)));
    }
    let spec = QuadratureSpec {
        tolerance: (cfg.threshold * 1e-3).min(r.config.quadrature.tolerance.max(1e-12)),
        ..r.spec()
    };
    let rows = probes
        .par_iter()
        .map(|(_, x)| -> Result<(f64, f64, f64), LabError> {
            let q = reflectionless_integral(&r.kernel, x, &spec)?;
            let cf = reflectionless_closed_form(&m, x)?;
            let x2: f64 = x.iter().map(|v| v * v).sum();
            Ok((q.value, cf, q.error + m_change * x2 * d as f64))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(
        "scatter",
        &["probe", "x", "ball_integral", "closed_form", "discrepancy", "error"],
    );
    let (mut max_disc, mut disc_err, mut max_val, mut val_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for ((name, x), (v, cf, e)) in probes.iter().zip(&rows) {
        let disc = (v - cf).abs();
        if disc >= max_disc {
            max_disc = disc;
            disc_err = *e;
        }
        if v.abs() >= max_val {
            max_val = v.abs();
            val_err = *e;
        }
        let xs = x.iter().map(|c| format!("{c:.17e}")).collect::<Vec<_>>().join(" ");
        table.push(row![name.as_str(), xs, *v, *cf, disc, *e]);
    }
    rep.tables.push(table);
    rep.put("probes", probes.len());
    rep.put("moments_vanish", vanishing);
    rep.put("max_discrepancy", max_disc);
    rep.put("max_abs_value", max_val);
    rep.put("value_at_half_diagonal", rows[1].0);
    rep.put("closed_form_at_half_diagonal", rows[1].1);

    rep.verdict(Verdict::at_most("max_discrepancy", max_disc, disc_err, cfg.threshold));
    if vanishing {
        rep.verdict(Verdict::at_most("max_abs_value", max_val, val_err, cfg.threshold));
    } else {
        rep.verdict(Verdict::at_least("max_abs_value", max_val, val_err, cfg.floor));
    }
    Ok(rep)
}
