use std::sync::Arc;

use cantor_sio::fractal_measure::{density_dips, sample_points};
use cantor_sio::{ball_mass, density_profile, growth_scan, total_mass, HierarchyNode, LevelMeasure};
use rayon::prelude::*;

use super::new_report;
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

const MASS_TOL: f64 = 1e-12;
/// Ancestor balls must carry their nominal mass to this accuracy.
const ANCESTOR_TOL: f64 = 1e-8;
const PROFILE_POINTS: usize = 5;

/// Growth constant per level, exact masses of ancestor balls, density profiles and the
/// inter-level density dips.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let mut rep = new_report("growth", r);
    let cfg = &r.config.growth;
    let sched = &r.schedule;
    let seed = r.config.seed;
    let d = sched.d();
    if let Some(&bad) = cfg.levels.iter().find(|&&m| m > sched.depth()) {
        return Err(LabError::Config(format!(
            "growth level {bad} exceeds the schedule depth {}",
            sched.depth()
        )));
    }
    let deepest = *cfg.levels.iter().max().expect("levels validated non-empty");

    let mut gt = Table::new(
        "growth",
        &["level", "trials", "total_mass", "c_emp", "argmax_radius", "max_ratio_r_ge_2"],
    );
    let mut constants = Vec::new();
    let mut mass_exact = true;
    let mut large_scale = 0.0f64;
    for &m in &cfg.levels {
        let mu = LevelMeasure::new(Arc::clone(sched), m)?;
        let tm = total_mass(&mu);
        mass_exact &= tm == 1.0;
        let g = growth_scan(&mu, cfg.trials, seed)?;
        large_scale = large_scale.max(g.max_ratio_large_scale);
        gt.push(row![m, cfg.trials, tm, g.c_emp, g.argmax_radius, g.max_ratio_large_scale]);
        constants.push((m, g.c_emp));
    }
    rep.tables.push(gt);
    rep.put("growth_constants", &constants);
    rep.verdict(Verdict::holds("total_mass_exactly_one", mass_exact));
    let cmin = constants.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let cmax = constants.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    rep.verdict(Verdict::at_least("min_growth_constant", cmin, 0.0, cfg.c_min));
    rep.verdict(Verdict::at_most("max_growth_constant", cmax, 0.0, cfg.c_max));
    rep.verdict(Verdict::at_most("growth_constant_spread", cmax / cmin, 0.0, cfg.stability_factor));

    // ancestor dilated balls of mu-samples at the deepest level
    let mu = LevelMeasure::new(Arc::clone(sched), deepest)?;
    let samples = sample_points(&mu, cfg.dip_samples, seed);
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<Vec<(usize, usize, f64, f64)>, LabError> {
            (0..=deepest)
                .map(|k| {
                    let node = HierarchyNode::from_path(sched, &s.path[..k])?;
                    let got = ball_mass(&mu, &node.center, node.dilated_radius, MASS_TOL)?;
                    Ok((i, k, got, sched.radius(k).powi(d as i32 - 2)))
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut at = Table::new("ancestor_mass", &["sample", "level", "ball_mass", "expected", "abs_error"]);
    let mut worst = 0.0f64;
    for (i, k, got, want) in rows.into_iter().flatten() {
        worst = worst.max((got - want).abs());
        at.push(row![i, k, got, want, (got - want).abs()]);
    }
    rep.tables.push(at);
    rep.verdict(Verdict::at_most("ancestor_mass_error", worst, 0.0, ANCESTOR_TOL));

    // density profiles at a few samples: node scales, dilated scales and r >= 2
    let mut scales: Vec<f64> = (0..=deepest)
        .flat_map(|k| [sched.radius(k), mu.support_radius(k)])
        .chain([2.0, 5.0])
        .collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let mut pt = Table::new("density_profile", &["sample", "r", "ratio"]);
    for (i, s) in samples.iter().take(PROFILE_POINTS).enumerate() {
        let p = density_profile(&mu, &s.point, &scales)?;
        for (rr, ratio) in p.rows {
            if rr >= 2.0 {
                large_scale = large_scale.max(ratio);
            }
            pt.push(row![i, rr, ratio]);
        }
    }
    rep.tables.push(pt);
    rep.verdict(Verdict::at_most("ratio_at_scales_ge_2", large_scale, 0.0, 1.0));

    let dips = density_dips(&mu, cfg.dip_samples, seed)?;
    let mut dt = Table::new(
        "density_dips",
        &["sample", "level", "isolation_radius", "dip_ratio", "node_ratio", "relative"],
    );
    let mut worst_dip = 0.0f64;
    for dp in &dips {
        worst_dip = worst_dip.max(dp.relative);
        dt.push(row![dp.sample, dp.level, dp.isolation_radius, dp.dip_ratio, dp.node_ratio, dp.relative]);
    }
    rep.tables.push(dt);
    for k in 1..=deepest {
        let w = dips.iter().filter(|p| p.level == k).map(|p| p.relative).fold(0.0, f64::max);
        rep.put(&format!("max_relative_dip_level_{k}"), w);
    }
    rep.verdict(Verdict::at_most("max_relative_dip", worst_dip, 0.0, cfg.dip_threshold));
    Ok(rep)
}
