use cantor_sio::{validate_schedule, verify_geometry};

use super::new_report;
use crate::config::Resolved;
use crate::report::{ExperimentReport, Table, Verdict};
use crate::{row, LabError};

/// Schedule inequalities, then child counts, nesting, margins, gaps and path determinism level
/// by level.
pub(super) fn run(r: &Resolved) -> Result<ExperimentReport, LabError> {
    let mut rep = new_report("geometry", r);
    let cfg = &r.config.geometry;
    let depth = cfg.depth.unwrap_or(r.schedule.depth());
    if depth > r.schedule.depth() {
        return Err(LabError::Config(format!(
            "geometry.depth = {depth} exceeds the schedule depth {}",
            r.schedule.depth()
        )));
    }
    let sched = r.schedule.truncated(depth)?;
    let val = validate_schedule(&sched, r.kernel.alpha());
    let mut st = Table::new(
        "schedule",
        &["level", "radius", "cube_side", "delta", "dilated_radius", "lhs", "rhs", "feasible", "integral", "delta_partial_sum"],
    );
    for l in &val.levels {
        st.push(row![
            l.level,
            l.radius,
            l.cube_side,
            l.delta,
            l.dilated_radius,
            l.feasibility_lhs,
            l.feasibility_rhs,
            l.feasible,
            l.inverse_radius_integral && l.ratio_integral,
            l.delta_partial_sum
        ]);
    }
    rep.tables.push(st);
    rep.put("depth", depth);
    rep.put("delta_decreasing", val.delta_decreasing);
    if let Some(f) = &val.failure {
        rep.put("failed_level", f.level);
        rep.put("failed_inequality", &f.inequality);
        rep.note(format!("schedule fails at level {}: {}", f.level, f.inequality));
        rep.verdict(Verdict::holds("schedule_valid", false));
        return Ok(rep);
    }
    rep.verdict(Verdict::holds("schedule_valid", true));

    let g = verify_geometry(&sched, cfg.samples_per_level, r.config.seed);
    let mut lt = Table::new(
        "levels",
        &[
            "level", "nodes", "full_enumeration", "groups", "checked", "children",
            "count_violations", "containment_excess", "containment_violations", "min_margin",
            "margin_violations", "min_sibling_gap", "min_cross_gap", "gap_violations",
            "threshold", "determinism_violations",
        ],
    );
    for l in &g.levels {
        lt.push(row![
            l.level,
            l.node_count as u64,
            l.full_enumeration,
            l.groups_checked,
            l.nodes_checked,
            l.expected_children,
            l.child_count_violations,
            l.max_containment_excess,
            l.containment_violations,
            l.min_margin,
            l.margin_violations,
            l.min_sibling_gap,
            l.min_cross_gap.map_or(String::from("-"), |v| format!("{v:e}")),
            l.gap_violations,
            l.threshold,
            l.determinism_violations
        ]);
        let k = l.level;
        rep.verdict(Verdict::holds(&format!("level_{k}_child_counts"), l.child_counts_ok));
        rep.verdict(Verdict::holds(&format!("level_{k}_containment"), l.property_i));
        rep.verdict(Verdict::holds(&format!("level_{k}_margin"), l.property_ii));
        rep.verdict(Verdict::holds(&format!("level_{k}_gap"), l.property_iii));
        rep.verdict(Verdict::holds(&format!("level_{k}_determinism"), l.determinism_ok));
    }
    rep.tables.push(lt);
    rep.put("levels", &g.levels);
    Ok(rep)
}
