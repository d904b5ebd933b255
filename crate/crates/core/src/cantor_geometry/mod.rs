//! The generation hierarchy: radius schedules, the cube packing of a ball, and lazily
//! expanded balls with their enclosing cubes.

mod hierarchy;
mod schedule;

pub use hierarchy::{
    enumerate_paths, expand_children, locate_branch, random_path, verify_geometry,
    GeometryReport, HierarchyNode, LevelGeometry, FULL_ENUMERATION_LIMIT,
};
pub use schedule::{
    cube_side, pack_cubes, validate_schedule, ConstructionSchedule, LevelValidation,
    ScheduleFailure, ScheduleValidation, INTEGRALITY_TOL,
};
pub(crate) use schedule::add_offset;
