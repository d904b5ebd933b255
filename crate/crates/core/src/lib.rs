//! Construction, measures and singular-integral potentials on a Cantor-type set of
//! dimension `d - 2` in `R^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`sphere_kernel`]: even angular profiles `Omega`, the kernels `K(x) = Omega(x/|x|)/|x|^{d-2}`,
//!   sphere quadrature and second moments.
//! * [`cantor_geometry`]: the ball/cube generation hierarchy, built lazily from a radius schedule.
//! * [`fractal_measure`]: the normalised level measures and mass queries.
//! * [`potential_engine`]: direct and hierarchical potentials with error bounds, truncations,
//!   annuli and the uniform-ball identities.

mod error;
mod rules;
pub mod vecmath;

pub mod cantor_geometry;
pub mod fractal_measure;
pub mod potential_engine;
pub mod sphere_kernel;

pub use error::{Error, Result};
pub use cantor_geometry::{
    expand_children, locate_branch, pack_cubes, validate_schedule, verify_geometry,
    ConstructionSchedule, GeometryReport, HierarchyNode, ScheduleValidation,
};
pub use fractal_measure::{
    ball_mass, density_profile, growth_scan, sample_points, total_mass, DensityProfile,
    LevelMeasure,
};
pub use potential_engine::{
    annulus_integral, annulus_treecode, annulus_uniform_oracle, ball_lebesgue_integral,
    potential_breakdown, potential_direct, potential_treecode, reflectionless_closed_form,
    reflectionless_integral, truncated_sio, Anchor, KernelConstants, PotentialEstimate,
    QuadratureSpec, TreecodeConfig,
};
pub use sphere_kernel::{
    eval_kernel, make_example_kernel, make_monomial_kernel, make_quadratic_kernel,
    make_zero_kernel, mean_integral, moment_matrix, sphere_quadrature, symmetry_report,
    Direction, MomentMatrix, PhiProfile, SphereQuadrature, SphericalKernel, SymmetryReport,
};
