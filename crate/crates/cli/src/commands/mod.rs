mod bounded;
mod geometry;
mod growth;
mod moment;
mod pv;
mod reflectionless;
mod unbounded;

use cantor_sio::sphere_kernel::random_direction;
use cantor_sio::vecmath::unit_sphere_area;
use cantor_sio::{moment_matrix, sphere_quadrature, MomentMatrix, SphereQuadrature, SphericalKernel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{LabConfig, Resolved};
use crate::report::ExperimentReport;
use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Moment,
    Reflectionless,
    Geometry,
    Bounded,
    Unbounded,
    Pv,
    Growth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moment => "moment",
            Command::Reflectionless => "reflectionless",
            Command::Geometry => "geometry",
            Command::Bounded => "bounded",
            Command::Unbounded => "unbounded",
            Command::Pv => "pv",
            Command::Growth => "growth",
        }
    }
}

pub fn run_command(command: Command, config: LabConfig) -> Result<ExperimentReport, LabError> {
    // the geometry command reports an infeasible schedule instead of rejecting it
    let r = config.resolve(command != Command::Geometry)?;
    match command {
        Command::Moment => moment::run(&r),
        Command::Reflectionless => reflectionless::run(&r),
        Command::Geometry => geometry::run(&r),
        Command::Bounded => bounded::run(&r),
        Command::Unbounded => unbounded::run(&r),
        Command::Pv => pv::run(&r),
        Command::Growth => growth::run(&r),
    }
}

fn new_report(name: &str, r: &Resolved) -> ExperimentReport {
    ExperimentReport::new(name, &r.digest, r.config.seed, r.kernel.label())
}

/// Stream `stream` of the generator for `seed`, so that parallel items stay reproducible.
fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_in_unit_ball(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    use rand::Rng;
    let u = random_direction(rng, d);
    let t = rng.random::<f64>().powf(1.0 / d as f64);
    u.iter().map(|v| v * t).collect()
}

/// The converged sphere rule, the moment matrix on it, and the largest entry change against the
/// rule one level coarser.
fn moments(r: &Resolved) -> Result<(SphereQuadrature, MomentMatrix, f64), LabError> {
    let q = sphere_quadrature(r.config.d, r.config.quadrature.sphere_tolerance)?;
    let m = moment_matrix(&r.kernel, &q)?;
    let level = q.accuracy().level;
    let coarse = moment_matrix(&r.kernel, &SphereQuadrature::product(r.config.d, level - 1)?)?;
    let change = m
        .entries
        .iter()
        .zip(&coarse.entries)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((q, m, change))
}

/// Second moments known in closed form for the labelled kernels: `∫ xi_i^2 xi_j^2 dsigma =
/// |S^{d-1}| / (d (d + 2))` for `i != j` and `∫ xi_i^4 dsigma = 3 |S^{d-1}| / (d (d + 2))`.
fn expected_moments(kernel: &SphericalKernel) -> Option<MomentMatrix> {
    let d = kernel.d();
    let mut m = MomentMatrix::zeros(d);
    let unit = unit_sphere_area(d) / (d * (d + 2)) as f64;
    let label = kernel.label();
    let pair = |rest: &str| -> Option<(usize, usize)> {
        let (a, b) = rest.split_once(',')?;
        Some((a.trim().parse::<usize>().ok()? - 1, b.trim().parse::<usize>().ok()? - 1))
    };
    if label == "zero" || label.starts_with("example") {
        Some(m)
    } else if let Some(rest) = label.strip_prefix("monomial:") {
        let (i, j) = pair(rest)?;
        m.entries[i * d + j] = unit;
        m.entries[j * d + i] = unit;
        Some(m)
    } else if let Some(rest) = label.strip_prefix("quadratic:") {
        let (i, j) = pair(rest)?;
        m.entries[i * d + i] = 2.0 * unit;
        m.entries[j * d + j] = -2.0 * unit;
        Some(m)
    } else {
        None
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
