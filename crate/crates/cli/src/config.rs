//! The experiment configuration file (TOML). Every field has a default, so an empty file is a
//! valid configuration for the `d = 3` desk schedule and the example kernel.

use std::path::Path;
use std::sync::Arc;

use cantor_sio::{
    validate_schedule, ConstructionSchedule, PhiProfile, QuadratureSpec, SphericalKernel,
    TreecodeConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabConfig {
    pub d: usize,
    /// `example`, `monomial:i,j`, `quadratic:i,j` or `zero`.
    pub kernel: String,
    /// Profile of the example kernel: `power:p` or `affine:a,b`.
    pub phi: String,
    pub seed: u64,
    pub schedule: ScheduleConfig,
    pub quadrature: QuadratureConfig,
    pub treecode: TreecodeSection,
    pub moment: MomentConfig,
    pub reflectionless: ReflectionlessConfig,
    pub geometry: GeometryConfig,
    pub bounded: BoundedConfig,
    pub unbounded: UnboundedConfig,
    pub pv: PvConfig,
    pub growth: GrowthConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            d: 3,
            kernel: "example".into(),
            phi: "power:2".into(),
            seed: 1,
            schedule: ScheduleConfig::default(),
            quadrature: QuadratureConfig::default(),
            treecode: TreecodeSection::default(),
            moment: MomentConfig::default(),
            reflectionless: ReflectionlessConfig::default(),
            geometry: GeometryConfig::default(),
            bounded: BoundedConfig::default(),
            unbounded: UnboundedConfig::default(),
            pv: PvConfig::default(),
            growth: GrowthConfig::default(),
        }
    }
}

/// Either an explicit radius list or the geometric generator
/// `r_k = r_{k-1} / (first_ratio * ratio_growth^(k-1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ScheduleConfig {
    Radii {
        radii: Vec<f64>,
    },
    Generator {
        first_ratio: f64,
        ratio_growth: f64,
        depth: usize,
    },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Radii {
            radii: vec![1.0, 2f64.powi(-6), 2f64.powi(-13), 2f64.powi(-21)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Absolute tolerance for potentials, in units of total mass.
    pub tolerance: f64,
    /// Agreement required between consecutive sphere rules.
    pub sphere_tolerance: f64,
    pub max_refinement: usize,
    pub mc_fallback_samples: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            tolerance: 1e-10,
            sphere_tolerance: 1e-10,
            max_refinement: 9,
            mc_fallback_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreecodeSection {
    pub eta: f64,
    pub rigorous: bool,
}

impl Default for TreecodeSection {
    fn default() -> Self {
        TreecodeSection {
            eta: 0.125,
            rigorous: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentConfig {
    /// Bound on `max |M_ij|` for moment kernels, and on `|M_12 - 4 pi / 15|` for `monomial:1,2`.
    pub threshold: f64,
    pub mean_threshold: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig {
            threshold: 1e-6,
            mean_threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionlessConfig {
    pub probes: usize,
    /// Bound on `|ball integral - closed form|`, and on `|value|` for moment kernels.
    pub threshold: f64,
    /// Least `max |value|` required of kernels with nonvanishing moments.
    pub floor: f64,
}

impl Default for ReflectionlessConfig {
    fn default() -> Self {
        ReflectionlessConfig {
            probes: 100,
            threshold: 2e-6,
            floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Deepest level checked; the schedule depth when absent.
    pub depth: Option<usize>,
    pub samples_per_level: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            depth: None,
            samples_per_level: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundedConfig {
    pub max_depth: usize,
    /// Probes per depth, spread evenly over the node levels `1..=m`.
    pub probes: usize,
    pub growth_factor: f64,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        BoundedConfig {
            max_depth: 3,
            probes: 200,
            growth_factor: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnboundedConfig {
    pub depth: usize,
    /// Points per axis of the grid over `[-1, 1]^d` searched for the good position.
    pub grid: usize,
    /// Radius of the good ball around the best grid point.
    pub r0: f64,
    /// Each increment must reach `increment_factor * c_0`.
    pub increment_factor: f64,
    /// The sum of the increments must reach `cumulative_factor * c_0`.
    pub cumulative_factor: f64,
    pub mc_samples: usize,
}

impl Default for UnboundedConfig {
    fn default() -> Self {
        UnboundedConfig {
            depth: 3,
            grid: 41,
            r0: 0.3,
            increment_factor: 0.5,
            cumulative_factor: 1.5,
            mc_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvConfig {
    pub depth: usize,
    pub samples: usize,
    /// Annulus `(s r_n, t r_n]`.
    pub s: f64,
    pub t: f64,
    pub grid: usize,
    /// Deepest-to-first ratio of the median `|I_n|` required.
    pub median_ratio: f64,
    /// Samples are counted as good when `min_n |I_n| >= floor_factor * c_0`.
    pub floor_factor: f64,
    /// Constant `C` of the surrogate check `|mu-annulus - uniform| <= C delta_{n+1}^alpha`.
    pub surrogate_constant: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        PvConfig {
            depth: 3,
            samples: 100,
            s: 1.0,
            t: 2.0,
            grid: 21,
            median_ratio: 0.5,
            floor_factor: 0.25,
            surrogate_constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    pub levels: Vec<usize>,
    pub trials: usize,
    pub dip_samples: usize,
    pub dip_threshold: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Largest allowed ratio between the constants of two levels.
    pub stability_factor: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            levels: vec![1, 2, 3],
            trials: 10_000,
            dip_samples: 200,
            dip_threshold: 0.1,
            c_min: 1.0,
            c_max: 100.0,
            stability_factor: 2.0,
        }
    }
}

/// A validated configuration with its kernel and schedule built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: LabConfig,
    pub kernel: SphericalKernel,
    pub schedule: Arc<ConstructionSchedule>,
    pub digest: String,
}

impl Resolved {
    pub fn spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            tolerance: self.config.quadrature.tolerance,
            max_refinement: self.config.quadrature.max_refinement,
            mc_fallback_samples: self.config.quadrature.mc_fallback_samples,
            seed: self.config.seed,
        }
    }

    pub fn treecode(&self) -> TreecodeConfig {
        TreecodeConfig {
            eta: self.config.treecode.eta,
            rigorous: self.config.treecode.rigorous,
            constants: None,
        }
    }
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, so equivalent files share a digest.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn build_schedule(&self) -> Result<ConstructionSchedule, LabError> {
        match &self.schedule {
            ScheduleConfig::Radii { radii } => ConstructionSchedule::new(self.d, radii.clone()),
            ScheduleConfig::Generator {
                first_ratio,
                ratio_growth,
                depth,
            } => ConstructionSchedule::from_ratios(self.d, *first_ratio, *ratio_growth, *depth),
        }
        .map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn build_kernel(&self) -> Result<SphericalKernel, LabError> {
        let phi = PhiProfile::parse(&self.phi).map_err(|e| LabError::Config(e.to_string()))?;
        SphericalKernel::from_label(self.d, &self.kernel, phi)
            .map_err(|e| LabError::Config(e.to_string()))
    }

    /// Checks every field and builds the kernel and schedule. With `require_valid_schedule`
    /// the schedule must also satisfy the construction inequalities; `geometry` reports
    /// violations instead of refusing them.
    pub fn resolve(self, require_valid_schedule: bool) -> Result<Resolved, LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        let q = &self.quadrature;
        if !(q.tolerance > 0.0 && q.sphere_tolerance > 0.0) {
            return bad("quadrature tolerances must be positive".into());
        }
        if self.treecode.eta < 0.125 || !self.treecode.eta.is_finite() {
            return bad(format!("treecode.eta = {} is below 1/8", self.treecode.eta));
        }
        if !(self.moment.threshold > 0.0 && self.moment.mean_threshold > 0.0) {
            return bad("moment thresholds must be positive".into());
        }
        if self.reflectionless.probes == 0 || !(self.reflectionless.threshold > 0.0) {
            return bad("reflectionless needs probes > 0 and a positive threshold".into());
        }
        if self.bounded.max_depth == 0 || self.bounded.probes == 0 || !(self.bounded.growth_factor > 0.0) {
            return bad("bounded needs max_depth >= 1, probes > 0, growth_factor > 0".into());
        }
        let u = &self.unbounded;
        if u.depth == 0 || u.grid < 3 || !(u.r0 > 0.0 && u.r0 < 1.0) {
            return bad("unbounded needs depth >= 1, grid >= 3 and 0 < r0 < 1".into());
        }
        let p = &self.pv;
        if p.depth < 2 || p.samples == 0 || p.grid < 3 || !(p.s > 0.0 && p.t > p.s && p.t <= 2.0) {
            return bad("pv needs depth >= 2, samples > 0, grid >= 3 and 0 < s < t <= 2".into());
        }
        let g = &self.growth;
        if g.levels.is_empty() || g.trials == 0 || !(g.c_min <= g.c_max) || !(g.stability_factor >= 1.0) {
            return bad("growth needs levels, trials > 0, c_min <= c_max and stability_factor >= 1".into());
        }
        let kernel = self.build_kernel()?;
        let schedule = self.build_schedule()?;
        if require_valid_schedule {
            validate_schedule(&schedule, kernel.alpha())
                .into_result()
                .map_err(|e| LabError::Config(e.to_string()))?;
        }
        let digest = self.digest();
        Ok(Resolved {
            config: self,
            kernel,
            schedule: Arc::new(schedule),
            digest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(LabConfig::parse("").unwrap(), LabConfig::default());
    }

    #[test]
    fn generator_schedule_and_sections() {
        let c = LabConfig::parse(
            "kernel = \"monomial:1,2\"\n[schedule]\nfirst_ratio = 64.0\nratio_growth = 2.0\ndepth = 2\n[pv]\nsamples = 5\n",
        )
        .unwrap();
        assert_eq!(c.pv.samples, 5);
        assert_eq!(c.pv.t, 2.0);
        let r = c.resolve(true).unwrap();
        assert_eq!(r.schedule.radii(), &[1.0, 2f64.powi(-6), 2f64.powi(-13)]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(LabConfig::parse("bogus = 1"), Err(LabError::Config(_))));
        let c = LabConfig::parse("kernel = \"cubic\"").unwrap();
        assert!(c.resolve(true).is_err());
        let c = LabConfig::parse("[treecode]\neta = 0.1").unwrap();
        assert!(c.resolve(true).is_err());
        let c = LabConfig::parse("[schedule]\nradii = [1.0, 0.125, 0.01]").unwrap();
        assert!(c.resolve(true).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = LabConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
