use serde::{Deserialize, Serialize};

use crate::electrostatics::{assemble, patch_couplings_adjoint_many, SolverConfig};
use crate::error::{Result, TrapError};
use crate::geometry::shapes::polar_disc;
use crate::geometry::{build_skeleton, DiscretizeOptions, SkeletonParams};
use crate::heating::axial_profile;
use crate::pipeline::{run_on_operator, run_pipeline, PipelineConfig, PipelineResult, DEFAULT_TARGET_EDGE};
use crate::scalar::pairwise_sum;
use crate::trapdynamics::STABILITY_LIMIT;
use crate::vec3::Vec3;

use super::fit::{fit_line, fit_power_law, FitResult, PowerLawFit};

/// How the RF drive follows the trap size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "ratio")]
pub enum DrivePolicy {
    /// Fixed amplitude; Ω rescaled so the largest ω/Ω equals the value.
    ConstantStabilityMargin(f64),
    /// Drive exactly as configured at every distance.
    ConstantFrequency,
}

impl Default for DrivePolicy {
    fn default() -> Self {
        DrivePolicy::ConstantStabilityMargin(STABILITY_LIMIT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSpec {
    /// Ion-electrode distances, m.
    pub distances: Vec<f64>,
    pub template: SkeletonParams,
    pub policy: DrivePolicy,
    /// Patch size as a fraction of d, capped by the configured target edge.
    pub relative_edge: f64,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            distances: [100.0, 150.0, 200.0, 300.0, 400.0].iter().map(|d| d / 1e6).collect(),
            template: SkeletonParams::default(),
            policy: DrivePolicy::default(),
            relative_edge: DEFAULT_TARGET_EDGE / 200e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub distance: f64,
    pub rf_frequency: f64,
    pub patches: usize,
    /// Axial-mode profile peak, m; `None` when the run or peak detection failed.
    pub peak: Option<f64>,
    pub frequencies: [f64; 3],
    /// Summed Γ of the two radial modes.
    pub radial_gamma: f64,
    pub radial_spectral_density: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    /// Peak location against d, both in µm.
    pub fit: FitResult,
    pub radial_gamma_law: Option<PowerLawFit>,
    pub radial_spectral_law: Option<PowerLawFit>,
}

fn run_at(d: f64, spec: &ScalingSpec, cfg: &PipelineConfig) -> Result<(PipelineResult<f64>, f64)> {
    let params = SkeletonParams {
        opposing_distance: 2.0 * d,
        ..spec.template.clone()
    };
    let geom = build_skeleton::<f64>(&params)?;
    let mut cfg = cfg.clone();
    cfg.discretize = DiscretizeOptions {
        target_edge: cfg.discretize.target_edge.min(spec.relative_edge * d),
        ..cfg.discretize
    };
    let r = run_pipeline(&geom, &cfg)?;
    match spec.policy {
        DrivePolicy::ConstantFrequency => Ok((r, cfg.drive.rf_frequency)),
        DrivePolicy::ConstantStabilityMargin(target) => {
            if !(target > 0.0) {
                return Err(TrapError::param("policy", "stability margin must be positive"));
            }
            // ω/Ω ∝ 1/Ω² for the pseudopotential; a second pass absorbs the
            // small DC contribution.
            let mut r = r;
            let mut omega = cfg.drive.rf_frequency;
            for _ in 0..2 {
                let ratio = r.modes.max_stability_ratio();
                omega *= (ratio / target).sqrt();
                let mut c = cfg.clone();
                c.drive.rf_frequency = omega;
                r = run_on_operator(r.operator, &c)?;
            }
            Ok((r, omega))
        }
    }
}

/// Rebuilds the template at each distance and fits the axial hotspot position
/// and the radial heating power law.
pub fn distance_scaling(spec: &ScalingSpec, cfg: &PipelineConfig) -> Result<ScalingResult> {
    let ds = &spec.distances;
    let (lo, hi) = ds.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
    if ds.len() < 4 || hi < 2.0 * lo {
        return Err(TrapError::Config("distance scaling needs at least 4 distances spanning a factor of 2".into()));
    }
    let points: Vec<ScalingPoint> = ds
        .iter()
        .map(|&d| match run_at(d, spec, cfg) {
            Ok((r, omega)) => {
                let rep = &r.report;
                let ax = rep.modes.mode_along([0.0, 0.0, 1.0]);
                let (peak, error) = match axial_profile(rep, ax, None) {
                    Ok(p) => (Some(p.peak), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let radial = |v: &[f64; 3]| (0..3).filter(|&k| k != ax).map(|k| v[k]).sum::<f64>();
                ScalingPoint {
                    distance: d,
                    rf_frequency: omega,
                    patches: r.patches.len(),
                    peak,
                    frequencies: rep.modes.frequencies,
                    radial_gamma: radial(&rep.totals),
                    radial_spectral_density: radial(&rep.spectral_density),
                    error,
                }
            }
            Err(e) => {
                log::warn!("distance {d:e} m failed: {e}");
                ScalingPoint {
                    distance: d,
                    rf_frequency: f64::NAN,
                    patches: 0,
                    peak: None,
                    frequencies: [f64::NAN; 3],
                    radial_gamma: f64::NAN,
                    radial_spectral_density: f64::NAN,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let samples: Vec<(f64, f64)> = points.iter().filter_map(|p| p.peak.map(|z| (p.distance * 1e6, z * 1e6))).collect();
    let fit = fit_line(&samples)?;
    let ok: Vec<&ScalingPoint> = points.iter().filter(|p| p.error.is_none()).collect();
    let law = |f: &dyn Fn(&ScalingPoint) -> f64| {
        let s: Vec<(f64, f64)> = ok.iter().map(|p| (p.distance, f(p))).collect();
        fit_power_law(&s).ok()
    };
    Ok(ScalingResult {
        radial_gamma_law: law(&|p| p.radial_gamma),
        radial_spectral_law: law(&|p| p.radial_spectral_density),
        fit,
        points,
    })
}

/// Spectral density against height above a large grounded disc.
#[derive(Debug, Clone, Serialize)]
pub struct DiscScaling {
    pub radius: f64,
    pub patches: usize,
    /// (d, Σ_k S_E,k) with s₀ = 1.
    pub samples: Vec<(f64, f64)>,
    pub law: PowerLawFit,
}

/// Large-plane proxy for the distance power law: one disc operator, the
/// ion moved along the disc axis.
pub fn disc_power_law(distances: &[f64], radius: f64, sectors: usize, solver: SolverConfig) -> Result<DiscScaling> {
    let dmin = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    if distances.len() < 3 || !(dmin > 0.0) {
        return Err(TrapError::Config("disc power law needs at least 3 positive distances".into()));
    }
    let patches = polar_disc::<f64>(radius, 0.05 * dmin, sectors, Vec3::new(0.0, 0.0, dmin));
    let n = patches.len();
    let areas = patches.areas.clone();
    let op = assemble(std::sync::Arc::new(patches), solver)?;
    let axes = [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()];
    let samples = distances
        .iter()
        .map(|&d| {
            let cs = patch_couplings_adjoint_many(&op, Vec3::new(0.0, 0.0, d), &axes)?;
            let per_axis: Vec<f64> = cs
                .iter()
                .map(|c| {
                    let t: Vec<f64> = c.values.iter().zip(&areas).map(|(v, a)| v * v / a).collect();
                    pairwise_sum(&t)
                })
                .collect();
            Ok((d, per_axis.iter().sum()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscScaling {
        radius,
        patches: n,
        law: fit_power_law(&samples)?,
        samples,
    })
}
