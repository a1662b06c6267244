//! Run configuration in user units (µm, V, MHz) and its conversion to SI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trapheat::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use trapheat::electrostatics::{CouplingMethod, SolverConfig};
use trapheat::geometry::io::{read_stl, read_trapmesh, ElectrodeLabels};
use trapheat::geometry::{
    build_blade, build_skeleton, BladeParams, DiscretizeOptions, Electrode, ElectrodeRole, Grading, SkeletonParams, TrapGeometry,
};
use trapheat::heating::{FieldGrid, NoiseModel};
use trapheat::pipeline::PipelineConfig;
use trapheat::studies::{DrivePolicy, GapSweep, ScalingSpec, ToothPhase};
use trapheat::trapdynamics::{DriveConfig, IonSpecies};
use trapheat::{TrapError, Vec3};

const MHZ: f64 = 1e6;
/// Dividing by this (rather than multiplying by 1e-6) keeps round values exact.
const UM_PER_M: f64 = 1e6;

/// Drops the last bits of an SI → user unit conversion so defaults print cleanly.
fn user(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if (r - x).abs() <= 1e-12 * x.abs() {
        r
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub resolution: ResolutionSection,
    #[serde(default)]
    pub study: StudySection,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Only used by randomised oracles.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GeometrySection {
    Skeleton(SkeletonSection),
    Blade(BladeSection),
    /// A `.trapmesh` or `.stl` file.
    Mesh(MeshSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkeletonSection {
    pub wire_diameter_um: f64,
    pub tooth_width_um: f64,
    pub tooth_gap_um: f64,
    pub opposing_distance_um: f64,
    pub axial_extent_um: f64,
    /// Derived from the axial extent when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teeth_count: Option<usize>,
    pub endcap_teeth: usize,
    pub strut_length_um: f64,
}

impl Default for SkeletonSection {
    fn default() -> Self {
        let p = SkeletonParams::default();
        Self {
            wire_diameter_um: user(p.wire_diameter * UM_PER_M),
            tooth_width_um: user(p.tooth_width * UM_PER_M),
            tooth_gap_um: user(p.tooth_gap * UM_PER_M),
            opposing_distance_um: user(p.opposing_distance * UM_PER_M),
            axial_extent_um: user(p.axial_extent * UM_PER_M),
            teeth_count: Some(p.teeth_count),
            endcap_teeth: p.endcap_teeth,
            strut_length_um: user(p.strut_length * UM_PER_M),
        }
    }
}

impl SkeletonSection {
    pub fn params(&self) -> SkeletonParams {
        let mut p = SkeletonParams {
            wire_diameter: self.wire_diameter_um / UM_PER_M,
            tooth_width: self.tooth_width_um / UM_PER_M,
            tooth_gap: self.tooth_gap_um / UM_PER_M,
            opposing_distance: self.opposing_distance_um / UM_PER_M,
            axial_extent: self.axial_extent_um / UM_PER_M,
            teeth_count: 0,
            endcap_teeth: self.endcap_teeth,
            strut_length: self.strut_length_um / UM_PER_M,
        };
        p.teeth_count = self.teeth_count.unwrap_or_else(|| p.count_for_extent(false));
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BladeSection {
    pub ion_electrode_distance_um: f64,
    pub blade_length_um: f64,
    pub blade_tip_angle_deg: f64,
    pub blade_depth_um: f64,
    pub endcap_separation_um: f64,
    pub segment_gap_um: f64,
}

impl Default for BladeSection {
    fn default() -> Self {
        let p = BladeParams::default();
        Self {
            ion_electrode_distance_um: user(p.ion_electrode_distance * UM_PER_M),
            blade_length_um: user(p.blade_length * UM_PER_M),
            blade_tip_angle_deg: p.blade_tip_angle,
            blade_depth_um: user(p.blade_depth * UM_PER_M),
            endcap_separation_um: user(p.endcap_separation * UM_PER_M),
            segment_gap_um: user(p.segment_gap * UM_PER_M),
        }
    }
}

impl BladeSection {
    pub fn params(&self) -> BladeParams {
        BladeParams {
            ion_electrode_distance: self.ion_electrode_distance_um / UM_PER_M,
            blade_length: self.blade_length_um / UM_PER_M,
            blade_tip_angle: self.blade_tip_angle_deg,
            blade_depth: self.blade_depth_um / UM_PER_M,
            endcap_separation: self.endcap_separation_um / UM_PER_M,
            segment_gap: self.segment_gap_um / UM_PER_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub path: PathBuf,
    pub ion_um: [f64; 3],
    /// Coordinates in the file are multiplied by this to get metres.
    #[serde(default = "one")]
    pub file_unit_m: f64,
    /// STL only: solid name → electrode id and role ("rf", "dc" or "ground").
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub solids: BTreeMap<String, [String; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub rf_amplitude_v: f64,
    pub rf_frequency_mhz: f64,
    /// Static voltage per electrode; empty calibrates the endcaps instead.
    pub dc_voltages_v: Vec<f64>,
    /// Endcap calibration target; 0 leaves the DC electrodes grounded.
    pub axial_frequency_mhz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            rf_amplitude_v: 150.0,
            rf_frequency_mhz: 11.0,
            dc_voltages_v: Vec::new(),
            axial_frequency_mhz: user(trapheat::pipeline::DEFAULT_AXIAL_FREQUENCY / MHZ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub mass_u: f64,
    pub charge_e: f64,
    pub label: String,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        let s = IonSpecies::yb171();
        Self {
            mass_u: user(s.mass / ATOMIC_MASS_UNIT),
            charge_e: user(s.charge / ELEMENTARY_CHARGE),
            label: s.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// V²·m²/Hz
    pub s0: f64,
    pub beta: f64,
    pub reference_frequency_mhz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::default();
        Self {
            s0: n.s0,
            beta: n.beta,
            reference_frequency_mhz: user(n.reference_frequency / MHZ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionSection {
    pub target_edge_um: f64,
    /// 0 disables distance grading.
    pub grading_exponent: f64,
    pub grading_max_factor: f64,
    pub coupling: CouplingMethod,
    pub memory_cap_mib: usize,
}

impl Default for ResolutionSection {
    fn default() -> Self {
        let g = trapheat::pipeline::default_grading();
        Self {
            target_edge_um: user(trapheat::pipeline::DEFAULT_TARGET_EDGE * UM_PER_M),
            grading_exponent: g.exponent,
            grading_max_factor: g.max_factor,
            coupling: CouplingMethod::Adjoint,
            memory_cap_mib: SolverConfig::default().memory_cap_bytes >> 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// `modes`: drive-frequency sweep, MHz.
    pub sweep_start_mhz: f64,
    pub sweep_stop_mhz: f64,
    pub sweep_points: usize,
    /// `compare`: the reference geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<GeometrySection>,
    /// `optimize`
    pub widths_um: Vec<f64>,
    pub phases: Vec<ToothPhase>,
    pub refine_iterations: usize,
    /// `scaling`
    pub distances_um: Vec<f64>,
    /// Largest ω/Ω kept across distances; 0 keeps Ω fixed instead.
    pub stability_margin: f64,
    pub disc_radius_um: f64,
    pub disc_sectors: usize,
    /// `heat`: export the field of this patch at unit voltage around the ion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_patch: Option<usize>,
    pub field_half_width_um: f64,
    pub field_points: usize,
    /// `validate`: icosphere subdivisions for the sphere oracles.
    pub sphere_subdivisions: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        let g = GapSweep::default();
        let s = ScalingSpec::default();
        Self {
            sweep_start_mhz: 6.0,
            sweep_stop_mhz: 16.0,
            sweep_points: 21,
            baseline: None,
            widths_um: g.widths.iter().map(|w| user(w * UM_PER_M)).collect(),
            phases: g.phases,
            refine_iterations: g.refine_iterations,
            distances_um: s.distances.iter().map(|d| user(d * UM_PER_M)).collect(),
            stability_margin: trapheat::trapdynamics::STABILITY_LIMIT,
            disc_radius_um: 4000.0,
            disc_sectors: 48,
            field_patch: None,
            field_half_width_um: 50.0,
            field_points: 11,
            sphere_subdivisions: 16,
        }
    }
}

/// Unit conversions applied at parse time, recorded in the manifest.
pub fn unit_table() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("*_um", "micrometres, ×1e-6 → m"),
        ("*_mhz", "megahertz, ×1e6 → Hz"),
        ("*_v", "volts"),
        ("mass_u", "atomic mass units, ×1.66053906660e-27 → kg"),
        ("charge_e", "elementary charges, ×1.602176634e-19 → C"),
        ("s0", "V²·m²/Hz"),
    ])
}

/// Config-level failure: the field path and the reason.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn invalid(section: &str, e: TrapError) -> ConfigError {
    match e {
        TrapError::Parameter { field, reason } => ConfigError {
            path: format!("{section}.{field}"),
            message: reason,
        },
        other => ConfigError {
            path: section.to_string(),
            message: other.to_string(),
        },
    }
}

/// Reads a TOML config, or the config embedded in a previous run's manifest.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let cfg = v.get_mut("config").map(serde_json::Value::take).ok_or_else(|| ConfigError {
            path: "config".into(),
            message: "manifest has no embedded config".into(),
        })?;
        return serde_json::from_value(cfg).map_err(|e| ConfigError {
            path: "config".into(),
            message: e.to_string(),
        });
    }
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e: toml::de::Error| ConfigError {
        path: e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_else(|| "config".into()),
        message: e.message().to_string(),
    })
}

impl RunConfig {
    pub fn pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        let r = &self.resolution;
        if !(r.target_edge_um > 0.0) {
            return Err(ConfigError {
                path: "resolution.target_edge_um".into(),
                message: "must be positive".into(),
            });
        }
        let grading = (r.grading_exponent > 0.0).then_some(Grading {
            exponent: r.grading_exponent,
            max_factor: r.grading_max_factor,
        });
        let drive = DriveConfig {
            rf_amplitude: self.drive.rf_amplitude_v,
            rf_frequency: self.drive.rf_frequency_mhz * MHZ,
            dc_voltages: self.drive.dc_voltages_v.clone(),
        };
        drive.validate().map_err(|e| invalid("drive", e))?;
        let species = IonSpecies {
            mass: self.species.mass_u * ATOMIC_MASS_UNIT,
            charge: self.species.charge_e * ELEMENTARY_CHARGE,
            label: self.species.label.clone(),
        };
        species.validate().map_err(|e| invalid("species", e))?;
        let noise = NoiseModel {
            s0: self.noise.s0,
            beta: self.noise.beta,
            reference_frequency: self.noise.reference_frequency_mhz * MHZ,
        };
        noise.validate().map_err(|e| invalid("noise", e))?;
        Ok(PipelineConfig {
            discretize: DiscretizeOptions {
                target_edge: r.target_edge_um / UM_PER_M,
                grading,
            },
            solver: SolverConfig {
                memory_cap_bytes: r.memory_cap_mib << 20,
                ..SolverConfig::default()
            },
            drive,
            species,
            noise,
            axial_frequency: (self.drive.axial_frequency_mhz > 0.0).then_some(self.drive.axial_frequency_mhz * MHZ),
            coupling: r.coupling,
        })
    }

    pub fn gap_sweep(&self) -> GapSweep {
        GapSweep {
            widths: self.study.widths_um.iter().map(|w| w / UM_PER_M).collect(),
            phases: self.study.phases.clone(),
            refine_iterations: self.study.refine_iterations,
        }
    }

    pub fn scaling(&self) -> Result<ScalingSpec, ConfigError> {
        let GeometrySection::Skeleton(s) = &self.geometry else {
            return Err(ConfigError {
                path: "geometry.type".into(),
                message: "distance scaling needs a skeleton template".into(),
            });
        };
        Ok(ScalingSpec {
            distances: self.study.distances_um.iter().map(|d| d / UM_PER_M).collect(),
            template: s.params(),
            policy: if self.study.stability_margin > 0.0 {
                DrivePolicy::ConstantStabilityMargin(self.study.stability_margin)
            } else {
                DrivePolicy::ConstantFrequency
            },
            relative_edge: ScalingSpec::default().relative_edge,
        })
    }

    pub fn field_grid(&self, ion: [f64; 3]) -> FieldGrid {
        let n = self.study.field_points.max(1);
        let hw = self.study.field_half_width_um / UM_PER_M;
        let step = if n > 1 { 2.0 * hw / (n - 1) as f64 } else { 0.0 };
        FieldGrid {
            origin: ion.map(|c| c - hw),
            step: [step; 3],
            counts: [n; 3],
        }
    }
}

/// Builds the geometry a section describes; `section` names it in errors.
pub fn build_geometry(g: &GeometrySection, section: &str) -> Result<TrapGeometry<f64>, ConfigError> {
    match g {
        GeometrySection::Skeleton(s) => build_skeleton(&s.params()).map_err(|e| invalid(section, e)),
        GeometrySection::Blade(b) => build_blade(&b.params()).map_err(|e| invalid(section, e)),
        GeometrySection::Mesh(m) => load_mesh(m).map_err(|e| invalid(section, e)),
    }
}

fn load_mesh(m: &MeshSection) -> trapheat::Result<TrapGeometry<f64>> {
    let io = |source| TrapError::Io {
        path: m.path.display().to_string(),
        source,
    };
    let bytes = std::fs::read(&m.path).map_err(io)?;
    let mut labelled = if m.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("stl")) {
        let mut labels = ElectrodeLabels::new();
        for (solid, [id, role]) in &m.solids {
            let role = ElectrodeRole::parse(role).ok_or_else(|| TrapError::param("solids", format!("unknown role `{role}`")))?;
            labels.insert(solid.clone(), Electrode::new(id.clone(), role));
        }
        let imp = read_stl::<f64>(&bytes, &labels, "solid")?;
        for w in &imp.warnings {
            log::warn!("{w}");
        }
        imp.mesh
    } else {
        read_trapmesh::<f64, _>(std::io::BufReader::new(&bytes[..]))?
    };
    if !(m.file_unit_m > 0.0) {
        return Err(TrapError::param("file_unit_m", "must be positive"));
    }
    for v in &mut labelled.mesh.vertices {
        *v = *v * m.file_unit_m;
    }
    let name = m.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into());
    TrapGeometry::from_mesh(name, labelled.mesh, labelled.electrodes, Vec3::from_f64(m.ion_um.map(|c| c / UM_PER_M)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse("[geometry]\ntype = \"skeleton\"\n").unwrap();
        let mut p = c.pipeline().unwrap();
        let d = PipelineConfig::default();
        // 8.9 µm is not exactly representable either way round.
        assert!((p.discretize.target_edge - d.discretize.target_edge).abs() < 1e-20);
        p.discretize.target_edge = d.discretize.target_edge;
        assert_eq!(p, d);
        let GeometrySection::Skeleton(s) = &c.geometry else { panic!() };
        assert_eq!(s.params(), SkeletonParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("[geometry]\ntype = \"skeleton\"\ntooth_widht_um = 3\n").unwrap_err();
        assert!(e.message.contains("tooth_widht_um"), "{e}");
        assert!(parse("[geometry]\ntype = \"blade\"\n[drive]\nvoltage = 1\n").is_err());
    }

    #[test]
    fn invalid_value_names_field() {
        let c = parse("[geometry]\ntype = \"blade\"\n[species]\nmass_u = -1\n").unwrap();
        assert_eq!(c.pipeline().unwrap_err().path, "species.mass");
    }

    #[test]
    fn round_trips_through_json() {
        let c = parse("[geometry]\ntype = \"blade\"\nblade_tip_angle_deg = 30\n[study]\nbaseline = { type = \"skeleton\" }\n").unwrap();
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
