//! Geometry → patches → solves → modes → heating, in one call.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::electrostatics::{
    assemble, patch_couplings_adjoint_many, patch_couplings_direct_along, BemOperator, CouplingMethod, DirichletSolution,
    PatchCouplings, SolverConfig,
};
use crate::error::Result;
use crate::geometry::{discretize, DiscretizeOptions, Grading, PatchSet, TrapGeometry};
use crate::heating::{per_patch_heating, HeatingReport, ModeFrame, NoiseModel};
use crate::scalar::Real;
use crate::trapdynamics::{
    calibrate_endcaps, dc_field, find_center, rf_basis_field, secular_modes, BasisField, CenterSearch, DriveConfig,
    IonSpecies, SecularModes, TrapPotential,
};
use crate::vec3::Vec3;

/// Axial frequency used when no DC voltages are configured, Hz.
pub const DEFAULT_AXIAL_FREQUENCY: f64 = 0.5e6;

/// Default patch size on the default traps, m (just under the 9 µm tooth gap).
pub const DEFAULT_TARGET_EDGE: f64 = 8.9e-6;

pub fn default_grading() -> Grading {
    Grading {
        exponent: 2.0,
        max_factor: 16.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub discretize: DiscretizeOptions,
    pub solver: SolverConfig,
    pub drive: DriveConfig,
    pub species: IonSpecies,
    pub noise: NoiseModel,
    /// Endcap voltage is calibrated to this axial frequency (Hz) when
    /// `drive.dc_voltages` is empty; `None` leaves the DC electrodes grounded.
    pub axial_frequency: Option<f64>,
    pub coupling: CouplingMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            discretize: DiscretizeOptions::graded(DEFAULT_TARGET_EDGE, default_grading()),
            solver: SolverConfig::default(),
            drive: DriveConfig::new(150.0, 11e6),
            species: IonSpecies::yb171(),
            noise: NoiseModel::default(),
            axial_frequency: Some(DEFAULT_AXIAL_FREQUENCY),
            coupling: CouplingMethod::Adjoint,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub discretize_s: f64,
    pub solve_s: f64,
    pub modes_s: f64,
    pub heating_s: f64,
}

pub struct PipelineResult<T: Real> {
    pub patches: Arc<PatchSet<T>>,
    pub operator: BemOperator<T>,
    pub rf_basis: Arc<DirichletSolution<T>>,
    pub potential: TrapPotential<T>,
    /// Calibrated common endcap voltage, when calibration ran.
    pub endcap_voltage: Option<f64>,
    pub modes: SecularModes<T>,
    pub couplings: Vec<PatchCouplings<T>>,
    pub report: HeatingReport,
    pub timings: Timings,
}

/// Discretizes and factors the operator, then runs [`run_on_operator`].
pub fn run_pipeline<T: Real>(geom: &TrapGeometry<T>, cfg: &PipelineConfig) -> Result<PipelineResult<T>> {
    let t0 = Instant::now();
    let patches = Arc::new(discretize(geom, &cfg.discretize)?);
    let discretize_s = t0.elapsed().as_secs_f64();
    let op = assemble(patches, cfg.solver)?;
    let mut r = run_on_operator(op, cfg)?;
    r.timings.discretize_s = discretize_s;
    Ok(r)
}

pub fn run_on_operator<T: Real>(op: BemOperator<T>, cfg: &PipelineConfig) -> Result<PipelineResult<T>> {
    let mut timings = Timings::default();
    let t = Instant::now();
    let rf = Arc::new(rf_basis_field(&op)?);
    timings.solve_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let patches = op.patches.clone();
    let guess = patches.ion;
    let scale = patches.nominal_distance;
    let base = TrapPotential::new(rf.clone() as Arc<dyn BasisField<T>>, None, cfg.drive.clone(), cfg.species.clone(), scale)?;
    let (dc, endcap_voltage): (Option<Arc<dyn BasisField<T>>>, Option<f64>) = if !cfg.drive.dc_voltages.is_empty() {
        (dc_field(&op, &cfg.drive.dc_voltages)?.map(|s| Arc::new(s) as Arc<dyn BasisField<T>>), None)
    } else if let Some(f) = cfg.axial_frequency {
        let (u, field) = calibrate_endcaps(&op, &base, guess, f)?;
        (Some(field), Some(u))
    } else {
        (None, None)
    };
    let potential = base.with_dc(dc)?;
    let center = find_center(&potential, guess, CenterSearch::default())?;
    let modes = secular_modes(&potential, center)?;
    timings.modes_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let frame = ModeFrame::from_modes(&modes);
    let couplings = mode_couplings(&op, center, &modes.axes, cfg.coupling)?;
    let shift = center.distance(patches.ion);
    let report = if shift > scale * T::lit(1e-9) {
        let moved = (*patches).clone().with_ion(center);
        per_patch_heating(&moved, &couplings, &frame, &cfg.noise, &cfg.species)?
    } else {
        per_patch_heating(&patches, &couplings, &frame, &cfg.noise, &cfg.species)?
    };
    timings.heating_s = t.elapsed().as_secs_f64();

    Ok(PipelineResult {
        patches,
        rf_basis: rf,
        potential,
        endcap_voltage,
        modes,
        couplings,
        report,
        timings,
        operator: op,
    })
}

/// Couplings along each axis at `ion`.
pub fn mode_couplings<T: Real>(
    op: &BemOperator<T>,
    ion: Vec3<T>,
    axes: &[Vec3<T>; 3],
    method: CouplingMethod,
) -> Result<Vec<PatchCouplings<T>>> {
    match method {
        CouplingMethod::Adjoint => patch_couplings_adjoint_many(op, ion, axes),
        CouplingMethod::Direct => axes.iter().map(|&a| patch_couplings_direct_along(op, ion, a)).collect(),
    }
}
