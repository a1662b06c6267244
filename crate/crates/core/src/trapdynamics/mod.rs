//! RF pseudopotential, trap centre, secular modes and drive sweeps.

mod center;
mod modes;
mod sweep;

pub use center::{find_center, CenterSearch};
pub use modes::{secular_modes, SecularModes};
pub use sweep::{calibrate_endcaps, stability_sweep, write_sweep_csv, StabilitySample, StabilitySweep, STABILITY_LIMIT};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE};
use crate::electrostatics::{solve_dirichlet, BemOperator, DirichletSolution};
use crate::error::{Result, TrapError};
use crate::geometry::ElectrodeRole;
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, label: impl Into<String>) -> Result<Self> {
        let s = Self {
            mass,
            charge,
            label: label.into(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn yb171() -> Self {
        Self {
            mass: 171.0 * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
            label: "171Yb+".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(TrapError::param("mass", "must be positive"));
        }
        if self.charge == 0.0 || !self.charge.is_finite() {
            return Err(TrapError::param("charge", "must be nonzero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// RF amplitude, V.
    pub rf_amplitude: f64,
    /// RF drive frequency, Hz.
    pub rf_frequency: f64,
    /// Static voltage per electrode (empty means all grounded). Entries on
    /// RF electrodes are ignored.
    #[serde(default)]
    pub dc_voltages: Vec<f64>,
}

impl DriveConfig {
    pub fn new(rf_amplitude: f64, rf_frequency: f64) -> Self {
        Self {
            rf_amplitude,
            rf_frequency,
            dc_voltages: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rf_amplitude >= 0.0 && self.rf_amplitude.is_finite()) {
            return Err(TrapError::param("rf_amplitude", "must be non-negative"));
        }
        if !(self.rf_frequency > 0.0 && self.rf_frequency.is_finite()) {
            return Err(TrapError::param("rf_frequency", "must be positive"));
        }
        if self.dc_voltages.iter().any(|v| !v.is_finite()) {
            return Err(TrapError::param("dc_voltages", "must be finite"));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU * self.rf_frequency
    }
}

/// A static field pattern evaluable anywhere off the electrodes.
pub trait BasisField<T: Real>: Send + Sync {
    fn field(&self, x: Vec3<T>) -> Vec3<T>;
    fn potential(&self, x: Vec3<T>) -> T;
}

impl<T: Real> BasisField<T> for DirichletSolution<T> {
    fn field(&self, x: Vec3<T>) -> Vec3<T> {
        self.field_unchecked(x)
    }
    fn potential(&self, x: Vec3<T>) -> T {
        self.potential_unchecked(x)
    }
}

/// Ideal linear quadrupole: E = gain·(x − x₀, −(y − y₀), 0)/r₀².
#[derive(Debug, Clone, Copy)]
pub struct QuadrupoleField<T> {
    pub r0: T,
    pub gain: T,
    pub center: Vec3<T>,
}

impl<T: Real> BasisField<T> for QuadrupoleField<T> {
    fn field(&self, x: Vec3<T>) -> Vec3<T> {
        let r = x - self.center;
        Vec3::new(r.x, -r.y, T::zero()) * (self.gain / (self.r0 * self.r0))
    }
    fn potential(&self, x: Vec3<T>) -> T {
        let r = x - self.center;
        -self.gain * (r.x * r.x - r.y * r.y) / (T::lit(2.0) * self.r0 * self.r0)
    }
}

/// RF electrodes at 1 V, everything else grounded.
pub fn rf_basis_field<T: Real>(op: &BemOperator<T>) -> Result<DirichletSolution<T>> {
    let electrodes = &op.patches.electrodes;
    if !electrodes.iter().any(|e| e.role == ElectrodeRole::Rf) {
        return Err(TrapError::Config("geometry has no RF electrode".into()));
    }
    let v: Vec<T> = electrodes
        .iter()
        .map(|e| if e.role == ElectrodeRole::Rf { T::one() } else { T::zero() })
        .collect();
    solve_dirichlet(op, &v)
}

/// Static field for the given voltages, or `None` when all are zero.
pub fn dc_field<T: Real>(op: &BemOperator<T>, dc_voltages: &[f64]) -> Result<Option<DirichletSolution<T>>> {
    let electrodes = &op.patches.electrodes;
    if dc_voltages.is_empty() {
        return Ok(None);
    }
    if dc_voltages.len() != electrodes.len() {
        return Err(TrapError::Config(format!(
            "{} DC voltages given for {} electrodes",
            dc_voltages.len(),
            electrodes.len()
        )));
    }
    let v: Vec<T> = electrodes
        .iter()
        .zip(dc_voltages)
        .map(|(e, &u)| if e.role == ElectrodeRole::Rf { T::zero() } else { T::lit(u) })
        .collect();
    if v.iter().all(|u| *u == T::zero()) {
        return Ok(None);
    }
    Ok(Some(solve_dirichlet(op, &v)?))
}

/// Time-averaged trapping potential of one ion species, in eV.
///
/// Φ(r) = q²V²|E_rf(r)|²/(4mΩ²) + q·φ_dc(r), with `E_rf` the field per volt
/// on the RF electrodes.
#[derive(Clone)]
pub struct TrapPotential<T: Real> {
    pub rf: Arc<dyn BasisField<T>>,
    pub dc: Option<Arc<dyn BasisField<T>>>,
    pub drive: DriveConfig,
    pub species: IonSpecies,
    /// Characteristic length (ion-electrode distance) for step sizes.
    pub length_scale: T,
    rf_coeff: T,
    dc_coeff: T,
}

impl<T: Real> TrapPotential<T> {
    pub fn new(
        rf: Arc<dyn BasisField<T>>,
        dc: Option<Arc<dyn BasisField<T>>>,
        drive: DriveConfig,
        species: IonSpecies,
        length_scale: T,
    ) -> Result<Self> {
        drive.validate()?;
        species.validate()?;
        let q = species.charge;
        let om = drive.omega();
        let rf_coeff = q * q * drive.rf_amplitude * drive.rf_amplitude / (4.0 * species.mass * om * om) / ELEMENTARY_CHARGE;
        Ok(Self {
            rf,
            dc,
            rf_coeff: T::lit(rf_coeff),
            dc_coeff: T::lit(q / ELEMENTARY_CHARGE),
            drive,
            species,
            length_scale,
        })
    }

    /// Same fields at a different drive.
    pub fn with_drive(&self, drive: DriveConfig) -> Result<Self> {
        Self::new(self.rf.clone(), self.dc.clone(), drive, self.species.clone(), self.length_scale)
    }

    /// Same drive with the static part replaced.
    pub fn with_dc(&self, dc: Option<Arc<dyn BasisField<T>>>) -> Result<Self> {
        Self::new(self.rf.clone(), dc, self.drive.clone(), self.species.clone(), self.length_scale)
    }

    /// Pseudopotential energy in eV.
    pub fn energy(&self, x: Vec3<T>) -> T {
        let e = self.rf.field(x);
        let mut phi = self.rf_coeff * e.norm_squared();
        if let Some(dc) = &self.dc {
            phi = phi + self.dc_coeff * dc.potential(x);
        }
        phi
    }

    fn jacobian_step(&self) -> T {
        self.length_scale * T::lit(1e-3)
    }

    /// ∇Φ in eV/m from field values: 2c·Jᵀ E_rf − (q/e)·E_dc.
    pub fn gradient(&self, x: Vec3<T>) -> Vec3<T> {
        let s = self.jacobian_step();
        let e0 = self.rf.field(x);
        let mut g = Vec3::zero();
        for j in 0..3 {
            let d = Vec3::axis(j) * s;
            let dj = (self.rf.field(x + d) - self.rf.field(x - d)) / (T::lit(2.0) * s);
            // column j of J is ∂E/∂x_j; (Jᵀ E)_j = dj · E
            let v = dj.dot(e0);
            match j {
                0 => g.x = v,
                1 => g.y = v,
                _ => g.z = v,
            }
        }
        g = g * (T::lit(2.0) * self.rf_coeff);
        if let Some(dc) = &self.dc {
            g -= dc.field(x) * self.dc_coeff;
        }
        g
    }

    /// Central-difference Hessian of Φ (eV/m²) from gradients at step `h`,
    /// with its relative asymmetry before symmetrisation.
    pub fn hessian(&self, x: Vec3<T>, h: T) -> (Mat3<T>, f64) {
        let mut m = [[T::zero(); 3]; 3];
        for j in 0..3 {
            let d = Vec3::axis(j) * h;
            let col = (self.gradient(x + d) - self.gradient(x - d)) / (T::lit(2.0) * h);
            for i in 0..3 {
                m[i][j] = col[i];
            }
        }
        let scale = frobenius(&m);
        let mut asym = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                asym = asym.max((m[i][j] - m[j][i]).abs());
            }
        }
        let rel = if scale > T::zero() { (asym / scale).as_f64() } else { 0.0 };
        for i in 0..3 {
            for j in (i + 1)..3 {
                let a = (m[i][j] + m[j][i]) * T::lit(0.5);
                m[i][j] = a;
                m[j][i] = a;
            }
        }
        (m, rel)
    }
}

pub(crate) fn frobenius<T: Real>(m: &Mat3<T>) -> T {
    m.iter().flatten().fold(T::zero(), |a, v| a + *v * *v).sqrt()
}

/// Indices of electrodes whose id starts with `endcap`.
pub fn endcap_indices(electrodes: &[crate::geometry::Electrode]) -> Vec<usize> {
    electrodes
        .iter()
        .enumerate()
        .filter(|(_, e)| e.id.starts_with("endcap"))
        .map(|(i, _)| i)
        .collect()
}
