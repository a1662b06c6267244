//! Mode-resolved heating rates from per-patch couplings.
//!
//! Each patch carries an independent δ-correlated potential of spectral
//! weight s₀ per unit area, so S_E,k = s₀ Σ_i c_{i,k}²/A_i and
//! Γ_k = e²/(4mħω_k) · S_E,k.

mod export;
mod profile;

pub use export::{
    export_field_vectors, write_axial_profile_csv, write_cumulative_csv, write_field_samples_csv, write_heatmap, write_records_csv, FieldGrid,
    FieldSample,
};
pub use profile::{axial_profile, axial_profile_with, distance_profile, AxialProfile, DistanceProfile, PROFILE_BIN, PROFILE_SMOOTHING};

use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, HBAR};
use crate::electrostatics::PatchCouplings;
use crate::error::{Result, TrapError};
use crate::geometry::PatchSet;
use crate::scalar::{pairwise_sum, Real};
use crate::trapdynamics::{IonSpecies, SecularModes};

/// Patch-potential noise: S_φ(f) = s₀ · (f_ref/f)^β per unit area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// V²·m²/Hz
    pub s0: f64,
    pub beta: f64,
    /// Hz
    pub reference_frequency: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            s0: 1e-20,
            beta: 0.0,
            reference_frequency: 1e6,
        }
    }
}

impl NoiseModel {
    pub fn flat(s0: f64) -> Self {
        Self { s0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 >= 0.0 && self.s0.is_finite()) {
            return Err(TrapError::param("s0", "must be finite and non-negative"));
        }
        if !self.beta.is_finite() {
            return Err(TrapError::param("beta", "must be finite"));
        }
        if !(self.reference_frequency > 0.0) {
            return Err(TrapError::param("reference_frequency", "must be positive"));
        }
        Ok(())
    }

    /// Spectral weight at frequency `f` (Hz).
    pub fn at(&self, f: f64) -> f64 {
        if self.beta == 0.0 {
            self.s0
        } else {
            self.s0 * (self.reference_frequency / f).powf(self.beta)
        }
    }
}

/// Γ = e²/(4mħω) · S_E with ω = 2π·`frequency` (Hz); quanta/s.
pub fn rate_from_spectral_density(s_e: f64, frequency: f64, species: &IonSpecies) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(TrapError::Domain(format!("mode frequency must be positive, got {frequency}")));
    }
    if !(s_e >= 0.0) {
        return Err(TrapError::Domain(format!("spectral density must be non-negative, got {s_e}")));
    }
    Ok(rate_prefactor(frequency, species) * s_e)
}

fn rate_prefactor(frequency: f64, species: &IonSpecies) -> f64 {
    let omega = std::f64::consts::TAU * frequency;
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * species.mass * HBAR * omega)
}

/// Mode frame used for a heating evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeFrame {
    /// Hz
    pub frequencies: [f64; 3],
    pub axes: [[f64; 3]; 3],
}

impl ModeFrame {
    pub fn from_modes<T: Real>(m: &SecularModes<T>) -> Self {
        Self {
            frequencies: m.frequencies.map(|f| f.as_f64()),
            axes: m.axes.map(|a| a.to_f64()),
        }
    }

    pub fn check_orthonormal(&self) -> Result<()> {
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = (0..3).map(|i| self.axes[a][i] * self.axes[b][i]).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                if (d - e).abs() > 1e-8 {
                    return Err(TrapError::Config(format!("mode axes {a} and {b} are not orthonormal (dot {d:e})")));
                }
            }
        }
        Ok(())
    }

    /// Index of the mode closest to `dir`.
    pub fn mode_along(&self, dir: [f64; 3]) -> usize {
        let score = |k: usize| (0..3).map(|i| self.axes[k][i] * dir[i]).sum::<f64>().abs();
        (0..3).max_by(|&a, &b| score(a).partial_cmp(&score(b)).unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchHeatingRecord {
    pub patch: usize,
    /// Γ_{i,k}, quanta/s.
    pub gamma: [f64; 3],
    /// |c_{i,k}|, 1/m.
    pub coupling: [f64; 3],
    pub area: f64,
    pub distance_to_ion: f64,
    /// Signed axial offset from the ion, m.
    pub axial: f64,
    /// Sorted axial offsets of the patch vertices, m.
    pub axial_extent: [f64; 3],
    pub electrode: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatingReport {
    pub modes: ModeFrame,
    pub noise: NoiseModel,
    pub species: IonSpecies,
    pub records: Vec<PatchHeatingRecord>,
    /// Γ_k, quanta/s.
    pub totals: [f64; 3],
    /// S_E,k, V²/m²/Hz.
    pub spectral_density: [f64; 3],
    pub electrodes: Vec<String>,
}

impl HeatingReport {
    pub fn total(&self) -> f64 {
        self.totals.iter().sum()
    }

    /// Records sorted by distance with the cumulative fraction of mode `k`.
    pub fn cumulative_by_distance(&self, k: usize) -> Vec<(f64, f64)> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| {
            self.records[a]
                .distance_to_ion
                .partial_cmp(&self.records[b].distance_to_ion)
                .unwrap()
                .then(a.cmp(&b))
        });
        let total = self.totals[k];
        let mut acc = 0.0;
        idx.iter()
            .map(|&i| {
                acc += self.records[i].gamma[k];
                let f = if total > 0.0 { acc / total } else { 0.0 };
                (self.records[i].distance_to_ion, f)
            })
            .collect()
    }
}

/// Per-patch Γ_{i,k} for the three mode axes in `modes`.
///
/// `couplings[k]` must hold the couplings along `modes.axes[k]`.
pub fn per_patch_heating<T: Real>(
    patches: &PatchSet<T>,
    couplings: &[PatchCouplings<T>],
    modes: &ModeFrame,
    noise: &NoiseModel,
    species: &IonSpecies,
) -> Result<HeatingReport> {
    noise.validate()?;
    species.validate()?;
    modes.check_orthonormal()?;
    if couplings.len() != 3 || couplings.iter().any(|c| c.values.len() != patches.len()) {
        return Err(TrapError::Config("need couplings for all three modes over every patch".into()));
    }
    for (k, c) in couplings.iter().enumerate() {
        let d = c.direction.to_f64();
        let dot: f64 = (0..3).map(|i| d[i] * modes.axes[k][i]).sum();
        if (dot.abs() - 1.0).abs() > 1e-8 {
            return Err(TrapError::Config(format!("couplings {k} are not along mode axis {k}")));
        }
    }
    let weight: Vec<f64> = (0..3)
        .map(|k| Ok(noise.at(modes.frequencies[k]) * rate_prefactor_checked(modes.frequencies[k], species)?))
        .collect::<Result<_>>()?;
    let ion = patches.ion;
    let axial = patches.axial_direction;
    let records: Vec<PatchHeatingRecord> = (0..patches.len())
        .map(|i| {
            let a = patches.areas[i].as_f64();
            let c = [0, 1, 2].map(|k| couplings[k].values[i].as_f64());
            PatchHeatingRecord {
                patch: i,
                gamma: [0, 1, 2].map(|k| weight[k] * c[k] * c[k] / a),
                coupling: c.map(f64::abs),
                area: a,
                distance_to_ion: patches.distance_to_ion[i].as_f64(),
                axial: (patches.centroids[i] - ion).dot(axial).as_f64(),
                axial_extent: {
                    let mut z = patches.triangles[i].map(|v| (v - ion).dot(axial).as_f64());
                    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    z
                },
                electrode: patches.electrode[i],
            }
        })
        .collect();
    let se: [f64; 3] = [0, 1, 2].map(|k| {
        let terms: Vec<f64> = records.iter().map(|r| r.coupling[k] * r.coupling[k] / r.area).collect();
        noise.at(modes.frequencies[k]) * pairwise_sum(&terms)
    });
    let totals = [0, 1, 2].map(|k| {
        let terms: Vec<f64> = records.iter().map(|r| r.gamma[k]).collect();
        pairwise_sum(&terms)
    });
    Ok(HeatingReport {
        modes: modes.clone(),
        noise: *noise,
        species: species.clone(),
        records,
        totals,
        spectral_density: se,
        electrodes: patches.electrodes.iter().map(|e| e.id.clone()).collect(),
    })
}

fn rate_prefactor_checked(frequency: f64, species: &IonSpecies) -> Result<f64> {
    rate_from_spectral_density(1.0, frequency, species)
}

/// Fraction of mode `k`'s total from patches within `radius` of the ion.
pub fn fraction_within(report: &HeatingReport, k: usize, radius: f64) -> f64 {
    let total = report.totals[k];
    if total <= 0.0 {
        return 0.0;
    }
    if report.records.iter().all(|r| r.distance_to_ion <= radius) {
        return 1.0;
    }
    let inside: Vec<f64> = report
        .records
        .iter()
        .filter(|r| r.distance_to_ion <= radius)
        .map(|r| r.gamma[k])
        .collect();
    pairwise_sum(&inside) / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ytterbium_rate_oracle() {
        let g = rate_from_spectral_density(1e-12, 2.24e6, &IonSpecies::yb171()).unwrap();
        // e² / (4 · 171 u · ħ · 2π·2.24 MHz) · 1e-12
        assert!((g - 15.227).abs() < 0.01, "{g}");
    }

    #[test]
    fn rate_is_linear_and_zero_at_zero() {
        let sp = IonSpecies::yb171();
        assert_eq!(rate_from_spectral_density(0.0, 1e6, &sp).unwrap(), 0.0);
        let a = rate_from_spectral_density(3e-13, 1e6, &sp).unwrap();
        let b = rate_from_spectral_density(6e-13, 1e6, &sp).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!(matches!(rate_from_spectral_density(1.0, 0.0, &sp), Err(TrapError::Domain(_))));
    }

    #[test]
    fn noise_spectrum() {
        let n = NoiseModel {
            s0: 2.0,
            beta: 1.0,
            reference_frequency: 1e6,
        };
        assert!((n.at(2e6) - 1.0).abs() < 1e-15);
        assert!(NoiseModel::flat(-1.0).validate().is_err());
    }
}
