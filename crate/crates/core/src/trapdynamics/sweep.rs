use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::ELEMENTARY_CHARGE;
use crate::electrostatics::{solve_dirichlet, BemOperator};
use crate::error::{Result, TrapError};
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::{endcap_indices, find_center, secular_modes, BasisField, CenterSearch, DriveConfig, TrapPotential};

/// ω/Ω above this value is unstable; the limit itself counts as stable.
pub const STABILITY_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySample {
    pub rf_frequency: f64,
    /// Secular frequencies in ascending order; NaN for an unconfined mode.
    pub frequencies: [f64; 3],
    pub ratio_max: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySweep {
    pub samples: Vec<StabilitySample>,
    /// Drive frequency where ratio_max crosses the limit, interpolated.
    pub boundary: Option<f64>,
}

/// Secular frequencies over a list of drive frequencies at fixed amplitude.
/// Samples are independent and evaluated in parallel; output follows input order.
pub fn stability_sweep<T: Real>(pot: &TrapPotential<T>, guess: Vec3<T>, frequencies: &[f64]) -> Result<StabilitySweep> {
    if frequencies.len() < 2 {
        return Err(TrapError::param("rf_frequencies", "need at least two samples"));
    }
    if frequencies.iter().any(|f| !(*f > 0.0)) {
        return Err(TrapError::param("rf_frequencies", "must be positive"));
    }
    let samples: Vec<StabilitySample> = frequencies
        .par_iter()
        .map(|&f| {
            let mut drive = pot.drive.clone();
            drive.rf_frequency = f;
            let failed = StabilitySample {
                rf_frequency: f,
                frequencies: [f64::NAN; 3],
                ratio_max: f64::NAN,
                stable: false,
            };
            let Ok(p) = pot.with_drive(drive) else { return failed };
            let Ok(c) = find_center(&p, guess, CenterSearch::default()) else { return failed };
            match secular_modes(&p, c) {
                Ok(m) => {
                    let ratio = m.max_stability_ratio().as_f64();
                    StabilitySample {
                        rf_frequency: f,
                        frequencies: m.frequencies.map(|v| v.as_f64()),
                        ratio_max: ratio,
                        stable: ratio <= STABILITY_LIMIT,
                    }
                }
                Err(_) => failed,
            }
        })
        .collect();
    let mut boundary = None;
    for w in samples.windows(2) {
        let (a, b) = (w[0].ratio_max - STABILITY_LIMIT, w[1].ratio_max - STABILITY_LIMIT);
        if a.is_finite() && b.is_finite() && a * b <= 0.0 && a != b {
            let t = a / (a - b);
            boundary = Some(w[0].rf_frequency + t * (w[1].rf_frequency - w[0].rf_frequency));
            break;
        }
    }
    Ok(StabilitySweep { samples, boundary })
}

/// Columns: Ω_Hz, omega_Hz_x, omega_Hz_y, omega_Hz_z, ratio_max, stable.
/// The three frequency columns follow ascending mode order.
pub fn write_sweep_csv<W: Write>(sweep: &StabilitySweep, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "Omega_Hz,omega_Hz_x,omega_Hz_y,omega_Hz_z,ratio_max,stable")?;
    for s in &sweep.samples {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{}",
            s.rf_frequency, s.frequencies[0], s.frequencies[1], s.frequencies[2], s.ratio_max, s.stable as u8
        )?;
    }
    Ok(())
}

/// Common endcap voltage giving `target_hz` along the trap axis.
///
/// The axial curvature is affine in the endcap voltage, so two Hessian
/// evaluations fix it; a third confirms the result.
pub fn calibrate_endcaps<T: Real>(
    op: &BemOperator<T>,
    pot: &TrapPotential<T>,
    guess: Vec3<T>,
    target_hz: f64,
) -> Result<(f64, Arc<dyn BasisField<T>>)> {
    let electrodes = &op.patches.electrodes;
    let caps = endcap_indices(electrodes);
    if caps.is_empty() {
        return Err(TrapError::Config("geometry has no endcap electrodes".into()));
    }
    let unit: Vec<T> = (0..electrodes.len())
        .map(|i| if caps.contains(&i) { T::one() } else { T::zero() })
        .collect();
    let unit_sol = Arc::new(solve_dirichlet(op, &unit)?);
    let axial = op.patches.axial_direction;
    let rf_only = pot.with_dc(None)?;
    let center = find_center(&rf_only, guess, CenterSearch::default())?;
    let h = pot.length_scale * T::lit(0.01);
    let curvature = |p: &TrapPotential<T>, c: Vec3<T>| -> f64 {
        let (m, _) = p.hessian(c, h);
        crate::vec3::mat3_mul_vec(&m, axial).dot(axial).as_f64()
    };
    let k_rf = curvature(&rf_only, center);
    let dc_only = TrapPotential::new(
        rf_only.rf.clone(),
        Some(unit_sol.clone() as Arc<dyn BasisField<T>>),
        DriveConfig { rf_amplitude: 0.0, ..pot.drive.clone() },
        pot.species.clone(),
        pot.length_scale,
    )?;
    let k_unit = curvature(&dc_only, center);
    if k_unit == 0.0 || !k_unit.is_finite() {
        return Err(TrapError::Config("endcaps do not produce axial curvature".into()));
    }
    let m = pot.species.mass;
    let w = std::f64::consts::TAU * target_hz;
    let k_target = m * w * w / ELEMENTARY_CHARGE;
    let u = (k_target - k_rf) / k_unit;
    let scaled = Arc::new(unit_sol.scaled(T::lit(u)));
    Ok((u, scaled as Arc<dyn BasisField<T>>))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn sweep_ratio_falls_as_inverse_square() {
        let rf = QuadrupoleField { r0: 200e-6, gain: 1.0, center: Vec3::zero() };
        struct Well;
        impl BasisField<f64> for Well {
            fn field(&self, x: Vec3<f64>) -> Vec3<f64> {
                Vec3::new(0.0, 0.0, -x.z) * 1e3
            }
            fn potential(&self, x: Vec3<f64>) -> f64 {
                0.5e3 * x.z * x.z
            }
        }
        let pot = TrapPotential::new(Arc::new(rf), Some(Arc::new(Well)), DriveConfig::new(150.0, 11e6), IonSpecies::yb171(), 200e-6).unwrap();
        let fs: Vec<f64> = (0..6).map(|i| 6e6 + 3e6 * i as f64).collect();
        let sweep = stability_sweep(&pot, Vec3::new(1e-6, 0.0, 0.0), &fs).unwrap();
        for w in sweep.samples.windows(2) {
            assert!(w[1].ratio_max < w[0].ratio_max);
        }
        assert!(sweep.boundary.is_some());
        let mut buf = Vec::new();
        write_sweep_csv(&sweep, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }
}
