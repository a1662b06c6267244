use serde::Serialize;

use crate::constants::ELEMENTARY_CHARGE;
use crate::error::{Result, TrapError};
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

use super::{frobenius, TrapPotential};

/// Principal axes and frequencies of the pseudopotential at its minimum.
#[derive(Debug, Clone, Serialize)]
pub struct SecularModes<T> {
    pub center: Vec3<T>,
    /// Hz, ascending.
    pub frequencies: [T; 3],
    /// Unit mode directions matching `frequencies`.
    pub axes: [Vec3<T>; 3],
    /// ω_k/Ω_RF.
    pub stability_ratios: [T; 3],
    /// Relative Hessian asymmetry before symmetrisation.
    pub hessian_asymmetry: f64,
    /// Relative change between the full- and half-step Hessians.
    pub richardson_change: f64,
}

impl<T: Real> SecularModes<T> {
    /// Index of the mode most aligned with `dir`.
    pub fn mode_along(&self, dir: Vec3<T>) -> usize {
        let d = dir.normalized();
        (0..3)
            .max_by(|&a, &b| {
                self.axes[a]
                    .dot(d)
                    .abs()
                    .partial_cmp(&self.axes[b].dot(d).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap()
    }

    pub fn max_stability_ratio(&self) -> T {
        self.stability_ratios.iter().fold(T::zero(), |a, b| a.max(*b))
    }
}

/// Central-difference Hessian at `center` (step 0.01·d, checked against
/// d/200) and its eigen-decomposition.
pub fn secular_modes<T: Real>(pot: &TrapPotential<T>, center: Vec3<T>) -> Result<SecularModes<T>> {
    let h = pot.length_scale * T::lit(0.01);
    let (full, _) = pot.hessian(center, h);
    let (half, asym) = pot.hessian(center, h * T::lit(0.5));
    let mut diff = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            diff[i][j] = full[i][j] - half[i][j];
        }
    }
    let change = (frobenius(&diff) / frobenius(&half)).as_f64();
    if !(change <= 0.01) {
        return Err(TrapError::Resolution(format!(
            "Hessian changes by {:.2}% between step {:e} m and half step",
            change * 100.0,
            h.as_f64()
        )));
    }
    // Richardson extrapolation of the O(h²) central difference.
    let mut m: Mat3<T> = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (half[i][j] * T::lit(4.0) - full[i][j]) / T::lit(3.0);
        }
    }
    let (vals, vecs) = T::sym_eigen3(m);
    let mass = pot.species.mass;
    let omega_rf = pot.drive.rf_frequency;
    let mut modes: Vec<(T, Vec3<T>)> = (0..3)
        .map(|k| {
            let mut axis = Vec3::new(vecs[0][k], vecs[1][k], vecs[2][k]).normalized();
            let lead = (0..3)
                .max_by(|&a, &b| axis[a].abs().partial_cmp(&axis[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap();
            if axis[lead] < T::zero() {
                axis = -axis;
            }
            (vals[k], axis)
        })
        .collect();
    for &(lambda, axis) in &modes {
        if !(lambda > T::zero()) {
            return Err(TrapError::Unconfined {
                axis: axis.to_f64(),
                eigenvalue: lambda.as_f64(),
            });
        }
    }
    let rel_tie = T::lit(1e-9);
    modes.sort_by(|a, b| {
        let scale = a.0.abs().max(b.0.abs());
        if (a.0 - b.0).abs() <= rel_tie * scale {
            let (pa, pb) = (a.1.to_f64(), b.1.to_f64());
            pb.partial_cmp(&pa).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let freq = |lambda: T| T::lit((lambda.as_f64() * ELEMENTARY_CHARGE / mass).sqrt() / std::f64::consts::TAU);
    let frequencies = [freq(modes[0].0), freq(modes[1].0), freq(modes[2].0)];
    Ok(SecularModes {
        center,
        frequencies,
        axes: [modes[0].1, modes[1].1, modes[2].1],
        stability_ratios: frequencies.map(|f| f / T::lit(omega_rf)),
        hessian_asymmetry: asym,
        richardson_change: change,
    })
}
