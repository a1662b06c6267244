//! Field at the ion per volt on a single patch.
//!
//! The direct method solves once per patch. The adjoint method uses Green
//! reciprocity: the charge a dipole p at the ion induces on grounded patch i
//! equals p · c_i, so one solve per direction yields every coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::geometry::distance::min_distance;
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::operator::BemOperator;
use super::solution::field_of_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMethod {
    Direct,
    Adjoint,
}

/// Per-patch couplings along one direction, 1/m.
#[derive(Debug, Clone)]
pub struct PatchCouplings<T> {
    pub direction: Vec3<T>,
    pub values: Vec<T>,
    pub method: CouplingMethod,
}

/// Dipole half-separation relative to the nominal ion-electrode distance.
pub const DIPOLE_SEPARATION: f64 = 1e-4;

/// Field at `ion` with patch `i` at 1 V and every other patch grounded.
pub fn patch_coupling_direct<T: Real>(op: &BemOperator<T>, i: usize, ion: Vec3<T>) -> Result<Vec3<T>> {
    Ok(patch_couplings_direct(op, &[i], ion)?.pop().unwrap())
}

/// Direct couplings for a list of patches, batched through the solver.
pub fn patch_couplings_direct<T: Real>(op: &BemOperator<T>, which: &[usize], ion: Vec3<T>) -> Result<Vec<Vec3<T>>> {
    check_ion(op, ion)?;
    let n = op.len();
    let mut out = Vec::with_capacity(which.len());
    for chunk in which.chunks(128) {
        let rhs: Vec<Vec<T>> = chunk
            .iter()
            .map(|&i| {
                let mut v = vec![T::zero(); n];
                v[i] = T::one();
                v
            })
            .collect();
        for sigma in op.solve_many(&rhs)? {
            out.push(field_of_density(&op.kernels, &sigma, ion));
        }
    }
    Ok(out)
}

fn check_ion<T: Real>(op: &BemOperator<T>, ion: Vec3<T>) -> Result<T> {
    let (d, f) = min_distance(ion, op.patches.triangles.iter().copied());
    let size = op.patches.patch_size(f);
    if d < size * T::lit(0.1) {
        return Err(TrapError::TooClose {
            point: ion.to_f64(),
            distance: d.as_f64(),
            panel: size.as_f64(),
        });
    }
    Ok(d)
}

/// Couplings of every patch along each direction in `dirs` (one solve each).
pub fn patch_couplings_adjoint_many<T: Real>(
    op: &BemOperator<T>,
    ion: Vec3<T>,
    dirs: &[Vec3<T>],
) -> Result<Vec<PatchCouplings<T>>> {
    let clearance = check_ion(op, ion)?;
    let delta = op.patches.nominal_distance * T::lit(DIPOLE_SEPARATION);
    if clearance <= delta * T::lit(10.0) {
        return Err(TrapError::TooClose {
            point: ion.to_f64(),
            distance: clearance.as_f64(),
            panel: delta.as_f64(),
        });
    }
    let k = T::lit(crate::constants::COULOMB);
    let half = delta * T::lit(0.5);
    let rhs: Vec<Vec<T>> = dirs
        .iter()
        .map(|&dir| {
            let dir = dir.normalized();
            let (p, m) = (ion + dir * half, ion - dir * half);
            // Grounded conductors: the induced potential cancels the pair's
            // potential, imposed as its average over each patch.
            op.kernels
                .iter()
                .zip(&op.patches.areas)
                .map(|(kern, &a)| -k * (kern.potential(p) - kern.potential(m)) / a)
                .collect()
        })
        .collect();
    let sols = op.solve_many(&rhs)?;
    Ok(dirs
        .iter()
        .zip(sols)
        .map(|(&dir, sigma)| PatchCouplings {
            direction: dir.normalized(),
            values: sigma
                .iter()
                .zip(&op.patches.areas)
                .map(|(s, a)| *s * *a / delta)
                .collect(),
            method: CouplingMethod::Adjoint,
        })
        .collect())
}

pub fn patch_couplings_adjoint<T: Real>(op: &BemOperator<T>, ion: Vec3<T>, k: Vec3<T>) -> Result<PatchCouplings<T>> {
    Ok(patch_couplings_adjoint_many(op, ion, &[k])?.pop().unwrap())
}

/// Direct couplings for every patch projected onto `k`.
pub fn patch_couplings_direct_along<T: Real>(op: &BemOperator<T>, ion: Vec3<T>, k: Vec3<T>) -> Result<PatchCouplings<T>> {
    let all: Vec<usize> = (0..op.len()).collect();
    let k = k.normalized();
    Ok(PatchCouplings {
        direction: k,
        values: patch_couplings_direct(op, &all, ion)?.into_iter().map(|e| e.dot(k)).collect(),
        method: CouplingMethod::Direct,
    })
}
