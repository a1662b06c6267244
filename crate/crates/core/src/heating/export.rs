use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electrostatics::solution::field_of_density;
use crate::electrostatics::BemOperator;
use crate::error::{Result, TrapError};
use crate::geometry::distance::min_distance;
use crate::geometry::io::{patch_mesh, write_trapmesh};
use crate::geometry::PatchSet;
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::{AxialProfile, HeatingReport};

/// Regular sampling lattice, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldGrid {
    pub origin: [f64; 3],
    pub step: [f64; 3],
    pub counts: [usize; 3],
}

impl FieldGrid {
    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.counts.iter().product());
        for i in 0..self.counts[0] {
            for j in 0..self.counts[1] {
                for k in 0..self.counts[2] {
                    out.push([
                        self.origin[0] + i as f64 * self.step[0],
                        self.origin[1] + j as f64 * self.step[1],
                        self.origin[2] + k as f64 * self.step[2],
                    ]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSample {
    pub point: [f64; 3],
    /// V/m for the patch at `voltage`.
    pub field: [f64; 3],
    /// Closer to the surface than a tenth of the local patch size.
    pub near_surface: bool,
    pub is_ion: bool,
}

/// Field of patch `patch` held at `voltage` (all others grounded), sampled
/// on `grid`. The ion position is always the first sample.
pub fn export_field_vectors<T: Real>(op: &BemOperator<T>, patch: usize, voltage: f64, grid: &FieldGrid) -> Result<Vec<FieldSample>> {
    let n = op.len();
    if patch >= n {
        return Err(TrapError::Config(format!("patch {patch} out of range (0..{n})")));
    }
    if grid.counts.contains(&0) {
        return Err(TrapError::Config("field grid has an empty dimension".into()));
    }
    let mut rhs = vec![T::zero(); n];
    rhs[patch] = T::lit(voltage);
    let sigma = op.solve(&rhs)?;
    let ps: &PatchSet<T> = &op.patches;
    let mut pts = vec![(ps.ion.to_f64(), true)];
    pts.extend(grid.points().into_iter().map(|p| (p, false)));
    Ok(pts
        .par_iter()
        .map(|&(p, is_ion)| {
            let x = Vec3::from_f64(p);
            let (d, f) = min_distance(x, ps.triangles.iter().copied());
            FieldSample {
                point: p,
                field: field_of_density(&op.kernels, &sigma, x).to_f64(),
                near_surface: d < ps.patch_size(f) * T::lit(0.1),
                is_ion,
            }
        })
        .collect())
}

pub fn write_field_samples_csv<W: Write>(samples: &[FieldSample], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "x_m,y_m,z_m,Ex_V_per_m,Ey_V_per_m,Ez_V_per_m,near_surface,is_ion")?;
    for s in samples {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            s.point[0], s.point[1], s.point[2], s.field[0], s.field[1], s.field[2], s.near_surface as u8, s.is_ion as u8
        )?;
    }
    Ok(())
}

/// Patch mesh with per-face Γ_{i,k}/max Γ.
pub fn write_heatmap<T: Real, W: Write>(patches: &PatchSet<T>, report: &HeatingReport, k: usize, w: &mut W) -> std::io::Result<()> {
    let max = report.records.iter().map(|r| r.gamma[k]).fold(0.0, f64::max);
    let scalars: Vec<f64> = report
        .records
        .iter()
        .map(|r| if max > 0.0 { r.gamma[k] / max } else { 0.0 })
        .collect();
    write_trapmesh(w, &patch_mesh(patches), &patches.electrodes, Some(&scalars))
}

pub fn write_cumulative_csv<W: Write>(report: &HeatingReport, k: usize, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "distance_m,gamma_cumulative_fraction")?;
    for (d, f) in report.cumulative_by_distance(k) {
        writeln!(w, "{d:e},{f:e}")?;
    }
    Ok(())
}

pub fn write_axial_profile_csv<W: Write>(p: &AxialProfile, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "z_offset_m,gamma_per_m,smoothed")?;
    for i in 0..p.offsets.len() {
        writeln!(w, "{:e},{:e},{:e}", p.offsets[i], p.gamma_per_m[i], p.smoothed[i])?;
    }
    Ok(())
}

pub fn write_records_csv<W: Write>(report: &HeatingReport, w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "patch,electrode,area_m2,distance_m,axial_m,gamma_0,gamma_1,gamma_2,coupling_0,coupling_1,coupling_2"
    )?;
    for r in &report.records {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.patch,
            report.electrodes[r.electrode],
            r.area,
            r.distance_to_ion,
            r.axial,
            r.gamma[0],
            r.gamma[1],
            r.gamma[2],
            r.coupling[0],
            r.coupling[1],
            r.coupling[2]
        )?;
    }
    Ok(())
}
