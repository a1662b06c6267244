//! Analytic electrostatics checks run by the `validate` command.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::constants::EPSILON_0;
use crate::electrostatics::{assemble, patch_couplings_adjoint, patch_couplings_direct_along, solve_dirichlet, SolverConfig};
use crate::error::Result;
use crate::geometry::shapes::{parallel_plates, sphere};
use crate::geometry::{discretize, DiscretizeOptions};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Relative error, or the statistic itself when `expected` is zero.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

impl Check {
    fn relative(name: &str, measured: f64, expected: f64, tolerance: f64, t: Instant) -> Self {
        let error = ((measured - expected) / expected).abs();
        Self {
            name: name.to_string(),
            measured,
            expected,
            error,
            tolerance,
            passed: error <= tolerance,
            seconds: t.elapsed().as_secs_f64(),
        }
    }
}

/// Unit-potential sphere: capacitance 4πε₀R and exterior potential R/r.
pub fn sphere_checks(subdivisions: usize, solver: SolverConfig) -> Result<Vec<Check>> {
    let t = Instant::now();
    let r = 1e-3;
    let g = sphere::<f64>(Vec3::zero(), r, subdivisions, Vec3::zero())?;
    let patches = discretize(&g, &DiscretizeOptions::uniform(10.0 * r))?;
    let faces = patches.len();
    let op = assemble(Arc::new(patches), solver)?;
    let sol = solve_dirichlet(&op, &[1.0])?;
    let c = sol.total_charge();
    let mut out = vec![Check::relative(
        &format!("sphere capacitance ({faces} faces)"),
        c,
        4.0 * std::f64::consts::PI * EPSILON_0 * r,
        0.02,
        t,
    )];
    for k in [1.5, 2.0, 4.0] {
        let t = Instant::now();
        let x = Vec3::new(0.3, -0.5, 0.8).normalized() * (k * r);
        out.push(Check::relative(&format!("sphere potential at r = {k}R"), sol.potential_at(x), 1.0 / k, 0.01, t));
    }
    Ok(out)
}

/// Square plates 10:1 side to gap at ±0.5 V; field at the midpoint.
pub fn plates_check(target_edge: f64, solver: SolverConfig) -> Result<Check> {
    let t = Instant::now();
    let gap = 1e-3;
    let g = parallel_plates::<f64>(10.0 * gap, gap)?;
    let patches = discretize(&g, &DiscretizeOptions::uniform(target_edge))?;
    let op = assemble(Arc::new(patches), solver)?;
    let sol = solve_dirichlet(&op, &[0.5, -0.5])?;
    let e = sol.field_at(Vec3::zero());
    Ok(Check::relative("parallel-plate midpoint field", e.norm(), 1.0 / gap, 0.02, t))
}

/// Adjoint against direct couplings on a 500-patch sphere enclosing the ion.
pub fn reciprocity_check(solver: SolverConfig) -> Result<Check> {
    let t = Instant::now();
    let g = sphere::<f64>(Vec3::zero(), 1e-3, 5, Vec3::new(0.3e-3, 0.1e-3, -0.2e-3))?;
    let patches = discretize(&g, &DiscretizeOptions::uniform(1.0))?;
    let ion = patches.ion;
    let n = patches.len();
    let op = assemble(Arc::new(patches), solver)?;
    let mut worst = 0.0f64;
    for k in [Vec3::unit_x(), Vec3::new(0.3, -0.5, 0.8).normalized()] {
        let a = patch_couplings_adjoint(&op, ion, k)?;
        let d = patch_couplings_direct_along(&op, ion, k)?;
        let num: f64 = a.values.iter().zip(&d.values).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = d.values.iter().map(|y| y * y).sum();
        worst = worst.max((num / den).sqrt());
    }
    Ok(Check {
        name: format!("adjoint vs direct couplings ({n} patches), RMS"),
        measured: worst,
        expected: 0.0,
        error: worst,
        tolerance: 0.01,
        passed: worst < 0.01,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// All electrostatics checks at their default sizes.
pub fn run_all(solver: SolverConfig) -> Result<Vec<Check>> {
    let mut out = sphere_checks(16, solver)?;
    out.push(plates_check(0.25e-3, solver)?);
    out.push(reciprocity_check(solver)?);
    Ok(out)
}
