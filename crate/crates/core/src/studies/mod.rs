//! Geometry comparison, gap realignment and distance scaling.

mod fit;
mod optimize;
mod scaling;

pub use fit::{fit_line, fit_power_law, FitResult, PowerLawFit};
pub use optimize::{optimize_gaps, GapSweep, OptimizationResult, SweepPoint, ToothPhase};
pub use scaling::{disc_power_law, distance_scaling, DiscScaling, DrivePolicy, ScalingPoint, ScalingResult, ScalingSpec};

use serde::Serialize;

use crate::error::Result;
use crate::geometry::TrapGeometry;
use crate::heating::HeatingReport;
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::scalar::Real;

/// Candidate/baseline heating ratios from matched pipelines.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub candidate: String,
    pub baseline: String,
    /// Γ ratio per candidate mode (ascending frequency).
    pub mode_ratios: [f64; 3],
    /// S_E ratio per candidate mode.
    pub spectral_ratios: [f64; 3],
    /// Σ_k Γ_k ratio.
    pub summed_ratio: f64,
    pub summed_spectral_ratio: f64,
    /// Baseline mode matched to each candidate mode by axis alignment.
    pub mode_map: [usize; 3],
    pub target_edge: f64,
    pub patches: [usize; 2],
    pub candidate_report: HeatingReport,
    pub baseline_report: HeatingReport,
}

/// Runs the full pipeline on both geometries with one configuration.
pub fn compare<T: Real>(
    candidate: (&str, &TrapGeometry<T>),
    baseline: (&str, &TrapGeometry<T>),
    cfg: &PipelineConfig,
) -> Result<ComparisonReport> {
    let (da, db) = (candidate.1.nominal_distance.as_f64(), baseline.1.nominal_distance.as_f64());
    if (da - db).abs() > 0.01 * db {
        log::warn!("comparing geometries at different ion-electrode distances ({da:e} m vs {db:e} m)");
    }
    let a = run_pipeline(candidate.1, cfg).map_err(|e| e.tagged(candidate.0))?;
    let b = run_pipeline(baseline.1, cfg).map_err(|e| e.tagged(baseline.0))?;
    Ok(compare_reports(
        (candidate.0, &a.report, a.patches.len()),
        (baseline.0, &b.report, b.patches.len()),
        cfg.discretize.target_edge,
    ))
}

/// Ratios between two existing reports.
pub fn compare_reports(
    candidate: (&str, &HeatingReport, usize),
    baseline: (&str, &HeatingReport, usize),
    target_edge: f64,
) -> ComparisonReport {
    let (ra, rb) = (candidate.1, baseline.1);
    let mode_map = [0, 1, 2].map(|k| rb.modes.mode_along(ra.modes.axes[k]));
    let se_a: f64 = ra.spectral_density.iter().sum();
    let se_b: f64 = rb.spectral_density.iter().sum();
    ComparisonReport {
        candidate: candidate.0.to_string(),
        baseline: baseline.0.to_string(),
        mode_ratios: [0, 1, 2].map(|k| ra.totals[k] / rb.totals[mode_map[k]]),
        spectral_ratios: [0, 1, 2].map(|k| ra.spectral_density[k] / rb.spectral_density[mode_map[k]]),
        summed_ratio: ra.total() / rb.total(),
        summed_spectral_ratio: se_a / se_b,
        mode_map,
        target_edge,
        patches: [candidate.2, baseline.2],
        candidate_report: ra.clone(),
        baseline_report: rb.clone(),
    }
}
