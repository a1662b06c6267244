use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::geometry::{build_skeleton, SkeletonParams};
use crate::pipeline::{run_pipeline, PipelineConfig};

/// Which feature sits on the ion's axial position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToothPhase {
    /// Even tooth count: a gap at z = 0.
    GapCentered,
    /// Odd tooth count: a tooth at z = 0, gaps at ±(w + g)/2.
    ToothCentered,
}

impl ToothPhase {
    fn tooth_centered(self) -> bool {
        self == ToothPhase::ToothCentered
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSweep {
    /// Tooth widths, m.
    pub widths: Vec<f64>,
    pub phases: Vec<ToothPhase>,
    /// Golden-section steps around the best grid point (0 disables).
    #[serde(default = "default_refine")]
    pub refine_iterations: usize,
}

fn default_refine() -> usize {
    6
}

impl Default for GapSweep {
    fn default() -> Self {
        Self {
            widths: [150.0, 170.0, 190.0, 200.0, 211.0, 220.0, 230.0, 250.0].iter().map(|w| w / 1e6).collect(),
            phases: vec![ToothPhase::GapCentered, ToothPhase::ToothCentered],
            refine_iterations: default_refine(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub tooth_width: f64,
    pub phase: ToothPhase,
    pub teeth_count: usize,
    /// Axial-mode Γ, quanta/s.
    pub objective: f64,
    /// Γ of all three modes, ascending frequency.
    pub totals: [f64; 3],
    pub radial_total: f64,
    pub surface_area: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub baseline: SweepPoint,
    pub points: Vec<SweepPoint>,
    pub best: SweepPoint,
    pub best_params: SkeletonParams,
    /// (baseline − best)/baseline of the axial Γ.
    pub improvement: f64,
    /// Same for the summed radial Γ at the optimum.
    pub radial_change: f64,
}

fn params_for(base: &SkeletonParams, width: f64, phase: ToothPhase) -> SkeletonParams {
    let mut p = SkeletonParams {
        tooth_width: width,
        ..base.clone()
    };
    p.teeth_count = p.count_for_extent(phase.tooth_centered()).max(2 * p.endcap_teeth + 1);
    p
}

fn evaluate(p: &SkeletonParams, phase: ToothPhase, cfg: &PipelineConfig, refined: bool) -> Result<SweepPoint> {
    let tag = format!("tooth_width {:.2} um, {:?}", p.tooth_width * 1e6, phase);
    let geom = build_skeleton::<f64>(p).map_err(|e| e.tagged(tag.clone()))?;
    let r = run_pipeline(&geom, cfg).map_err(|e| e.tagged(tag))?;
    let ax = r.report.modes.mode_along([0.0, 0.0, 1.0]);
    let totals = r.report.totals;
    Ok(SweepPoint {
        tooth_width: p.tooth_width,
        phase,
        teeth_count: p.teeth_count,
        objective: totals[ax],
        totals,
        radial_total: totals.iter().sum::<f64>() - totals[ax],
        surface_area: geom.surface_area(),
        refined,
    })
}

/// Strictly better, or equal within rounding and narrower.
fn better(a: &SweepPoint, b: &SweepPoint) -> bool {
    let tie = (a.objective - b.objective).abs() <= 1e-12 * a.objective.abs().max(b.objective.abs());
    if tie {
        a.tooth_width < b.tooth_width
    } else {
        a.objective < b.objective
    }
}

/// Sweeps tooth width and gap phase with the gap width held at `base.tooth_gap`,
/// minimising the axial-mode Γ. The baseline itself is always a candidate.
pub fn optimize_gaps(base: &SkeletonParams, sweep: &GapSweep, cfg: &PipelineConfig) -> Result<OptimizationResult> {
    if sweep.widths.is_empty() || sweep.phases.is_empty() {
        return Err(TrapError::Config("gap sweep needs at least one width and one phase".into()));
    }
    let base_phase = if base.teeth_count % 2 == 1 { ToothPhase::ToothCentered } else { ToothPhase::GapCentered };
    let baseline = evaluate(base, base_phase, cfg, false)?;

    let mut grid: Vec<(f64, ToothPhase)> = Vec::new();
    for &ph in &sweep.phases {
        let mut ws = sweep.widths.clone();
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ws.dedup();
        grid.extend(ws.into_iter().map(|w| (w, ph)));
    }
    let mut points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&(w, ph)| evaluate(&params_for(base, w, ph), ph, cfg, false))
        .collect::<Result<_>>()?;

    let mut best_idx = 0;
    for i in 1..points.len() {
        if better(&points[i], &points[best_idx]) {
            best_idx = i;
        }
    }
    let grid_best = points[best_idx].clone();

    // Golden-section search between the neighbours of the best grid width.
    if sweep.refine_iterations > 0 {
        let ph = grid_best.phase;
        let ws: Vec<f64> = points.iter().filter(|p| p.phase == ph).map(|p| p.tooth_width).collect();
        let j = ws.iter().position(|&w| w == grid_best.tooth_width).unwrap();
        if ws.len() >= 2 {
            let (mut a, mut b) = (ws[j.saturating_sub(1)], ws[(j + 1).min(ws.len() - 1)]);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = evaluate(&params_for(base, x1, ph), ph, cfg, true)?;
            let mut f2 = evaluate(&params_for(base, x2, ph), ph, cfg, true)?;
            for _ in 0..sweep.refine_iterations {
                if f1.objective <= f2.objective {
                    b = x2;
                    x2 = x1;
                    points.push(std::mem::replace(&mut f2, f1.clone()));
                    x1 = b - g * (b - a);
                    f1 = evaluate(&params_for(base, x1, ph), ph, cfg, true)?;
                } else {
                    a = x1;
                    x1 = x2;
                    points.push(std::mem::replace(&mut f1, f2.clone()));
                    x2 = a + g * (b - a);
                    f2 = evaluate(&params_for(base, x2, ph), ph, cfg, true)?;
                }
            }
            points.push(f1);
            points.push(f2);
        }
    }

    let mut best = baseline.clone();
    for p in &points {
        if better(p, &best) {
            best = p.clone();
        }
    }
    let best_params = if best.tooth_width == baseline.tooth_width && best.phase == baseline.phase {
        base.clone()
    } else {
        params_for(base, best.tooth_width, best.phase)
    };
    Ok(OptimizationResult {
        improvement: (baseline.objective - best.objective) / baseline.objective,
        radial_change: (baseline.radial_total - best.radial_total) / baseline.radial_total,
        baseline,
        points,
        best,
        best_params,
    })
}
