//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to
//! stderr, bypassing output capture, and then asserts.

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use trapheat::electrostatics::{
    assemble, patch_couplings_adjoint, patch_couplings_direct_along, solve_dirichlet, SolverConfig,
};
use trapheat::geometry::shapes::{parallel_plates, sphere};
use trapheat::geometry::{build_blade, build_skeleton, discretize, BladeParams, DiscretizeOptions, SkeletonParams};
use trapheat::heating::{axial_profile, distance_profile, fraction_within, NoiseModel, PROFILE_BIN};
use trapheat::pipeline::{run_pipeline, PipelineConfig, PipelineResult};
use trapheat::studies::{compare_reports, disc_power_law, distance_scaling, optimize_gaps, GapSweep, ScalingSpec, ToothPhase};
use trapheat::trapdynamics::{secular_modes, BasisField, DriveConfig, IonSpecies, QuadrupoleField, TrapPotential};
use trapheat::vec3::mat3_mul_vec;
use trapheat::Vec3;

const EPS0: f64 = 8.8541878128e-12;
const E_CHARGE: f64 = 1.602176634e-19;
const AMU: f64 = 1.66053906660e-27;
const TAU: f64 = std::f64::consts::TAU;

static SERIAL: Mutex<()> = Mutex::new(());

/// Tests share one CPU; running them one at a time keeps the timings honest.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "{tag} {name}: {detail}");
}

fn skeleton_run() -> &'static PipelineResult<f64> {
    static R: OnceLock<PipelineResult<f64>> = OnceLock::new();
    R.get_or_init(|| {
        let g = build_skeleton::<f64>(&SkeletonParams::default()).unwrap();
        run_pipeline(&g, &PipelineConfig::default()).unwrap()
    })
}

fn blade_run() -> &'static PipelineResult<f64> {
    static R: OnceLock<PipelineResult<f64>> = OnceLock::new();
    R.get_or_init(|| {
        let g = build_blade::<f64>(&BladeParams::default()).unwrap();
        run_pipeline(&g, &PipelineConfig::default()).unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn electrostatics_oracles() {
    let _g = serial();
    let t = Instant::now();
    let r = 1e-3;
    let g = sphere::<f64>(Vec3::zero(), r, 16, Vec3::zero()).unwrap();
    let patches = discretize(&g, &DiscretizeOptions::uniform(10.0 * r)).unwrap();
    let faces = patches.len();
    let op = assemble(Arc::new(patches), SolverConfig::default()).unwrap();
    let sol = solve_dirichlet(&op, &[1.0]).unwrap();
    let cap_err = rel(sol.total_charge(), 4.0 * std::f64::consts::PI * EPS0 * r);
    let sphere_s = t.elapsed().as_secs_f64();
    let pot_err = [1.5, 2.0, 4.0]
        .iter()
        .map(|&k| {
            let x = Vec3::new(0.3, -0.5, 0.8).normalized() * (k * r);
            rel(sol.potential_at(x), 1.0 / k)
        })
        .fold(0.0, f64::max);

    let gap = 1e-3;
    let plates = parallel_plates::<f64>(10.0 * gap, gap).unwrap();
    let pp = discretize(&plates, &DiscretizeOptions::uniform(0.25e-3)).unwrap();
    let op = assemble(Arc::new(pp), SolverConfig::default()).unwrap();
    let e = solve_dirichlet(&op, &[0.5, -0.5]).unwrap().field_at(Vec3::zero());
    let field_err = rel(e.norm(), 1.0 / gap);

    let passed = faces >= 5000 && sphere_s < 60.0 && cap_err <= 0.02 && pot_err <= 0.01 && field_err <= 0.02;
    report(
        "electrostatics oracles",
        passed,
        &format!(
            "capacitance error {cap_err:.2e} ({faces} faces, {sphere_s:.1} s), worst R/r error {pot_err:.2e}, plate field error {field_err:.2e}"
        ),
    );
    assert!(passed);
}

#[test]
fn reciprocity() {
    let _g = serial();
    let t = Instant::now();
    let g = sphere::<f64>(Vec3::zero(), 1e-3, 5, Vec3::new(0.3e-3, 0.1e-3, -0.2e-3)).unwrap();
    let patches = discretize(&g, &DiscretizeOptions::uniform(1.0)).unwrap();
    let (ion, n) = (patches.ion, patches.len());
    let op = assemble(Arc::new(patches), SolverConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for k in [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z(), Vec3::new(0.3, -0.5, 0.8).normalized()] {
        let a = patch_couplings_adjoint(&op, ion, k).unwrap();
        let d = patch_couplings_direct_along(&op, ion, k).unwrap();
        let num: f64 = a.values.iter().zip(&d.values).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = d.values.iter().map(|y| y * y).sum();
        worst = worst.max((num / den).sqrt());
    }
    let s = t.elapsed().as_secs_f64();
    let passed = n == 500 && worst < 0.01 && s < 120.0;
    report("reciprocity", passed, &format!("RMS relative gap {:.3}% over {n} patches, {s:.1} s", worst * 100.0));
    assert!(passed);
}

#[test]
fn distance_power_law() {
    let _g = serial();
    let t = Instant::now();
    let ds: Vec<f64> = [100.0, 150.0, 200.0, 250.0, 300.0, 400.0].iter().map(|d| d / 1e6).collect();
    let r = disc_power_law(&ds, 4e-3, 48, SolverConfig::default()).unwrap();
    let s = t.elapsed().as_secs_f64();
    let a = r.law.alpha;
    let passed = (a - 4.0).abs() <= 0.3 && s < 300.0;
    report(
        "distance power law",
        passed,
        &format!("alpha {a:.3} (R² {:.5}, {} disc patches, {s:.1} s)", r.law.r_squared, r.patches),
    );
    assert!(passed);
}

#[test]
fn geometry_comparison() {
    let _g = serial();
    let (a, b) = (skeleton_run(), blade_run());
    let c = compare_reports(("skeleton", &a.report, a.patches.len()), ("blade", &b.report, b.patches.len()), PipelineConfig::default().discretize.target_edge);
    let secs = |r: &PipelineResult<f64>| r.timings.discretize_s + r.timings.solve_s + r.timings.modes_s + r.timings.heating_s;
    let s = secs(a) + secs(b);
    let passed = c.summed_ratio <= 0.65 && s < 600.0;
    report(
        "geometry comparison",
        passed,
        &format!(
            "skeleton/blade summed ratio {:.3} (modes {:.3} {:.3} {:.3}), {} / {} patches, {s:.0} s",
            c.summed_ratio, c.mode_ratios[0], c.mode_ratios[1], c.mode_ratios[2], c.patches[0], c.patches[1]
        ),
    );
    assert!(passed, "summed ratio {}", c.summed_ratio);
}

#[test]
fn spatial_concentration() {
    let _g = serial();
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for (name, r) in [("skeleton", skeleton_run()), ("blade", blade_run())] {
        let f: Vec<f64> = (0..3).map(|k| fraction_within(&r.report, k, 500e-6)).collect();
        worst = f.iter().cloned().fold(worst, f64::min);
        parts.push(format!("{name} {:.4} {:.4} {:.4}", f[0], f[1], f[2]));
    }
    let passed = worst >= 0.97;
    report("spatial concentration", passed, &format!("fraction within 500 um: {}", parts.join(", ")));
    assert!(passed);
}

#[test]
fn axial_hotspot() {
    let _g = serial();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, r) in [("skeleton", skeleton_run()), ("blade", blade_run())] {
        let rep = &r.report;
        let ax = rep.modes.mode_along([0.0, 0.0, 1.0]);
        let peak = axial_profile(rep, ax, None).unwrap().peak.abs() * 1e6;
        passed &= (peak - 110.0).abs() <= 20.0;
        let bins: Vec<usize> = (0..3).filter(|&k| k != ax).map(|k| distance_profile(rep, k, PROFILE_BIN).unwrap().peak_bin).collect();
        passed &= bins.iter().all(|&b| b == 0);
        parts.push(format!("{name} axial peak {peak:.1} um, radial nearest-distance peak bins {bins:?}"));
    }
    report("axial hotspot", passed, &parts.join("; "));
    assert!(passed);
}

#[test]
fn hotspot_scaling_fit() {
    let _g = serial();
    let r = distance_scaling(&ScalingSpec::default(), &PipelineConfig::default()).unwrap();
    let f = &r.fit;
    let passed = f.samples.len() == 5 && f.r_squared >= 0.99 && (f.slope - 0.6).abs() <= 0.1 && (f.intercept + 10.0).abs() <= 10.0;
    let peaks: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("{:.0}->{}", p.distance * 1e6, p.peak.map_or("none".into(), |z| format!("{:.1}", z.abs() * 1e6))))
        .collect();
    report(
        "hotspot scaling fit",
        passed,
        &format!(
            "peak = {:.3} d {:+.2} um, R² {:.4} [{}]",
            f.slope,
            f.intercept,
            f.r_squared,
            peaks.join(", ")
        ),
    );
    assert!(passed);
}

/// Confines z without touching the radial curvature.
struct AxialSpring(f64);

impl BasisField<f64> for AxialSpring {
    fn field(&self, x: Vec3<f64>) -> Vec3<f64> {
        Vec3::new(0.0, 0.0, -self.0 * x.z)
    }
    fn potential(&self, x: Vec3<f64>) -> f64 {
        0.5 * self.0 * x.z * x.z
    }
}

/// Floquet exponent β of the a = 0 Mathieu equation from its continued fraction.
fn mathieu_beta(q: f64) -> f64 {
    let cf = |b: f64, s: f64| (1..=40).rev().fold(0.0, |v, n| q * q / ((b + s * 2.0 * n as f64).powi(2) - v));
    let mut b = q / 2f64.sqrt();
    for _ in 0..200 {
        b = (cf(b, 1.0) + cf(b, -1.0)).sqrt();
    }
    b
}

fn quadrupole_radial(v: f64, f: f64, r0: f64) -> (f64, f64) {
    let rf = QuadrupoleField { r0, gain: 1.0, center: Vec3::zero() };
    let pot = TrapPotential::new(Arc::new(rf), Some(Arc::new(AxialSpring(1e5))), DriveConfig::new(v, f), IonSpecies::yb171(), r0).unwrap();
    let m = secular_modes(&pot, Vec3::zero()).unwrap();
    let q = 2.0 * E_CHARGE * v / (171.0 * AMU * r0 * r0 * (TAU * f).powi(2));
    (m.frequencies[m.mode_along(Vec3::unit_x())], q)
}

#[test]
fn secular_modes_and_stability() {
    let _g = serial();
    let f_rf = 11e6;
    // Operating-point q: against the pseudopotential closed form qΩ/(2√2).
    let (f150, q150) = quadrupole_radial(50.0, f_rf, 200e-6);
    let closed = q150 * f_rf / (2.0 * 2f64.sqrt());
    let closed_err = rel(f150, closed);
    // Small q: against the exact Floquet exponent.
    let (f_small, q_small) = quadrupole_radial(17.0, f_rf, 200e-6);
    let exact_err = rel(f_small, mathieu_beta(q_small) * f_rf / 2.0);

    let r = skeleton_run();
    let radial: Vec<usize> = (0..3).filter(|&k| k != r.modes.mode_along(Vec3::new(0.0, 0.0, 1.0))).collect();
    let f_rad = radial.iter().map(|&k| r.modes.frequencies[k]).fold(0.0, f64::max);
    let rad_err = rel(f_rad, 2.24e6);

    let rf_only = r.potential.with_dc(None).unwrap();
    let (h, _) = rf_only.hessian(r.modes.center, 2e-6);
    let m = r.potential.species.mass;
    let ratio = radial
        .iter()
        .map(|&k| {
            let a = r.modes.axes[k];
            let kappa = mat3_mul_vec(&h, a).dot(a);
            (kappa * E_CHARGE / m).sqrt() / TAU / f_rf
        })
        .fold(0.0, f64::max);

    let passed = closed_err <= 5e-3 && exact_err <= 5e-3 && rad_err <= 0.25 && (0.18..=0.22).contains(&ratio);
    report(
        "secular modes and stability",
        passed,
        &format!(
            "quadrupole vs closed form {closed_err:.1e} (q {q150:.3}), vs Mathieu exponent {exact_err:.1e} (q {q_small:.3}); skeleton radial {:.3} MHz ({:+.1}% from 2.24); RF-only omega/Omega {ratio:.4}, with endcaps {:.4}",
            f_rad / 1e6,
            (f_rad / 2.24e6 - 1.0) * 100.0,
            r.modes.max_stability_ratio()
        ),
    );
    assert!(passed);
}

#[test]
fn gap_optimisation() {
    let _g = serial();
    let cfg = PipelineConfig {
        discretize: DiscretizeOptions::uniform(8.9 / 1e6),
        ..PipelineConfig::default()
    };
    let sweep = GapSweep {
        widths: [150.0, 170.0, 190.0, 211.0, 230.0, 250.0].iter().map(|w| w / 1e6).collect(),
        phases: vec![ToothPhase::GapCentered, ToothPhase::ToothCentered],
        refine_iterations: 4,
    };
    let r = optimize_gaps(&SkeletonParams::default(), &sweep, &cfg).unwrap();
    let w = r.best.tooth_width * 1e6;
    let passed = (w - 211.0).abs() <= 15.0 && r.improvement >= 5e-3 && r.best.surface_area > r.baseline.surface_area;
    report(
        "gap optimisation",
        passed,
        &format!(
            "best tooth width {w:.1} um ({:?}, {} teeth), axial improvement {:.2}%, area {:.4e} vs baseline {:.4e} m²",
            r.best.phase,
            r.best.teeth_count,
            r.improvement * 100.0,
            r.best.surface_area,
            r.baseline.surface_area
        ),
    );
    assert!(passed);
}

fn small_skeleton() -> trapheat::TrapGeometry {
    let p = SkeletonParams {
        teeth_count: 3,
        axial_extent: 530e-6,
        ..SkeletonParams::default()
    };
    build_skeleton::<f64>(&p).unwrap()
}

#[test]
fn property_suite() {
    let _g = serial();
    let g = small_skeleton();
    let cfg = PipelineConfig::default();
    let base = run_pipeline(&g, &cfg).unwrap();

    let mut scaled = cfg.clone();
    scaled.noise = NoiseModel { s0: cfg.noise.s0 * 3.0, ..cfg.noise };
    let r3 = run_pipeline(&g, &scaled).unwrap();
    let linear = (0..3).map(|k| rel(r3.report.totals[k], 3.0 * base.report.totals[k])).fold(0.0, f64::max);

    let mut quiet = cfg.clone();
    quiet.noise.s0 = 0.0;
    let r0 = run_pipeline(&g, &quiet).unwrap();
    let zero = r0.report.totals.iter().all(|&v| v == 0.0) && r0.report.records.iter().all(|p| p.gamma.iter().all(|&v| v == 0.0));

    let text = serde_json::to_string(&cfg).unwrap();
    let reread: PipelineConfig = serde_json::from_str(&text).unwrap();
    let again = run_pipeline(&g, &reread).unwrap();
    let identical = reread == cfg
        && serde_json::to_string(&again.report).unwrap() == serde_json::to_string(&base.report).unwrap()
        && again.report.totals.iter().zip(&base.report.totals).all(|(a, b)| a.to_bits() == b.to_bits());

    let coarse = skeleton_run();
    let mut fine_cfg = cfg.clone();
    fine_cfg.discretize.target_edge = cfg.discretize.target_edge / 2.0;
    let fine = run_pipeline(&build_skeleton::<f64>(&SkeletonParams::default()).unwrap(), &fine_cfg).unwrap();
    let sum = |r: &PipelineResult<f64>| r.report.totals.iter().sum::<f64>();
    let refine = rel(sum(coarse), sum(&fine));

    let passed = linear <= 1e-12 && zero && identical && refine < 0.05;
    report(
        "property suite",
        passed,
        &format!(
            "s0 linearity {linear:.1e}, zero noise {zero}, bit-identical rerun {identical}, refinement change {:.2}% ({} -> {} patches)",
            refine * 100.0,
            coarse.patches.len(),
            fine.patches.len()
        ),
    );
    assert!(passed);
}
