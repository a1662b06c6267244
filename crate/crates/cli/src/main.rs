mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use trapheat::constants::MICRON;
use trapheat::geometry::io::{patch_mesh, write_binary_stl, write_trapmesh};
use trapheat::geometry::{discretize, TrapGeometry};
use trapheat::heating::{
    axial_profile, distance_profile, export_field_vectors, fraction_within, write_axial_profile_csv, write_cumulative_csv,
    write_field_samples_csv, write_heatmap, write_records_csv, HeatingReport, PROFILE_BIN,
};
use trapheat::pipeline::{run_pipeline, PipelineConfig, PipelineResult};
use trapheat::studies::{compare_reports, disc_power_law, distance_scaling, optimize_gaps};
use trapheat::trapdynamics::{stability_sweep, write_sweep_csv};
use trapheat::{validation, TrapError};

use config::{build_geometry, ConfigError, GeometrySection, RunConfig};
use output::Artifacts;

#[derive(Parser)]
#[command(name = "trapheat", version, about = "Patch-potential heating of trapped ions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Target patch edge in µm (overrides the config).
    #[arg(long = "resolution-um", global = true)]
    resolution_um: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the patch mesh of the configured geometry.
    Generate,
    /// Secular modes at the operating point and a drive-frequency sweep.
    Modes,
    /// Per-patch heating report, heatmaps and profiles.
    Heat,
    /// Heating ratio of the geometry against `study.baseline`.
    Compare,
    /// Tooth width and gap phase sweep of a skeleton trap.
    Optimize,
    /// Hotspot position and heating against ion-electrode distance.
    Scaling,
    /// Analytic electrostatics checks.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Modes => "modes",
            Command::Heat => "heat",
            Command::Compare => "compare",
            Command::Optimize => "optimize",
            Command::Scaling => "scaling",
            Command::Validate => "validate",
        }
    }
}

enum Failure {
    Config(ConfigError),
    Numerical { module: &'static str, error: TrapError },
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn numerical(module: &'static str) -> impl Fn(TrapError) -> Failure {
    move |error| Failure::Numerical { module, error }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error at {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { module, error }) => {
            eprintln!("{module}: {error}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Io(std::io::Error::other(e)))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| ConfigError {
        path: "--config".into(),
        message: "a config file is required".into(),
    })?;
    let mut cfg = config::load(path)?;
    if let Some(h) = cli.resolution_um {
        cfg.resolution.target_edge_um = h;
    }
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.output = None;
    let pipeline = cfg.pipeline()?;
    let mut art = Artifacts::default();
    let passed = match cli.command {
        Command::Generate => generate(&cfg, &pipeline, &mut art)?,
        Command::Modes => modes(&cfg, &pipeline, &mut art)?,
        Command::Heat => heat(&cfg, &pipeline, &mut art)?,
        Command::Compare => compare(&cfg, &pipeline, &mut art)?,
        Command::Optimize => optimize(&cfg, &pipeline, &mut art)?,
        Command::Scaling => scaling(&cfg, &pipeline, &mut art)?,
        Command::Validate => validate(&cfg, &pipeline, &mut art)?,
    };
    let written = art.commit(&out, cli.command.name(), &cfg).map_err(Failure::Io)?;
    for p in &written {
        println!("{}", p.display());
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Numerical {
            module: "validation",
            error: TrapError::Domain("one or more checks failed".into()),
        })
    }
}

fn geometry(cfg: &RunConfig) -> Result<TrapGeometry<f64>, Failure> {
    Ok(build_geometry(&cfg.geometry, "geometry")?)
}

fn pipeline_on(geom: &TrapGeometry<f64>, p: &PipelineConfig) -> Result<PipelineResult<f64>, Failure> {
    run_pipeline(geom, p).map_err(numerical("pipeline"))
}

fn generate(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let geom = geometry(cfg)?;
    let patches = discretize(&geom, &p.discretize).map_err(numerical("geometry"))?;
    let mesh = patch_mesh(&patches);
    art.with("geometry.trapmesh", |w| write_trapmesh(w, &mesh, &patches.electrodes, None));
    art.with("geometry.stl", |w| write_binary_stl(w, &mesh));
    art.json(
        "geometry.json",
        &json!({
            "params": geom.params,
            "panels": geom.panels.len(),
            "patches": patches.len(),
            "surface_area_m2": geom.surface_area(),
            "nominal_distance_m": geom.nominal_distance,
            "symmetry_order": patches.symmetry.as_ref().map(|s| s.order()),
            "electrodes": patches.electrodes,
        }),
    );
    Ok(true)
}

fn modes(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let geom = geometry(cfg)?;
    let r = pipeline_on(&geom, p)?;
    let s = &cfg.study;
    let n = s.sweep_points.max(2);
    let freqs: Vec<f64> = (0..n)
        .map(|i| (s.sweep_start_mhz + (s.sweep_stop_mhz - s.sweep_start_mhz) * i as f64 / (n - 1) as f64) * 1e6)
        .collect();
    let sweep = stability_sweep(&r.potential, r.modes.center, &freqs).map_err(numerical("trapdynamics"))?;
    art.json(
        "modes.json",
        &json!({
            "modes": r.modes,
            "endcap_voltage_v": r.endcap_voltage,
            "patches": r.patches.len(),
            "stability_boundary_hz": sweep.boundary,
        }),
    );
    art.with("sweep.csv", |w| write_sweep_csv(&sweep, w));
    Ok(true)
}

#[derive(Serialize)]
struct HeatSummary<'a> {
    patches: usize,
    endcap_voltage_v: Option<f64>,
    frequencies_hz: [f64; 3],
    axes: [[f64; 3]; 3],
    center_m: [f64; 3],
    totals: [f64; 3],
    total: f64,
    spectral_density: [f64; 3],
    fraction_within_500um: [f64; 3],
    axial_mode: usize,
    axial_profile_peak_m: [Option<f64>; 3],
    nearest_distance_bin_peak: [Option<usize>; 3],
    electrodes: &'a [String],
}

fn heat_summary<'a>(r: &PipelineResult<f64>, rep: &'a HeatingReport) -> HeatSummary<'a> {
    HeatSummary {
        patches: r.patches.len(),
        endcap_voltage_v: r.endcap_voltage,
        frequencies_hz: rep.modes.frequencies,
        axes: rep.modes.axes,
        center_m: r.modes.center.to_f64(),
        totals: rep.totals,
        total: rep.total(),
        spectral_density: rep.spectral_density,
        fraction_within_500um: [0, 1, 2].map(|k| fraction_within(rep, k, 500.0 * MICRON)),
        axial_mode: rep.modes.mode_along([0.0, 0.0, 1.0]),
        axial_profile_peak_m: [0, 1, 2].map(|k| axial_profile(rep, k, None).ok().map(|p| p.peak)),
        nearest_distance_bin_peak: [0, 1, 2].map(|k| distance_profile(rep, k, PROFILE_BIN).ok().map(|p| p.peak_bin)),
        electrodes: &rep.electrodes,
    }
}

fn heat_artifacts(prefix: &str, r: &PipelineResult<f64>, art: &mut Artifacts) {
    let rep = &r.report;
    art.json(&format!("{prefix}heating.json"), &heat_summary(r, rep));
    art.with(format!("{prefix}patches.csv"), |w| write_records_csv(rep, w));
    for k in 0..3 {
        art.with(format!("{prefix}heatmap_mode{k}.trapmesh"), |w| write_heatmap(&r.patches, rep, k, w));
        art.with(format!("{prefix}cumulative_mode{k}.csv"), |w| write_cumulative_csv(rep, k, w));
        if let Ok(p) = axial_profile(rep, k, None) {
            art.with(format!("{prefix}axial_profile_mode{k}.csv"), |w| write_axial_profile_csv(&p, w));
        }
    }
}

fn heat(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let geom = geometry(cfg)?;
    let r = pipeline_on(&geom, p)?;
    heat_artifacts("", &r, art);
    if let Some(i) = cfg.study.field_patch {
        if i >= r.patches.len() {
            return Err(ConfigError {
                path: "study.field_patch".into(),
                message: format!("patch {i} out of range ({} patches)", r.patches.len()),
            }
            .into());
        }
        let grid = cfg.field_grid(r.modes.center.to_f64());
        let samples = export_field_vectors(&r.operator, i, 1.0, &grid).map_err(numerical("heating"))?;
        art.with("field_vectors.csv", |w| write_field_samples_csv(&samples, w));
    }
    Ok(true)
}

fn geometry_name(g: &GeometrySection) -> String {
    match g {
        GeometrySection::Skeleton(_) => "skeleton".into(),
        GeometrySection::Blade(_) => "blade".into(),
        GeometrySection::Mesh(m) => m.path.display().to_string(),
    }
}

fn compare(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let base_section = cfg.study.baseline.as_ref().ok_or_else(|| ConfigError {
        path: "study.baseline".into(),
        message: "compare needs a baseline geometry".into(),
    })?;
    let (na, nb) = (geometry_name(&cfg.geometry), geometry_name(base_section));
    let ga = geometry(cfg)?;
    let gb = build_geometry(base_section, "study.baseline")?;
    let (da, db) = (ga.nominal_distance, gb.nominal_distance);
    if (da - db).abs() > 0.01 * db {
        log::warn!("geometries differ in ion-electrode distance: {da:e} m vs {db:e} m");
    }
    let a = run_pipeline(&ga, p).map_err(|e| Failure::Numerical {
        module: "compare",
        error: e.tagged(na.clone()),
    })?;
    let b = run_pipeline(&gb, p).map_err(|e| Failure::Numerical {
        module: "compare",
        error: e.tagged(nb.clone()),
    })?;
    let c = compare_reports((&na, &a.report, a.patches.len()), (&nb, &b.report, b.patches.len()), p.discretize.target_edge);
    art.json(
        "comparison.json",
        &json!({
            "candidate": c.candidate,
            "baseline": c.baseline,
            "summed_ratio": c.summed_ratio,
            "mode_ratios": c.mode_ratios,
            "spectral_ratios": c.spectral_ratios,
            "summed_spectral_ratio": c.summed_spectral_ratio,
            "mode_map": c.mode_map,
            "target_edge_m": c.target_edge,
            "patches": c.patches,
        }),
    );
    heat_artifacts("candidate_", &a, art);
    heat_artifacts("baseline_", &b, art);
    Ok(true)
}

fn optimize(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let GeometrySection::Skeleton(s) = &cfg.geometry else {
        return Err(ConfigError {
            path: "geometry.type".into(),
            message: "optimize needs a skeleton geometry".into(),
        }
        .into());
    };
    let base = s.params();
    base.validate().map_err(|e| Failure::Config(ConfigError { path: "geometry".into(), message: e.to_string() }))?;
    let r = optimize_gaps(&base, &cfg.gap_sweep(), p).map_err(|e| match e {
        TrapError::Config(m) => Failure::Config(ConfigError {
            path: "study.widths_um".into(),
            message: m,
        }),
        e => numerical("studies")(e),
    })?;
    art.json("optimization.json", &r);
    art.with("optimization.csv", |w| {
        use std::io::Write;
        writeln!(w, "tooth_width_m,phase,teeth_count,axial_gamma,radial_gamma,surface_area_m2,refined")?;
        for q in &r.points {
            writeln!(
                w,
                "{:e},{:?},{},{:e},{:e},{:e},{}",
                q.tooth_width, q.phase, q.teeth_count, q.objective, q.radial_total, q.surface_area, q.refined
            )?;
        }
        Ok(())
    });
    Ok(true)
}

fn scaling(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let spec = cfg.scaling()?;
    let r = distance_scaling(&spec, p).map_err(numerical("studies"))?;
    let disc = disc_power_law(&spec.distances, cfg.study.disc_radius_um * MICRON, cfg.study.disc_sectors, p.solver)
        .map_err(numerical("studies"))?;
    art.json("scaling.json", &json!({ "skeleton": r, "disc": disc }));
    art.with("scaling.csv", |w| {
        use std::io::Write;
        writeln!(w, "distance_m,rf_frequency_hz,axial_peak_m,radial_gamma,radial_spectral_density")?;
        for q in &r.points {
            let peak = q.peak.map(|z| format!("{z:e}")).unwrap_or_default();
            writeln!(w, "{:e},{:e},{},{:e},{:e}", q.distance, q.rf_frequency, peak, q.radial_gamma, q.radial_spectral_density)?;
        }
        Ok(())
    });
    Ok(true)
}

fn validate(cfg: &RunConfig, p: &PipelineConfig, art: &mut Artifacts) -> Result<bool, Failure> {
    let mut checks = validation::sphere_checks(cfg.study.sphere_subdivisions, p.solver).map_err(numerical("electrostatics"))?;
    checks.push(validation::plates_check(0.25e-3, p.solver).map_err(numerical("electrostatics"))?);
    checks.push(validation::reciprocity_check(p.solver).map_err(numerical("electrostatics"))?);
    for c in &checks {
        println!(
            "{} {}: measured {:.6e}, expected {:.6e}, error {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.expected,
            c.error,
            c.tolerance
        );
    }
    art.json("validation.json", &checks);
    Ok(checks.iter().all(|c| c.passed))
}
