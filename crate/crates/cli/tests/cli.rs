use std::path::Path;
use std::process::{Command, Output};

const SMALL_SKELETON: &str = r#"
[geometry]
type = "skeleton"
teeth_count = 3
axial_extent_um = 530

[resolution]
target_edge_um = 8.9
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapheat")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn manifest_hashes(dir: &Path) -> Vec<(String, String)> {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["name"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn visible_files(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| !n.starts_with('.'))
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn unknown_key_exits_with_code_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[geometry]\ntype = \"skeleton\"\ntooth_widht_um = 200\n");
    let out = tmp.path().join("out");
    let o = run(&["heat", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tooth_widht_um"));
    assert!(visible_files(&out).is_empty());
}

#[test]
fn invalid_value_reports_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[geometry]\ntype = \"skeleton\"\n[drive]\nrf_frequency_mhz = -1\n");
    let o = run(&["modes", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("drive.rf_frequency"));
}

#[test]
fn numerical_failure_exits_with_code_3_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_SKELETON}\n[drive]\nrf_amplitude_v = 0\naxial_frequency_mhz = 0\n");
    let cfg = write_config(tmp.path(), "zero.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&["heat", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(visible_files(&out).is_empty());
}

#[test]
fn zero_noise_gives_all_zero_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_SKELETON}\n[noise]\ns0 = 0\n");
    let cfg = write_config(tmp.path(), "quiet.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&["heat", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let map = std::fs::read_to_string(out.join("heatmap_mode0.trapmesh")).unwrap();
    let scalars: Vec<f64> = map
        .lines()
        .filter(|l| l.starts_with("f "))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert!(!scalars.is_empty());
    assert!(scalars.iter().all(|&s| s == 0.0));
}

#[test]
fn rerun_from_manifest_reproduces_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_SKELETON);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run(&["heat", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["heat", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "1"]).status.success());
    let manifest = a.join("manifest.json");
    assert!(run(&["heat", "--config", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]).status.success());
    let ha = manifest_hashes(&a);
    assert!(ha.len() > 5);
    assert_eq!(ha, manifest_hashes(&b));
    assert_eq!(ha, manifest_hashes(&c));
    let bytes = std::fs::read(a.join("heating.json")).unwrap();
    let recorded = &ha.iter().find(|(n, _)| n == "heating.json").unwrap().1;
    let digest: String = {
        use sha2::Digest;
        sha2::Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    };
    assert_eq!(&digest, recorded);
}

#[test]
fn generate_writes_mesh_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL_SKELETON);
    let out = tmp.path().join("g");
    let o = run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap(), "--resolution-um", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("geometry.json")).unwrap()).unwrap();
    assert_eq!(summary["symmetry_order"], 8);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["resolution"]["target_edge_um"], 8.0);
    assert!(std::fs::read_to_string(out.join("geometry.trapmesh")).unwrap().starts_with("trapmesh"));
}

#[test]
fn validate_reports_each_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.toml", "[geometry]\ntype = \"skeleton\"\n[study]\nsphere_subdivisions = 8\n");
    let out = tmp.path().join("v");
    let o = run(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    let checks: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("validation.json")).unwrap()).unwrap();
    assert!(checks.as_array().unwrap().iter().all(|c| c["passed"] == true));
}
