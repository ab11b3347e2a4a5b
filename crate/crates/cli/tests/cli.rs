use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn marsris(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marsris"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .env_remove("MARSRIS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Writes the reference config into `dir` and returns its path.
fn reference_cfg(dir: &Path) -> String {
    let o = marsris(dir, &["reference"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("reference.cfg").to_str().unwrap().to_string()
}

#[test]
fn recommend_prints_the_table_row() {
    let tmp = tempfile::tempdir().unwrap();
    let o = marsris(tmp.path(), &["recommend", "--landform", "plateau"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(
        out.lines().next(),
        Some("Passive ✗, STAR ✗, Amplifying ✓, Active ✓")
    );
    let o = marsris(tmp.path(), &["recommend", "--landform", "Crater"]);
    assert_eq!(
        stdout(&o).lines().next(),
        Some("Passive ✓, STAR ✓, Amplifying ✓, Active ✓")
    );
}

#[test]
fn bad_inputs_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_cfg(tmp.path());
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["recommend", "--landform", "ocean"], "unknown landform"),
        (vec!["simulate", "/nonexistent/x.cfg"], "cannot read config"),
        (
            vec!["simulate", &cfg, "--set", "link.frequency_hz=30e9"],
            "error:",
        ),
        (
            vec!["simulate", &cfg, "--set", "link.tx_power_db=3"],
            "unit suffix",
        ),
        (
            vec!["simulate", &cfg, "--set", "grid.bogus=3"],
            "unknown key",
        ),
        (
            vec!["compare", &cfg, "--kinds", "amplifying"],
            "at least two",
        ),
        (
            vec!["compare", &cfg, "--kinds", "amplifying,laser"],
            "unknown RIS kind",
        ),
        (
            vec!["reference", "--file", "../escape.cfg"],
            "plain file name",
        ),
    ];
    for (args, needle) in cases {
        let o = marsris(tmp.path(), &args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_cfg(tmp.path());
    let text = fs::read_to_string(&cfg).unwrap();
    let broken = tmp.path().join("broken.cfg");
    fs::write(&broken, format!("{text}link.noise_power_dbm = loud\n")).unwrap();
    let o = marsris(tmp.path(), &["simulate", broken.to_str().unwrap()]);
    assert!(!o.status.success());
    let line = text.lines().count() + 1;
    assert!(
        stderr(&o).contains(&format!("line {line}")),
        "{}",
        stderr(&o)
    );
}

#[test]
fn simulate_writes_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_cfg(tmp.path());
    let out = tmp.path().join("run");
    let o = marsris(
        &out,
        &[
            "simulate",
            &cfg,
            "--pgm",
            "--set",
            "grid.n_x=12",
            "--set",
            "grid.n_y=10",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("heatmap.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x_m,y_m,z_m,snr_db,best_path"));
    assert_eq!(csv.lines().count(), 1 + 120);
    let pgm = fs::read_to_string(out.join("heatmap.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
    assert!(pgm.contains("\n12 10\n255\n"));

    let m = manifest(&out);
    assert_eq!(m["command"], "simulate");
    let files: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["heatmap.csv", "heatmap.pgm"]);
}

#[test]
fn manifest_digest_tracks_overrides_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_cfg(tmp.path());
    let digest = |name: &str, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let o = marsris(
            &dir,
            &[&["generate-terrain", cfg.as_str()][..], extra].concat(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let m = manifest(&dir);
        (
            m["inputs_sha256"].as_str().unwrap().to_string(),
            m["seed"].as_u64().unwrap(),
        )
    };
    let (base, seed) = digest("a", &[]);
    assert_eq!(digest("b", &[]).0, base);
    let (over, _) = digest("c", &["--set", "terrain.roughness_m=0.7"]);
    let (reseeded, new_seed) = digest("d", &["--seed", "99"]);
    assert_ne!(over, base);
    assert_ne!(reseeded, base);
    assert_eq!(new_seed, 99);
    assert_ne!(seed, 99);
}

#[test]
fn output_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_marsris"))
        .args(["reference", "--file", "ref.cfg"])
        .env("MARSRIS_OUTPUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("ref.cfg").exists());
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn sweep_and_compare_report_on_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = reference_cfg(tmp.path());
    let o = marsris(tmp.path(), &["sweep", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimate: codeword "));
    let sweep = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(
        sweep.lines().next(),
        Some("index,azimuth_deg,elevation_deg,rss_dbm")
    );

    let o = marsris(
        tmp.path(),
        &[
            "compare",
            &cfg,
            "--set",
            "grid.n_x=20",
            "--set",
            "grid.n_y=20",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("mean delta amplifying - star: "));
    let deltas = fs::read_to_string(tmp.path().join("compare_deltas.csv")).unwrap();
    assert_eq!(deltas.lines().count(), 3);
}
