use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.conf");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_skrein"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn half_order_dirichlet_levels() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "nu = 0.5\ntheta = inf\n", &["spectrum"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&d.path().join("out/spectrum_inf.csv"));
    for (i, row) in r.iter().take(5).enumerate() {
        let n = (i + 1) as f64;
        assert_eq!(row[0], n);
        let exact = (n * std::f64::consts::PI).powi(2);
        assert!((row[1] / exact - 1.0).abs() < 1e-10);
    }
}

#[test]
fn bad_order_exits_2_naming_the_bound() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "nu = 2\n", &["spectrum"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nu = 2"));
}

#[test]
fn unknown_and_duplicate_keys_exit_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(
        code(&run(d.path(), "nu = 0.3\ncolour = red\n", &["spectrum"])),
        2
    );
    assert_eq!(
        code(&run(d.path(), "nu = 0.3\nnu = 0.4\n", &["spectrum"])),
        2
    );
}

#[test]
fn theta_list_gives_one_file_each() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        "nu = 0.3\nlambda_max = 200\n",
        &["spectrum", "--theta", "0,inf"],
    );
    assert_eq!(code(&o), 0);
    assert!(d.path().join("out/spectrum_0.csv").exists());
    assert!(d.path().join("out/spectrum_inf.csv").exists());
}

#[test]
fn krein_check_passes_and_flags_corrupted_k() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "nu = 0.3\nsamples = 40\n", &["krein-check"]);
    assert_eq!(code(&o), 0);
    let line = String::from_utf8_lossy(&o.stdout).to_string();
    let max: f64 = line
        .trim()
        .strip_prefix("max_residual=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(max < 1e-8);
    // The θ = 0 row comes first and is exact.
    let r = rows(&d.path().join("out/krein_residuals.csv"));
    assert_eq!(r[0][0], 0.0);
    assert!(r[0][4].abs() < 1e-15);
    let bad = run(
        d.path(),
        "nu = 0.3\nsamples = 40\n",
        &["krein-check", "--corrupt-k"],
    );
    assert_eq!(code(&bad), 4);
}

#[test]
fn empty_t_grid_exits_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            d.path(),
            "nu = 0.3\ntheta = 1\nt_grid =\n",
            &["heat-trace"]
        )),
        2
    );
}

#[test]
fn heat_trace_at_infinity_is_rejected() {
    let d = TempDir::new().unwrap();
    assert_eq!(
        code(&run(d.path(), "nu = 0.3\ntheta = inf\n", &["heat-trace"])),
        2
    );
}

#[test]
fn calogero_trace_matches_closed_form() {
    let d = TempDir::new().unwrap();
    let cfg = "nu = 0.3\npotential_coeffs = 0, 0, 1\ntrunc_radius = 12\ntheta = 0\nt_grid = geom:1e-2:1:12\n";
    assert_eq!(code(&run(d.path(), cfg, &["heat-trace"])), 0);
    for r in rows(&d.path().join("out/trace_0.csv")) {
        let t = r[0];
        assert!((r[1] - (0.6 * t).sinh() / (2.0 * t).sinh()).abs() < 1e-6);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = "nu = 0.7\npotential_coeffs = 0, 1\nsamples = 20\nseed = 7\ntheta = 0.5, 2\n";
    assert_eq!(code(&run(a.path(), cfg, &["krein-check"])), 0);
    assert_eq!(code(&run(b.path(), cfg, &["krein-check"])), 0);
    for f in ["krein_residuals.csv", "run_manifest.json"] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap()
        );
    }
}

#[test]
fn manifest_records_hash_and_tolerances() {
    let d = TempDir::new().unwrap();
    let cfg = "nu = 0.3\nlambda_max = 100\ntolerances = ode:1e-14\n";
    assert_eq!(
        code(&run(d.path(), cfg, &["spectrum", "--format", "json"])),
        0
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["tolerances"]["ode"], 1e-14);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"][0]["file"], "spectrum_0.json");
}

#[test]
fn scale_invariant_prediction_has_no_anomalous_terms() {
    let d = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            d.path(),
            "nu = 0.3\ntheta = 0\n",
            &["expansion", "predict"]
        )),
        0
    );
    let e: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/expansion.json")).unwrap())
            .unwrap();
    let terms = e["terms"].as_array().unwrap();
    assert!(!terms.is_empty());
    assert!(terms.iter().all(|t| t["q"] == 0));
}

#[test]
fn compare_passes_for_unit_theta() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "nu = 0.3\ntheta = 1\n", &["expansion", "compare"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("out/compare.csv").exists());
}

#[test]
fn compare_fails_with_impossible_threshold() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        "nu = 0.3\ntheta = 1\nthreshold_anomalous = 1e-12\n",
        &["expansion", "compare"],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn free_exponent_fit_recovers_order() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        "nu = 0.7\ntheta = 1\nfree_exponent = 0.5\n",
        &["expansion", "fit"],
    );
    assert_eq!(code(&o), 0);
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/fit_report.json")).unwrap())
            .unwrap();
    let est = r["free_exponent"]["estimate"].as_f64().unwrap();
    assert!((est - 0.7).abs() <= 0.02);
}
