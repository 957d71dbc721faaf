use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CHANNEL: &str = r#""channel": { "h11": 1, "h12": 4, "h21": 3, "h22": 1, "p1": 1, "p2": 1 }"#;

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, format!("{{ {CHANNEL}, {body} }}")).unwrap();
    p
}

fn icdisp(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icdisp"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("ICDISP_THREADS")
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_reports_example_channel() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#""seed": 0"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(icdisp("analyze", &cfg, &a, &[]).status.success());
    assert!(icdisp("analyze", &cfg, &b, &[]).status.success());
    let ja = std::fs::read(a.join("analyze.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("analyze.json")).unwrap());
    let v = read_json(&a.join("analyze.json"));
    assert_eq!(v["regime"], "strictly_very_strong");
    assert!((v["v1"].as_f64().unwrap() - 0.375).abs() < 1e-12);
    assert!((v["first_order"]["i12"].as_f64().unwrap() - 0.5 * 11f64.ln()).abs() < 1e-12);
    assert_eq!(v["capacity_rectangle"].as_array().unwrap().len(), 4);
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{ "channel": { "h11": 1, "h12": 4, "h21": 3, "h22": 1, "p1": "one", "p2": 1 } }"#).unwrap();
    let o = icdisp("analyze", &p, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("channel"), "{err}");

    std::fs::write(&p, "{ not json").unwrap();
    assert_eq!(icdisp("analyze", &p, dir.path(), &[]).status.code(), Some(2));

    let missing = write_config(dir.path(), r#""seed": 1"#);
    let o = icdisp("region", &missing, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target"));
}

#[test]
fn region_corner_is_symmetric_and_on_the_boundary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#""target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.001 }, "region": { "grid": 101 }"#,
    );
    let o = icdisp("region", &cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("region.csv"));
    assert_eq!(header, ["l1", "l2"]);
    assert_eq!(rows.len(), 101);
    let sd = 0.375f64.sqrt();
    for r in &rows {
        assert!((phi(-r[0] / sd) * phi(-r[1] / sd) - 0.999).abs() < 1e-9);
        assert!(r[0] < 0.0 && r[1] < 0.0);
    }
    // swapping coordinates maps the trace onto the same curve: the ends trade
    // places and every swapped point stays on the boundary within the range
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    assert!((first[0] - last[1]).abs() < 1e-9 && (first[1] - last[0]).abs() < 1e-9);
    for r in &rows {
        assert!((phi(-r[1] / sd) * phi(-r[0] / sd) - 0.999).abs() < 1e-9);
        assert!(r[1] >= first[0] - 1e-9 && r[1] <= last[0] + 1e-9);
    }
    let svg = std::fs::read_to_string(dir.path().join("region.svg")).unwrap();
    assert!(svg.contains(r#"version="1.1""#) && svg.contains("<polyline") && svg.contains("nats/√use"));
    assert!(!svg.contains("href"));
    let meta = read_json(&dir.path().join("region.json"));
    assert_eq!(meta["case"], "corner");
}

#[test]
fn region_three_quarter_error_passes_through_origin() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#""target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.75 }, "region": { "grid": 2001 }"#,
    );
    assert!(icdisp("region", &cfg, dir.path(), &[]).status.success());
    let (_, rows) = read_csv(&dir.path().join("region.csv"));
    let sd = 0.375f64.sqrt();
    for r in &rows {
        assert!((phi(-r[0] / sd) * phi(-r[1] / sd) - 0.25).abs() < 1e-9);
    }
    // the curve crosses l1 = l2 at the origin
    let k = rows.iter().position(|r| r[0] >= r[1]).unwrap();
    let (p, q) = (&rows[k - 1], &rows[k]);
    let w = (p[1] - p[0]) / ((p[1] - p[0]) + (q[0] - q[1]));
    let cross = p[0] + w * (q[0] - p[0]);
    assert!(cross.abs() < 1e-4, "{cross}");
    assert!((phi(0.0) * phi(0.0) - 0.25).abs() < 1e-15);
}

#[test]
fn region_minimal_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#""target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.001 }, "region": { "grid": 2 }"#,
    );
    assert!(icdisp("region", &cfg, dir.path(), &[]).status.success());
    let (_, rows) = read_csv(&dir.path().join("region.csv"));
    assert_eq!(rows.len(), 2);
    assert!((rows[0][0] - rows[1][1]).abs() < 1e-9 && (rows[0][1] - rows[1][0]).abs() < 1e-9);
    let svg = std::fs::read_to_string(dir.path().join("region.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn region_sentinels_for_interior_and_exterior() {
    for (k1, expect) in [("0.1", "all"), ("0.5", "empty")] {
        let dir = TempDir::new().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!(r#""target": {{ "kappa1": {k1}, "kappa2": 0.1, "epsilon": 0.1 }}"#),
        );
        assert!(icdisp("region", &cfg, dir.path(), &[]).status.success());
        let meta = read_json(&dir.path().join("region.json"));
        assert_eq!(meta["region"], expect);
        assert!(!dir.path().join("region.svg").exists());
        assert!(!dir.path().join("region.csv").exists());
    }
}

#[test]
fn region_vertical_is_a_straight_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#""target": { "kappa1": "capacity", "kappa2": 0.1, "epsilon": 0.1 }"#);
    assert!(icdisp("region", &cfg, dir.path(), &[]).status.success());
    let (_, rows) = read_csv(&dir.path().join("region.csv"));
    let l1 = rows[0][0];
    assert!(rows.iter().all(|r| r[0] == l1));
    assert!((phi(-l1 / 0.375f64.sqrt()) - 0.9).abs() < 1e-12);
}

#[test]
fn weak_interference_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("weak.json");
    std::fs::write(
        &p,
        r#"{ "channel": { "h11": 1, "h12": 0.5, "h21": 0.5, "h22": 1, "p1": 1, "p2": 1 },
            "target": { "kappa1": 0.3, "kappa2": 0.3, "epsilon": 0.1 } }"#,
    )
    .unwrap();
    assert_eq!(icdisp("region", &p, dir.path(), &[]).status.code(), Some(3));
    assert!(icdisp("analyze", &p, dir.path(), &[]).status.success());
}

const SIM: &str = r#""target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.1 },
    "simulate": { "point": "symmetric_boundary", "n_list": [50, 100], "trials": 2000 }"#;

#[test]
fn simulate_replays_and_has_constant_prediction() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SIM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(icdisp("simulate", &cfg, &a, &["--seed", "11"]).status.success());
    assert!(icdisp("simulate", &cfg, &b, &["--seed", "11"]).status.success());
    let bytes = std::fs::read(a.join("simulate.csv")).unwrap();
    assert_eq!(bytes, std::fs::read(b.join("simulate.csv")).unwrap());
    assert!(String::from_utf8_lossy(&bytes).contains("\r\n"));
    let (header, rows) = read_csv(&a.join("simulate.csv"));
    assert_eq!(header[0], "n");
    assert_eq!(header[5], "theorem_prediction");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][5], rows[1][5]);
    assert!((rows[0][5] - 0.1).abs() < 1e-12);

    let c = dir.path().join("c");
    assert!(icdisp("simulate", &cfg, &c, &["--seed", "12"]).status.success());
    assert_ne!(bytes, std::fs::read(c.join("simulate.csv")).unwrap());
}

#[test]
fn simulate_rejects_too_few_trials() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SIM.replace("2000", "10"));
    assert_eq!(icdisp("simulate", &cfg, dir.path(), &[]).status.code(), Some(3));
}

const QUICK_VERIFY: &str = r#""verify": { "n": 50, "fixed_trials": 2000, "u_blocks": 200, "vd_n": 50,
    "vd_trials": 2000, "oracle_blocks": 50, "ratio_n": [50], "ratio_samples": 500, "scan_points": 2000,
    "ks_n": [10, 200], "ks_trials": 5000"#;

#[test]
fn verify_passes_and_is_versioned() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{QUICK_VERIFY} }}"));
    let o = icdisp("verify", &cfg, dir.path(), &[]);
    let report = read_json(&dir.path().join("verify.json"));
    assert!(o.status.success(), "{report:#}");
    assert_eq!(report["schema_version"], 1);
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["fixed_codeword_mean_random", "fixed_codeword_cov_alternating_spike", "u_covariance", "tau_jacobian", "vd_symbolic", "vd_empirical", "phi_scan_rx1", "rho_scan_rx2"] {
        assert!(names.contains(&want), "{want} missing");
    }
}

#[test]
fn corrupted_dispersion_fails_verification() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(r#"{QUICK_VERIFY}, "vd_perturbation": {{ "row": 0, "col": 2, "delta": 1e-3 }} }}"#),
    );
    let o = icdisp("verify", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let report = read_json(&dir.path().join("verify.json"));
    let vd = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "vd_symbolic").unwrap();
    assert_eq!(vd["passed"], false);
    assert_eq!(report["passed"], false);
}
