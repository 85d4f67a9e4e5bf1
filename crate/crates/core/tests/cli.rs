use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mdrw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdrw")).args(args).arg("--out").arg(out).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const MDE: [&str; 11] = ["mde", "--preset", "diag_rot", "--t", "0,1,2", "--n", "400", "--paths", "2e4", "--window", "-1,1"];

#[test]
fn same_seed_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    mdrw(&[&MDE[..], &["--seed", "5"]].concat(), &a);
    mdrw(&[&MDE[..], &["--seed", "5", "--threads", "1"]].concat(), &b);
    mdrw(&[&MDE[..], &["--seed", "6"]].concat(), &c);
    let read = |d: &Path| std::fs::read(d.join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(std::fs::read(a.join("summary.json")).unwrap(), std::fs::read(b.join("summary.json")).unwrap());
    let header = String::from_utf8(read(&a)).unwrap();
    assert!(header.starts_with("experiment,t,n,estimate,stderr,ess,theory,ratio\n"));
    assert!(a.join("plotdata/mde_upper_n400.csv").exists());
}

#[test]
fn theory_column_follows_from_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    mdrw(&[&MDE[..], &["--seed", "1"]].concat(), dir.path());
    let s = summary(dir.path());
    let c: Vec<f64> = s["zeta_coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let sigma = s["sigma"].as_f64().unwrap();
    let zeta = |tau: f64| c[0] + c[1] * tau + c[2] * tau * tau;
    let upper = |t: f64| 0.5 * libm::erfc(t / std::f64::consts::SQRT_2);
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (t, n, theory): (f64, f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap(), f[6].parse().unwrap());
        let root = n.sqrt();
        let expected = match f[0] {
            "mde_upper" => (t.powi(3) / root * zeta(t / root)).exp() * upper(t),
            "mde_lower" => (-t.powi(3) / root * zeta(-t / root)).exp() * upper(t),
            "llt" => {
                2.0 / (sigma * (2.0 * std::f64::consts::PI * n).sqrt()) * (-0.5 * t * t + t.powi(3) / root * zeta(t / root)).exp()
            }
            other => panic!("unexpected row {other}"),
        };
        assert!((theory - expected).abs() <= 1e-12 * expected, "{line}: {expected}");
        checked += 1;
    }
    assert_eq!(checked, 11);
}

#[test]
fn oracle_reports_exact_tilting() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdrw(&["oracle", "--preset", "sl2_pair", "--n", "6"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(summary(dir.path())["change_of_measure"]["max_discrepancy"].as_f64().unwrap() < 1e-12);
}

#[test]
fn invalid_configurations_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdrw(&["mde", "--preset", "sl2_pair", "--t", "5", "--n", "100"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
    let out = mdrw(&["cumulants", "--preset", "no_such_law"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
    let out = mdrw(&["mde", "--paths", "2.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.json");
    std::fs::write(&law, r#"{"dim": 2, "atoms": [{"m": [[2, 1], [1, 1]], "w": 0.5}, {"m": [[1, 1], [0, 1]], "w": 0.5}]}"#).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"law": "diag_rot", "grid": 256, "s0": 0.4}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_mdrw"))
        .args(["cumulants", "--config"])
        .arg(&config)
        .arg("--law")
        .arg(&law)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&out_dir);
    assert_eq!(s["grid_size"], 256);
    assert_eq!(s["s0"], 0.4);
    assert!(s["lambda1"].as_f64().unwrap() > 0.0);
    assert_eq!(s["atoms"], 2);
}
