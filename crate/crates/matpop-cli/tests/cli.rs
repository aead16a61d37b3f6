//! End-to-end tests of the `matpop` binary: artifact creation,
//! determinism, validation exit codes, verdict reporting and initial-data
//! round-tripping.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_matpop"));
    c.env_remove("MATPOP_OUT");
    c
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn simulate_reference_config_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(repo_config("reference.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["fields.csv", "immature.csv", "initial.csv", "meta.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let meta = std::fs::read_to_string(out.join("meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert!(v["derived"]["rho"].as_f64().unwrap() > 1.0);
    assert_eq!(v["effective_nodes"].as_u64().unwrap(), 96);
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let status = bin()
            .args(["simulate", "--config"])
            .arg(repo_config("reference.toml"))
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in ["fields.csv", "immature.csv", "initial.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} not byte-identical");
    }
}

#[test]
fn invalid_kappa_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = std::fs::read_to_string(repo_config("reference.toml"))
        .unwrap()
        .replace("kappa = 2.0", "kappa = 0.5");
    std::fs::write(&cfg, text).unwrap();
    let outdir = tmp.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&outdir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("division"), "diagnostic should name the condition: {err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("extra.toml");
    let text = std::fs::read_to_string(repo_config("reference.toml")).unwrap()
        + "\n[run.extra_section]\nfoo = 1\n";
    std::fs::write(&cfg, text).unwrap();
    let output = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn analyze_reports_the_three_regimes() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, verdict) in [
        ("stable.toml", "GloballyExpStable"),
        ("unstable.toml", "Unstable"),
        ("reference.toml", "ImmatureStableOnly"),
    ] {
        let out = tmp.path().join(name);
        let output = bin()
            .args(["analyze", "--config"])
            .arg(repo_config(name))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(output.status.success(), "{name}");
        let report = std::fs::read_to_string(out.join("stability.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(v["overall"].as_str().unwrap(), verdict, "{name}");
    }
}

#[test]
fn dump_tables_matches_reference_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("tables");
    let status = bin()
        .args(["dump-tables", "--config"])
        .arg(repo_config("reference.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("tables.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "m,h,theta,delta,xi_bar,pi_bar");
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        // V(m) = m makes h the identity
        assert!((f[0] - f[1]).abs() < 1e-10, "h(m) = m fails: {line}");
        // theta solves x(x + 4) = m
        let theta = f[2];
        if f[0] > 0.0 {
            assert!((theta * (theta + 4.0) - f[0]).abs() < 1e-8, "{line}");
        }
    }
}

#[test]
fn initial_data_round_trips_through_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(repo_config("reference.toml"))
        .arg("--out")
        .arg(&first)
        .status()
        .unwrap();
    assert!(status.success());

    // re-ingest the dumped initial.csv as tabulated data
    let cfg_path = tmp.path().join("reingest.toml");
    let initial_csv = first.join("initial.csv");
    let text = std::fs::read_to_string(repo_config("reference.toml")).unwrap();
    let patched = text.replace(
        "mu = [\"constant(0.4)\", \"bump(0.05, 0.6)\"]\ngamma = \"constant(0.2)\"",
        &format!(
            "mu = {{ csv = \"{p}\", column = \"mu\" }}\ngamma = {{ csv = \"{p}\", column = \"gbar\" }}\ngamma_age = \"hold_integral\"",
            p = initial_csv.display()
        ),
    );
    assert_ne!(patched, text, "patch failed");
    std::fs::write(&cfg_path, patched).unwrap();

    let second = tmp.path().join("second");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert!(status.success());

    // the first snapshot (t = 0 rows of fields.csv) must agree to 1e-12
    let rows = |p: &Path| -> Vec<Vec<f64>> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .filter(|r: &Vec<f64>| r[0] == 0.0)
            .collect()
    };
    let a = rows(&first.join("fields.csv"));
    let b = rows(&second.join("fields.csv"));
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for (ra, rb) in a.iter().zip(b.iter()) {
        assert!((ra[2] - rb[2]).abs() <= 1e-12, "N differs: {ra:?} vs {rb:?}");
        assert!((ra[3] - rb[3]).abs() <= 1e-12, "P differs: {ra:?} vs {rb:?}");
    }
}

#[test]
fn gamma_accepts_full_age_table_csv() {
    let tmp = tempfile::tempdir().unwrap();
    // age-constant 2-D table equivalent to gamma = "constant(0.2)"
    let mut csv = String::from("m,a,gamma\n");
    for i in 0..=8 {
        for j in 0..=4 {
            csv.push_str(&format!("{},{},0.2\n", i as f64 / 8.0, 1.7 * j as f64 / 4.0));
        }
    }
    let table_path = tmp.path().join("gamma.csv");
    std::fs::write(&table_path, csv).unwrap();
    let cfg_path = tmp.path().join("table.toml");
    let text = std::fs::read_to_string(repo_config("reference.toml")).unwrap().replace(
        "gamma = \"constant(0.2)\"",
        &format!("gamma = {{ csv = \"{}\" }}", table_path.display()),
    );
    std::fs::write(&cfg_path, text).unwrap();

    let out_a = tmp.path().join("table-run");
    let out_b = tmp.path().join("preset-run");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_a)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(repo_config("reference.toml"))
        .arg("--out")
        .arg(&out_b)
        .status()
        .unwrap()
        .success());
    let a = std::fs::read_to_string(out_a.join("fields.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("fields.csv")).unwrap();
    for (la, lb) in a.lines().skip(1).zip(b.lines().skip(1)) {
        let fa: Vec<f64> = la.split(',').map(|v| v.parse().unwrap()).collect();
        let fb: Vec<f64> = lb.split(',').map(|v| v.parse().unwrap()).collect();
        for (x, y) in fa.iter().zip(fb.iter()) {
            assert!((x - y).abs() <= 1e-10, "{la} vs {lb}");
        }
    }
}

#[test]
fn sweep_fans_out_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let status = bin()
        .args(["sweep", "--workers", "3", "--config"])
        .arg(repo_config("sweep.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["beta-low", "beta-mid", "beta-high"] {
        assert!(out.join(name).join("fields.csv").is_file(), "{name}");
        assert!(out.join(name).join("meta.json").is_file(), "{name}");
    }
}

#[test]
fn env_var_overrides_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let env_out = tmp.path().join("from-env");
    let flag_out = tmp.path().join("from-flag");
    let status = bin()
        .env("MATPOP_OUT", &env_out)
        .args(["dump-tables", "--config"])
        .arg(repo_config("reference.toml"))
        .arg("--out")
        .arg(&flag_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("tables.csv").is_file());
    assert!(!flag_out.exists());
}

#[test]
fn verify_closed_forms_suite_passes() {
    let output = bin().args(["verify", "--suite", "closed-forms"]).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("[PASS] closed-forms"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn verify_rejects_unknown_suite() {
    let output = bin().args(["verify", "--suite", "nonsense"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}
