use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_coldjc");

fn small_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn base(n_cm: usize, n_field: usize, lambda: f64) -> String {
    format!(
        r#"{{
        "name": "small",
        "scenario": {{
            "dims": {{ "n_cm": {n_cm}, "n_field": {n_field} }},
            "couplings": [
                {{ "kind": "quadratic", "g0": 1.0, "lambda": {lambda}, "sign": "+" }},
                {{ "kind": "quadratic", "g0": 1.0, "lambda": {lambda}, "sign": "-" }}
            ],
            "times": {{ "start": 0.0, "stop": 0.5, "steps": 10 }}
        }},
        "initial": {{ "c_e": [1, 0], "c_g": [0, 0], "beta": [-0.1, 0.1], "field": {{ "coherent": [0.5, 0] }} }},
        "q_function": {{ "times": [0.0, 0.5], "grid": {{ "half_width": 2.0, "points": 5 }} }},
        "method": "all"
    }}"#
    )
}

fn coldjc(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("COLDJC_LOG")
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn simulate_writes_expected_files_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &base(24, 6, 0.5));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = coldjc(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let names = listing(&a);
    let expected = [
        "gminus.analytic.csv",
        "gminus.decomposed.csv",
        "gminus.oracle.csv",
        "gminus.q_t0.csv",
        "gminus.q_t0p5.csv",
        "gplus.analytic.csv",
        "gplus.decomposed.csv",
        "gplus.oracle.csv",
        "gplus.q_t0.csv",
        "gplus.q_t0p5.csv",
        "jc.csv",
        "summary.json",
    ];
    assert_eq!(names, expected);
    assert_eq!(names, listing(&b), "no temporary files left behind");
    for name in &names {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between runs"
        );
    }

    let csv = std::fs::read_to_string(a.join("gplus.decomposed.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,sigma_z,z_mean,p_mean,field_n_mean,norm")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 6);
    for field in &first {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{field}");
    }
    assert!((first[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(csv.lines().count(), 12);

    let q = std::fs::read_to_string(a.join("gplus.q_t0.csv")).unwrap();
    assert!(q.starts_with("re_alpha,im_alpha,q\n"));
    assert_eq!(q.lines().count(), 26);

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 0);
    assert!(summary["units"]["temperature_note"]
        .as_str()
        .unwrap()
        .contains("microkelvin"));
}

#[test]
fn method_override_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &base(16, 4, 0.5));
    let out = tmp.path().join("o");
    let o = coldjc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("gplus.oracle.csv").exists());
    assert!(!out.join("gplus.decomposed.csv").exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), &base(8, 2, 0.5));
    let o = coldjc(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("guard_field"));

    let o = coldjc(&[
        "simulate",
        "--config",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let bad = small_config(
        tmp.path(),
        &base(16, 4, 0.5).replace("\"method\"", "\"bogus\": 1, \"method\""),
    );
    let o = coldjc(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let o = coldjc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "fastest",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let cfg16 = small_config(tmp.path(), &base(16, 4, 0.5));
    let o = coldjc(&[
        "converge",
        "--config",
        cfg16.to_str().unwrap(),
        "--max-cm",
        "8",
        "--max-field",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verification_failures_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a 16-level CM basis cannot hold the λ = 2 analytic evolution to t = 0.5
    let cfg = small_config(
        tmp.path(),
        &base(16, 4, 2.0).replace("\"stop\": 0.5", "\"stop\": 3.0"),
    );
    let out = tmp.path().join("o");
    let o = coldjc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    // rows are still written
    assert!(out.join("gplus.analytic.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(!summary["failures"].as_array().unwrap().is_empty());
}

#[test]
fn converge_reports_each_doubling() {
    let tmp = tempfile::tempdir().unwrap();
    let body = base(16, 4, 0.0).replace(
        "\"method\": \"all\"",
        "\"method\": \"decomposed\", \"output\": \"OUT\"",
    );
    let out = tmp.path().join("conv");
    let cfg = small_config(tmp.path(), &body.replace("OUT", out.to_str().unwrap()));
    let o = coldjc(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--max-cm",
        "64",
        "--max-field",
        "8",
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    // λ = 0: inversion is independent of the CM truncation
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("n_cm=16"));
    assert!(stdout.contains("n_cm=32"));
    assert!(stdout.contains("converged"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("converge.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
}

#[test]
fn verify_accepts_a_passing_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(
        tmp.path(),
        &base(24, 4, 0.0).replace("\"coherent\": [0.5, 0]", "\"fock\": 1"),
    );
    let out = tmp.path().join("v");
    let o = coldjc(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("PASS JC limit n=2 [analytic]"));
    assert!(out.join("verify.json").exists());
}
