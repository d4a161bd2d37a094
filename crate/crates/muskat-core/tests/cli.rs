use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use muskat::cli::{Certificate, Meta};
use muskat::config::RunConfig;
use muskat::io::read_state_csv;
use serde_json::{json, Value};

fn muskat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muskat"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn gaussian_config(out: &Path) -> Value {
    json!({
        "schema_version": 1,
        "scenario": {"name": "gaussian", "params": {"amplitude": 0.8}},
        "grid": {"n": 161, "x0": -8.0, "x1": 8.0, "boundary_mode": "compact"},
        "stepper": {"t_end": 0.1, "output_stride": 4},
        "modulus": "auto",
        "output": {"dir": out}
    })
}

#[test]
fn simulate_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "run.json", &gaussian_config(&out));
    let o = muskat(&["simulate", &cfg]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "meta.json",
        "certificate.json",
        "monitors.csv",
        "modulus.json",
        "feasibility.json",
        "state_0.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let cert: Certificate =
        serde_json::from_str(&fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert.exit_code, 0);
    assert_eq!(cert.monitors.len(), 5);

    let meta: Meta =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    let run = meta.run.unwrap();
    assert!((run.t_final - 0.1).abs() < 1e-12);
    // the recorded config reproduces the run
    let again = RunConfig::from_json(&meta.config.to_json()).unwrap();
    assert_eq!(again, meta.config);

    let last = read_state_csv(&out.join(format!("state_{}.csv", run.snapshots - 1))).unwrap();
    assert!((last.t() - 0.1).abs() < 1e-12);
    let monitors = fs::read_to_string(out.join("monitors.csv")).unwrap();
    assert_eq!(monitors.lines().count(), run.snapshots + 1);
}

#[test]
fn invalid_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let mut unknown = gaussian_config(&out);
    unknown["stepper"]["cfl_number"] = json!(0.3);
    let mut bad_grid = gaussian_config(&out);
    bad_grid["grid"]["n"] = json!(3);
    let mut bad_scenario = gaussian_config(&out);
    bad_scenario["scenario"]["name"] = json!("volcano");
    for (k, v) in [unknown, bad_grid, bad_scenario].iter().enumerate() {
        let p = write_config(tmp.path(), &format!("bad{k}.json"), v);
        assert_eq!(muskat(&["simulate", &p]).status.code(), Some(2), "case {k}");
    }
    assert_eq!(
        muskat(&["simulate", "/nonexistent/config.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(muskat(&["frobnicate"]).status.code(), Some(2));
    let zero = write_config(
        tmp.path(),
        "zero.json",
        &json!({"modulus": {"lambda": 0.0, "Lambda": 2.0, "slope_sup": 1.0}, "output": {"dir": out}}),
    );
    assert_eq!(muskat(&["certify-modulus", &zero]).status.code(), Some(2));
}

#[test]
fn certify_reports_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cert");
    let p = write_config(
        tmp.path(),
        "c.json",
        &json!({"modulus": {"A": 1.0, "lambda": 1.0, "Lambda": 2.0, "slope_sup": 1.0}, "output": {"dir": out}}),
    );
    let o = muskat(&["certify-modulus", &p]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("margins certified"));
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(out.join("modulus.json")).unwrap()).unwrap();
    assert_eq!(doc["sweep"]["points"], doc["sweep"]["certified"]);
    let csv = fs::read_to_string(out.join("margins.csv")).unwrap();
    assert!(csv.starts_with("xi,M,t1,t2,t3,t4,t5,target,total_margin,quad_error\n"));
    assert!(csv.lines().count() > 200);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "run.json", &gaussian_config(&out));
    let snapshot = |dir: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(muskat(&["simulate", &cfg]).status.code(), Some(0));
    let first = snapshot(&out);
    fs::remove_dir_all(&out).unwrap();
    assert_eq!(muskat(&["simulate", &cfg]).status.code(), Some(0));
    assert_eq!(first, snapshot(&out));
}

#[test]
fn inspect_prints_statistics_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "run.json", &gaussian_config(&out));
    assert_eq!(muskat(&["simulate", &cfg]).status.code(), Some(0));
    let state = out.join("state_0.csv");
    let state = state.to_str().unwrap();

    let o = muskat(&["inspect", state]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("# ")));
    assert!(text.contains("# beta = "));

    let o = muskat(&["inspect", state, "--kernel"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("x,h,k_value,K_value\n"));

    let o = muskat(&["inspect", state, "--rhs"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let diff: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# max_abs_difference = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff < 1e-2);

    assert_eq!(
        muskat(&["inspect", state, "--kernel", "--rhs"])
            .status
            .code(),
        Some(2)
    );
    let junk = tmp.path().join("junk.csv");
    fs::write(&junk, "x,f\n1,2\n").unwrap();
    assert_eq!(
        muskat(&["inspect", junk.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
