use std::fs;
use std::path::Path;
use std::process::Command;

use synrisk_core::Error;

fn synrisk(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_synrisk")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn clear_writes_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"model": "clear", "L": [[0, 2], [1, 0]], "e": [0.5, 0.5]}"#);
    let out = dir.path().join("out");
    let (code, _, err) = synrisk(&["clear", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("clearing.json")).unwrap()).unwrap();
    assert_eq!(v["defaults"], serde_json::json!([0]));
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"model": "cascade", "params": {"n": 300, "R_bar": 0.2, "rho0": 0.01},
            "sweep": [{"param": "z", "values": [1, 3]}], "trials": 4}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, threads) in [(&a, "1"), (&b, "2")] {
        let (code, _, err) = synrisk(&["sweep", "--config", &cfg, "--seed", "5", "--threads", threads, "--out", d.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["rows.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(fs::read_to_string(a.join("rows.csv")).unwrap().lines().count(), 1 + 2 * 4);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_sweep = write(dir.path(), "bad.json", r#"{"model": "theory", "params": {"bogus": 1}}"#);
    let (code, _, err) = synrisk(&["sweep", "--config", &bad_sweep]);
    assert_eq!(code, 2);
    assert!(err.contains("params.bogus") && err.contains("params.z"), "{err}");

    let negative = write(dir.path(), "neg.json", r#"{"model": "clear", "L": [[0, -1], [0, 0]], "e": [1, 1]}"#);
    assert_eq!(synrisk(&["clear", "--config", &negative]).0, 2);

    let wrong_model = write(dir.path(), "dr.json", r#"{"model": "debtrank", "W": [[0]], "E0": [1], "shock": [0]}"#);
    assert_eq!(synrisk(&["clear", "--config", &wrong_model]).0, 2);

    assert_eq!(synrisk(&["clear", "--config", dir.path().join("missing.json").to_str().unwrap()]).0, 1);
    assert_eq!(synrisk(&["teleport"]).0, 2);
}

#[test]
fn numerical_failures_map_to_three() {
    let e = Error::Convergence { iterations: 10, residual: 1.0 };
    assert_eq!(e.exit_code(), 3);
    assert_eq!(Error::Singular("x".into()).exit_code(), 3);
    assert_eq!(Error::Config(vec![]).exit_code(), 2);
}
