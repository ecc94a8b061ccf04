use std::process::{Command, Output};

fn cmu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmu-jm")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = cmu(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_value(text: &str, column: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn jm_threshold_pauli_triple() {
    let out = stdout(&["jm-threshold", "--dirs", "z,x,y", "--v", "1", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    let eta = rows[0]["solver"].as_f64().unwrap();
    assert!((eta - 1.0 / 3.0).abs() < 1e-4, "{eta}");
}

#[test]
fn gaussian_report() {
    let text = stdout(&["gaussian", "--eta", "0.4", "--eps", "0", "--N", "2"]);
    assert!(text.contains("extendable"));
    let bad = stdout(&["gaussian", "--eta", "0.6", "--N", "2", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&bad).unwrap();
    assert!(rows.is_array());
}

#[test]
fn keyrate_bb84_threshold() {
    let out = stdout(&["keyrate", "--protocol", "bb84", "--eta", "0.9", "--format", "csv"]);
    assert!(out.contains("eta-threshold,0.829464"), "{out}");
}

#[test]
fn keyrate_diqkd_row() {
    let out = stdout(&["keyrate", "--N", "3,2", "--K", "1", "--eta", "0.95", "--no-bin", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(rows.as_array().is_some_and(|r| !r.is_empty()));
}

#[test]
fn curve_csv_is_deterministic() {
    let args = ["curve", "fig6-3-2-1", "--grid", "0.9:1:6"];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    assert!(a.starts_with("x,y,formula\n"));
    let y = csv_value(&a, "y");
    assert!((y.last().unwrap() - 0.882888).abs() < 1e-5);
}

#[test]
fn threads_env_caps_pool() {
    let args = ["curve", "fig4-dashed-3", "--grid", "0:1:11"];
    let single = Command::new(env!("CARGO_BIN_EXE_cmu-jm")).env("THREADS", "1").args(args).output().unwrap();
    assert!(single.status.success());
    assert_eq!(String::from_utf8(single.stdout).unwrap(), stdout(&args));
}

#[test]
fn json_is_array_of_rows() {
    let out = stdout(&["curve", "fig4-solid-2", "--grid", "0:1:5", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["y"].as_f64(), Some(1.0));
}

#[test]
fn out_writes_file() {
    let path = std::env::temp_dir().join(format!("cmu-jm-out-{}.csv", std::process::id()));
    let out = cmu(&["curve", "fig4-solid-3", "--grid", "0:1:3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(written.lines().count(), 4);
}

#[test]
fn bad_input_single_line_diagnostic() {
    for args in [
        &["curve", "nope"][..],
        &["gaussian", "--eta", "1.5"],
        &["keyrate", "--protocol", "qkd"],
        &["jm-threshold", "--dirs", "z,q"],
        &["frobnicate"],
    ] {
        let out = cmu(args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("cmu-jm: "));
    }
}
