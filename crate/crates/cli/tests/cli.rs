use std::process::Command;

fn lecell() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lecell"))
}

#[test]
fn cell_separable_writes_profile_and_report() {
    let root = tempfile::tempdir().unwrap();
    let out = lecell()
        .args(["cell-separable", "--dim", "2", "--p", "3.2"])
        .env("LECELL_OUT", root.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("cell-separable");
    let csv = std::fs::read_to_string(dir.join("phi.csv")).unwrap();
    assert!(csv.starts_with("alpha,phi,dphi\n"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let sec = &json["sections"][0];
    assert!(sec["scalars"]["s_star"].as_f64().unwrap() > 0.0);
    assert!(sec["scalars"]["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(json["config"]["subcommand"], "cell-separable");

    let rep = lecell().args(["report"]).arg(&dir).output().unwrap();
    assert!(rep.status.success());
    assert!(String::from_utf8_lossy(&rep.stdout).contains("PASS cell-separable"));
}

#[test]
fn rerun_from_saved_config_is_byte_identical_apart_from_timings() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let st = lecell()
        .args(["verify", "--criteria", "1,3", "--seed", "5", "--out"])
        .arg(&a)
        .output()
        .unwrap();
    assert!(st.status.success());
    let st = lecell().arg("--config").arg(a.join("config.json")).output().unwrap();
    assert!(st.status.success());
    let strip = |p: &std::path::Path| {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        serde_json::to_string(&v).unwrap()
    };
    let first = strip(&a.join("report.json"));
    let st = lecell().arg("--config").arg(a.join("config.json")).output().unwrap();
    assert!(st.status.success());
    assert_eq!(first, strip(&a.join("report.json")));
}

#[test]
fn window_violation_exits_nonzero_with_formula() {
    let root = tempfile::tempdir().unwrap();
    let out = lecell()
        .args(["cell-connection", "--p", "3.05", "--delta", "-1.5"])
        .env("LECELL_OUT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("δ must"), "{err}");

    let out = lecell()
        .args(["cell-critical", "--sigma", "2.0"])
        .env("LECELL_OUT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(N-1)/2 < σ < (N+1)/2"));
}

#[test]
fn failing_check_gives_failure_exit_code() {
    // a tolerance tighter than the shooting can reach must fail, not pass silently
    let root = tempfile::tempdir().unwrap();
    let out = lecell()
        .args(["cell-separable", "--p", "3.2", "--tol", "1e-30"])
        .env("LECELL_OUT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}
