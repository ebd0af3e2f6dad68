use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn rshrank() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rshrank"))
}

#[test]
fn flagship_exits_zero_and_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let status = rshrank()
        .arg("--scenario")
        .arg(scenario("flagship.toml"))
        .arg("--report")
        .arg(&report)
        .arg("--csv-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    let csv = std::fs::read_to_string(dir.path().join("realize.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("stage,x0,n,rank,rank/n,h,margin"));
    assert_eq!(lines.count(), 1 + 201);
}

#[test]
fn dimbound_failure_exits_nonzero_with_margin() {
    let out = rshrank().arg("--scenario").arg(scenario("dimbound_failure.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["tasks"][0]["status"], "fail");
    assert_eq!(json["tasks"][0]["margins"][0]["value"], -7.625);
}

#[test]
fn invalid_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[[tasks]]\nid = \"x\"\nop = \"check_dimbound\"\nargs = { rsh = \"missing\", eps = 0.5 }\n").unwrap();
    let out = rshrank().arg("--scenario").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown rsh model missing"));
}

#[test]
fn tolerance_override_and_seed_flags() {
    let out = rshrank()
        .arg("--scenario")
        .arg(scenario("homotopy.toml"))
        .args(["--seed", "11", "--tolerance", "rank=1e-7", "--verbose"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["seed"], 11);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[connect] connect_in_band"));
    let bad = rshrank()
        .arg("--scenario")
        .arg(scenario("homotopy.toml"))
        .args(["--tolerance", "bogus=1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
