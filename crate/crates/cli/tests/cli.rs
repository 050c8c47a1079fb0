use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn vibrox(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibrox"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn default_verify_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = vibrox(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn strict_smallness_exits_with_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("paraxial.json");
    let o = vibrox(&["verify", "--scenario", sc.to_str().unwrap(), "--strict-smallness"], dir.path());
    assert_eq!(code(&o), 4);
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert!(err["error"].as_str().unwrap().contains("paraxial_smallness"));
    assert_eq!(err["exit_code"], 4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("paraxial.json");
    assert_eq!(code(&vibrox(&["invert", "--scenario", sc.to_str().unwrap()], dir.path())), 2);
    let missing = scenario("missing.json");
    assert_eq!(code(&vibrox(&["forward", "--scenario", missing.to_str().unwrap()], dir.path())), 2);
    assert_eq!(code(&vibrox(&["synth", "--delta", "-0.1"], dir.path())), 2);
    assert_eq!(code(&vibrox(&["frobnicate"], dir.path())), 2);
}

#[test]
fn synth_then_invert_on_the_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let o = vibrox(&["synth", "--delta", "0.01", "--seed", "7"], dir.path());
    assert_eq!(code(&o), 0);
    let meas = dir.path().join("measurement.json");
    assert!(meas.exists() && dir.path().join("measurement.csv").exists());
    let inv = dir.path().join("inv");
    let o = vibrox(&["invert", "--measurement", meas.to_str().unwrap()], &inv);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(inv.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["runs"][0]["delta_rel"], 0.01);

    let ladder = scenario("delta_ladder.json");
    let o = vibrox(
        &["invert", "--scenario", ladder.to_str().unwrap(), "--measurement", meas.to_str().unwrap()],
        &inv,
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let files = |k: usize, dir: &Path| {
        let out = dir.join(k.to_string());
        for cmd in ["forward", "spectral"] {
            assert_eq!(code(&vibrox(&[cmd, "--jobs", "2"], &out)), 0);
        }
        let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    let dir = tempfile::tempdir().unwrap();
    let a = files(0, dir.path());
    assert!(!a.is_empty());
    assert_eq!(a, files(1, dir.path()));
}
