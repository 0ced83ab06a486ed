use std::path::Path;
use std::process::Command;

fn tatopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tatopt"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.ini");
    std::fs::write(
        &path,
        "[grid]\nm = 32\n[time]\nsteps = 64\n[geometry]\nboundary_samples = 256\n[recon]\nstage1_iters = 3\nstage2_iters = 2\n",
    )
    .unwrap();
    path
}

#[test]
fn pipeline_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let status = tatopt()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3", "--alternate", "1"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["errors"]["stages"].as_array().unwrap().len(), 3);
    assert!(out.join("estimate_stage3.tatf").exists());
    let effective = std::fs::read_to_string(out.join("config.ini")).unwrap();
    assert!(effective.contains("seed = 3"));
}

#[test]
fn simulate_exports_recording() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("sim");
    let status = tatopt()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("truth.tatf").exists());
    assert!(out.join("recording_index.jsonl").exists());
    assert!(!out.join("estimate_stage1.tatf").exists());
}

#[test]
fn bad_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[grid]\nsize = 3\n").unwrap();
    let out = tatopt().args(["reconstruct", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("unknown key 'size'"), "{msg}");
    let missing = tatopt()
        .args(["place", "--config", "/nonexistent.ini"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}
