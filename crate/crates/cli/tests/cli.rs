use std::process::Command;

fn infmod(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_infmod"))
        .args(args)
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

#[test]
fn bad_configuration_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nepsilon = -1.0\n").unwrap();
    let out = infmod(&["validate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.toml");
    let out = infmod(&["simulate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = infmod(&["simulate", "--threads", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn short_simulation_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[run]\nt_end = 0.1\nmodel = \"sexual-renormalized\"\n").unwrap();
    let out = infmod(&["simulate", "--emit-plots", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("check_name,pass,value,threshold"));
    assert!(stdout.lines().any(|l| l.starts_with("mass_drift,true,")));
    for f in ["trajectory.csv", "mean_path.csv", "limit_path.csv", "residuals.csv", "trajectory.svg"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}
