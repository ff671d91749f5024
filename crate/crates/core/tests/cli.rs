use std::process::Command;

fn mecfl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mecfl"))
}

fn write_config(dir: &tempfile::TempDir) -> std::path::PathBuf {
    let p = dir.path().join("exp.toml");
    std::fs::write(
        &p,
        "user_count = 3\nsamples_per_user = 40\nsystem.local_epochs = 1\nsweep.rounds = 2\n",
    )
    .unwrap();
    p
}

#[test]
fn run_writes_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir);
    let out = dir.path().join("run.csv");
    let st = mecfl()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--max-iter", "3", "--scenario", "traditional", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("iteration,"));
    assert!(csv.lines().count() >= 2 && csv.lines().count() <= 4);
    let jsonl = std::fs::read_to_string(out.with_extension("jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), csv.lines().count() - 1);
}

#[test]
fn seed_from_environment_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir);
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = mecfl();
        c.args(["run", "--max-iter", "2", "--config"]).arg(&cfg).env_remove("MECFL_SEED");
        if let Some(s) = env {
            c.env("MECFL_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    assert_eq!(run(Some("11"), None), run(None, Some("11")));
    assert_ne!(run(Some("11"), None), run(None, Some("12")));
    // flag wins over the environment
    assert_eq!(run(Some("12"), Some("11")), run(None, Some("11")));
}

#[test]
fn sweep_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir);
    let o = mecfl()
        .args(["sweep", "--scenario", "sweep_gamma", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "user_cnt = 3\n").unwrap();
    let o = mecfl().args(["run", "--config"]).arg(&p).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("user_cnt"));
}
