use std::path::Path;
use std::process::{Command, Output};

fn vcforge(args: &[&str], workdir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vcforge"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("VCFORGE_WORKDIR");
    if let Some(w) = workdir {
        cmd.env("VCFORGE_WORKDIR", w);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synthetic(dir: &Path) -> String {
    let out = vcforge(&["make-synthetic", "--out", dir.to_str().unwrap(), "--seed", "3", "--utterances", "4", "--train", "3"], None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("experiment.toml").to_str().unwrap().to_string()
}

#[test]
fn full_f0_chain_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic(dir.path());
    for args in [
        vec!["extract", "-c", &cfg],
        vec!["align", "-c", &cfg],
        vec!["train", "-c", &cfg, "--system", "F0-MeanVar"],
        vec!["convert", "-c", &cfg, "--system", "F0-MeanVar", "--no-spectral"],
    ] {
        let out = vcforge(&args, None);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = vcforge(&["evaluate", "-c", &cfg, "--system", "F0-MeanVar", "--no-spectral"], None);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("evaluation: source+F0-MeanVar"), "{stdout}");
    assert!(dir.path().join("eval/source+F0-MeanVar/report.kv").is_file());
}

#[test]
fn missing_input_is_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic(dir.path());
    std::fs::remove_file(dir.path().join("wav/tgt_utt001.wav")).unwrap();
    let out = vcforge(&["extract", "-c", &cfg], None);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("utt001"));
    assert!(dir.path().join("features/utt000/src.env.vcft").is_file());
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&vcforge(&["extract", "-c", missing.to_str().unwrap()], None)), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "jobs = 0\n").unwrap();
    assert_eq!(code(&vcforge(&["train", "-c", bad.to_str().unwrap()], None)), 2);
    let cfg = synthetic(dir.path());
    // a spectral system cannot stand in for the F0 system of the chain
    assert_eq!(code(&vcforge(&["convert", "-c", &cfg, "--system", "Duration-DNN"], None)), 2);
    assert_eq!(code(&vcforge(&["train", "-c", &cfg, "--system", "NoSuchSystem"], None)), 2);
}

#[test]
fn workdir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out_root = tempfile::tempdir().unwrap();
    let cfg = synthetic(dir.path());
    assert_eq!(code(&vcforge(&["extract", "-c", &cfg], Some(out_root.path()))), 0);
    assert!(out_root.path().join("features/utt000/src.f0.vcft").is_file());
    assert!(!dir.path().join("features").exists());
}
