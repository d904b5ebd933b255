//! The `lab` binary: exit codes, report files and reproducibility.

use std::path::Path;
use std::process::Command;

fn lab(args: &[&str], config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn passing_run_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = lab(&["moment"], "kernel = \"example\"\n", dir.path());
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("moment: PASS"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/moment.json")).unwrap()).unwrap();
    assert_eq!(json["overall"], "PASS");
    assert_eq!(json["config_digest"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("out/moment_moment_matrix.csv").exists());
}

#[test]
fn reports_are_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "kernel = \"monomial:1,2\"\n[reflectionless]\nprobes = 20\n";
    assert_eq!(lab(&["reflectionless"], cfg, a.path()).0, 0);
    assert_eq!(lab(&["reflectionless"], cfg, b.path()).0, 0);
    let fa = read_dir_sorted(&a.path().join("out"));
    assert!(fa.len() >= 2);
    assert_eq!(fa, read_dir_sorted(&b.path().join("out")));
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "kernel = \"example\"\n[bounded]\nmax_depth = 2\nprobes = 20\ngrowth_factor = 0.01\n";
    let (code, text) = lab(&["bounded"], cfg, dir.path());
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("bounded: FAIL"), "{text}");
}

#[test]
fn refusal_and_bad_config_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = lab(&["unbounded"], "kernel = \"example\"\n", dir.path());
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("refused"), "{text}");
    let (code, text) = lab(&["moment"], "kernal = \"example\"\n", dir.path());
    assert_eq!(code, 2, "{text}");
    let (code, _) = lab(&["moment"], "d = 1\n", dir.path());
    assert_eq!(code, 2);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 5\n[growth]\nlevels = [1]\ntrials = 200\ndip_samples = 20\n";
    let (code, text) = lab(&["growth", "--seed", "77"], cfg, dir.path());
    assert_eq!(code, 0, "{text}");
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/growth.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 77);
}
