use std::path::Path;
use std::process::{Command, Output};

fn logeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logeq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let out = logeq(&["show-config", "--preset", "linear-training"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap()
        .replace("frame_len = 50000", "frame_len = 1500")
        .replace("trials = 10", "trials = 2");
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn show_config_prints_loadable_toml() {
    let out = logeq(&["show-config", "--preset", "dfe", "--seed", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("preset = \"dfe\""));
    assert!(text.contains("seed = 9"));
    let cfg = logeq::harness::ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.equalizer.feedback, 8);
}

#[test]
fn full_scale_flag() {
    let out = logeq(&["show-config", "--preset", "dfe", "--full-scale"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("feedback = 150"));
}

#[test]
fn unknown_preset_fails() {
    let out = logeq(&["show-config", "--preset", "nope"]);
    assert!(!out.status.success());
}

#[test]
fn simulate_writes_csv_and_manifest_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = logeq(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("algorithm,snr_db,ber,final_nase,diverged_count"));
    assert_eq!(summary.lines().count(), 6);

    let manifest = a.join("manifest.toml");
    let out = logeq(&["simulate", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap(), "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap() + "\nextra = 1\n";
    std::fs::write(&cfg, text).unwrap();
    let out = logeq(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn predict_emse_reports_labelled_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = logeq(&[
        "predict-emse", "--trace-r", "16", "--trace-a", "0", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    for key in ["eta_gaussian,", "eta_impulsive,", "steady_mse,"] {
        assert!(text.contains(key), "{text}");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("emse.csv")).unwrap(), text);
}
