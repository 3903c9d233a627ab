use logeq::equalizer::Algorithm;
use logeq::harness::{emit_results, run_experiment, ExperimentConfig, Preset, ResultBundle, Scale};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::LinearTraining, Scale::Desk);
    cfg.frame_len = 1000;
    cfg.trials = 2;
    cfg
}

fn names(dir: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn two_by_two_grid_writes_four_curves_and_a_summary() {
    let mut cfg = small();
    cfg.algorithms = vec![Algorithm::Sa, Algorithm::Lclma];
    cfg.snr_db = vec![20.0, 30.0];
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_experiment(&cfg, 2).unwrap(), dir.path()).unwrap();
    let files = names(dir.path());
    assert_eq!(files.iter().filter(|f| f.starts_with("curve_")).count(), 4);
    assert!(files.contains(&"summary.csv".to_string()));
    assert!(files.contains(&"manifest.toml".to_string()));
    assert_eq!(files.len(), 6);

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("algorithm,snr_db,ber,final_nase,diverged_count"));
    assert_eq!(lines.count(), 4);

    let curve = std::fs::read_to_string(dir.path().join("curve_lclma_snr30_a1.csv")).unwrap();
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "index,nase,windowed_mse");
    assert_eq!(rows.len(), 1001);
    let last: Vec<f64> = rows[1000].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 1000.0);
}

#[test]
fn empty_bundle_writes_only_the_manifest() {
    let cfg = small();
    let mut bundle: ResultBundle = run_experiment(&cfg, 1).unwrap();
    bundle.cells.clear();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&bundle, dir.path()).unwrap();
    assert_eq!(names(dir.path()), vec!["manifest.toml"]);
}

#[test]
fn curve_stride_decimates() {
    let mut cfg = small();
    cfg.algorithms = vec![Algorithm::Lclma];
    cfg.curve_stride = 100;
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_experiment(&cfg, 1).unwrap(), dir.path()).unwrap();
    let curve = std::fs::read_to_string(dir.path().join("curve_lclma_snr30_a1.csv")).unwrap();
    assert_eq!(curve.lines().count(), 11);
}

#[test]
fn manifest_reloads_to_the_same_config() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_experiment(&cfg, 1).unwrap(), dir.path()).unwrap();
    let back = logeq::harness::load_config(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn taps_and_sequence_files_are_resolved() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("taps.txt"), "# lag -1\n0.2\n1.0\n0.3\n").unwrap();
    std::fs::write(dir.path().join("seq.txt"), "+1 -1 -1 +1\n").unwrap();
    let mut cfg = small();
    cfg.channel.taps = vec![];
    cfg.channel.taps_file = Some("taps.txt".into());
    cfg.channel.anti_causal = 1;
    cfg.bits.sequence = None;
    cfg.bits.sequence_file = Some("seq.txt".into());
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let loaded = logeq::harness::load_config(&path).unwrap();
    assert_eq!(loaded.channel.taps, vec![0.2, 1.0, 0.3]);
    assert_eq!(loaded.bits.sequence, Some(vec![1.0, -1.0, -1.0, 1.0]));
    assert!(loaded.channel.taps_file.is_none());
    loaded.validate().unwrap();
}
