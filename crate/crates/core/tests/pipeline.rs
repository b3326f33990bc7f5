use std::fs;
use std::path::Path;

use mdiqkd::pipeline::{
    estimate_only, partition_ranges, report, run_pipeline, simulate_range, simulate_tally, ConfigSource, PipelineError,
    SimulateOptions, CHECKPOINT_FILE, ESTIMATE_FILE, KEYRATE_JSON_FILE, MANIFEST_FILE, TALLIES_FILE,
};
use mdiqkd::tally::TallyError;
use mdiqkd::{Basis, ExperimentConfig, Simulator, TallyTable};

fn write_config(dir: &Path, n: u64, seed: u64) -> ConfigSource {
    let mut cfg = ExperimentConfig::paper_50km();
    cfg.pulse_pairs = n;
    cfg.seed = seed;
    cfg.fiber_length_km_alice = 2.0;
    cfg.fiber_length_km_bob = 2.0;
    cfg.dark_count_prob_per_gate = 1e-4;
    // comment and odd spacing must survive the snapshot
    let text = format!("# short-arm test run\n{}", cfg.to_toml_string().unwrap());
    let path = dir.join("short.toml");
    fs::write(&path, text).unwrap();
    ConfigSource::File(path)
}

fn opts(parts: u64) -> SimulateOptions {
    SimulateOptions { partitions: Some(parts), checkpoint: None }
}

#[test]
fn runs_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let source = write_config(dir.path(), 300_000, 42);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ma = run_pipeline(&source, &a, &opts(7)).unwrap();
    let mb = run_pipeline(&source, &b, &opts(3)).unwrap();

    for f in [TALLIES_FILE, ESTIMATE_FILE, KEYRATE_JSON_FILE] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(ma.key_rate_per_pulse, mb.key_rate_per_pulse);
    assert_eq!(ma.pulse_pairs, 300_000);
    assert_eq!(ma.seed, 42);

    let ConfigSource::File(cfg_path) = &source else { unreachable!() };
    assert_eq!(fs::read(a.join(&ma.config_snapshot)).unwrap(), fs::read(cfg_path).unwrap());
    for name in ma.artifacts.values() {
        assert!(a.join(name).is_file(), "{name}");
    }
    assert!(a.join(MANIFEST_FILE).is_file());
    assert!(!a.join(CHECKPOINT_FILE).exists());
}

#[test]
fn estimate_from_disk_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let source = write_config(dir.path(), 200_000, 3);
    let out = dir.path().join("run");
    run_pipeline(&source, &out, &opts(4)).unwrap();
    let summary = report(&out).unwrap();
    let (estimate, rate) = estimate_only(&out.join(TALLIES_FILE), &source).unwrap();
    assert_eq!(estimate, summary.estimate);
    assert_eq!(rate, summary.key_rate);
    assert_eq!(summary.manifest.e11_upper, estimate.e11_upper);
    let text = summary.to_string();
    assert!(text.contains("e11"), "{text}");
}

#[test]
fn truncated_tallies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let source = write_config(dir.path(), 20_000, 5);
    let out = dir.path().join("run");
    run_pipeline(&source, &out, &opts(2)).unwrap();
    let csv = fs::read_to_string(out.join(TALLIES_FILE)).unwrap();
    let cut: String = csv.lines().filter(|l| !l.starts_with("3,0,Z,")).map(|l| format!("{l}\n")).collect();
    let bad = dir.path().join("cut.csv");
    fs::write(&bad, cut).unwrap();
    match estimate_only(&bad, &source) {
        Err(PipelineError::Tally(TallyError::Missing { k: 3, l: 0, basis: Basis::Z })) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_runs_are_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let source = write_config(dir.path(), 0, 5);
    let out = dir.path().join("run");
    let err = run_pipeline(&source, &out, &opts(2)).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err:?}");
    assert!(!out.join(TALLIES_FILE).exists());
}

#[test]
fn presets_resolve_and_files_win() {
    assert_eq!(ConfigSource::resolve("paper-50km").unwrap(), ConfigSource::Preset("paper-50km".into()));
    assert!(ConfigSource::resolve("no-such-thing").is_err());
    let dir = tempfile::tempdir().unwrap();
    let ConfigSource::File(p) = write_config(dir.path(), 10, 1) else { unreachable!() };
    assert_eq!(ConfigSource::resolve(p.to_str().unwrap()).unwrap(), ConfigSource::File(p));
}

#[test]
fn checkpoints_resume_where_they_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let ConfigSource::File(p) = write_config(dir.path(), 50_000, 8) else { unreachable!() };
    let cfg = ExperimentConfig::parse(&fs::read_to_string(p).unwrap()).unwrap();
    let cp = dir.path().join(CHECKPOINT_FILE);
    let with_cp = SimulateOptions { partitions: Some(10), checkpoint: Some(cp.clone()) };
    let full = simulate_tally(&cfg, &with_cp).unwrap();
    assert_eq!(full, simulate_tally(&cfg, &opts(1)).unwrap());

    // rewind the checkpoint to partition 4, as if the run had been killed there
    let ranges = partition_ranges(cfg.pulse_pairs, Some(10));
    let sim = Simulator::new(&cfg).unwrap();
    let partial = ranges[..4].iter().fold(TallyTable::new(), |t, r| t.merged(&simulate_range(&sim, r.clone())));
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cp).unwrap()).unwrap();
    json["done"] = 4.into();
    json["table"] = serde_json::to_value(&partial).unwrap();
    fs::write(&cp, json.to_string()).unwrap();
    assert_eq!(simulate_tally(&cfg, &with_cp).unwrap(), full);

    // saved rounds from another seed prove the saved state is used, not recomputed
    let mut reseeded = cfg.clone();
    reseeded.seed ^= 0xdead;
    let foreign = Simulator::new(&reseeded).unwrap();
    let marker = ranges[..4].iter().fold(TallyTable::new(), |t, r| t.merged(&simulate_range(&foreign, r.clone())));
    json["table"] = serde_json::to_value(&marker).unwrap();
    fs::write(&cp, json.to_string()).unwrap();
    let resumed = simulate_tally(&cfg, &with_cp).unwrap();
    let tail = ranges[4..].iter().fold(TallyTable::new(), |t, r| t.merged(&simulate_range(&sim, r.clone())));
    assert_eq!(resumed, marker.merged(&tail));
    assert_ne!(resumed, full);

    // a checkpoint from another seed is ignored
    let mut other = cfg.clone();
    other.seed += 1;
    assert_eq!(simulate_tally(&other, &with_cp).unwrap(), simulate_tally(&other, &opts(1)).unwrap());
}
