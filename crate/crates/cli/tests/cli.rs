use std::path::Path;
use std::process::Command;

use gensim::net::NetSpec;
use gensim::train::LossKind;
use gensim_cli::report::sha256_hex;
use gensim_cli::{run_experiment, Experiment, ExperimentConfig, Objective, Overrides, Stage};
use serde_json::Value;

fn parse(text: &str) -> Result<ExperimentConfig, gensim_cli::CliError> {
    ExperimentConfig::from_json(text, &Overrides::default())
}

fn tiny_gauss(out: &Path) -> ExperimentConfig {
    let text = r#"{"experiment":"gauss","seed":5,"train":{"epochs":2},
        "gauss":{"n_triplets":300,"n_eval_points":100,"n_pairs":400,"n_bins":10},
        "eval":{"separation_triplets":50}}"#;
    let ov = Overrides { out_dir: Some(out.to_path_buf()), ..Overrides::default() };
    ExperimentConfig::from_json(text, &ov).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn minimal_gauss_config_gets_defaults() {
    let cfg = parse(r#"{"experiment": "gauss", "seed": 1}"#).unwrap();
    assert_eq!(cfg.train.learning_rate, 1e-5);
    assert_eq!(cfg.train.batch_size, 256);
    assert_eq!(cfg.train.epochs, 300);
    assert_eq!(cfg.train.loss, LossKind::SoftmaxTriplet);
    assert_eq!(cfg.net, NetSpec::mlp(&[2, 32, 1]));
    let g = cfg.gauss.unwrap();
    assert_eq!(g.n_triplets, 10_000);
    assert_eq!(g.means, vec![vec![5.0, 5.0], vec![1.0, 1.0]]);
    assert_eq!(cfg.objectives, vec![Objective::Gensim]);
}

#[test]
fn draw_defaults() {
    let cfg = parse(r#"{"experiment": "draw", "seed": 1}"#).unwrap();
    assert_eq!(cfg.train.batch_size, 128);
    assert_eq!(cfg.train.learning_rate, 1e-3);
    let d = cfg.draw.as_ref().unwrap();
    assert_eq!(d.raster_size, 128);
    assert_eq!(cfg.net.input_dim(), 128 * 128);
    assert_eq!(cfg.objectives, vec![Objective::Gensim, Objective::Simclr]);
}

#[test]
fn quad_defaults_and_vector_input() {
    let cfg = parse(r#"{"experiment": "quad", "seed": 1}"#).unwrap();
    assert_eq!(cfg.net, NetSpec::conv(64, 4, 8, 32));
    assert_eq!(cfg.train.epochs, 13);
    assert_eq!(cfg.objectives.len(), 3);
    let ov = Overrides { vector_input: true, ..Overrides::default() };
    let v = ExperimentConfig::from_json(r#"{"experiment": "quad", "seed": 1}"#, &ov).unwrap();
    assert_eq!(v.net.input_dim(), 8);
    assert!(!v.objectives.contains(&Objective::Simclr));
}

#[test]
fn unknown_key_is_rejected_with_its_name() {
    let err = parse(r#"{"experiment": "gauss", "seed": 1, "train": {"learningrate": 0.1}}"#).unwrap_err();
    assert!(err.to_string().contains("learningrate"), "{err}");
    assert_eq!(err.exit_code(), 2);
    let err = parse(r#"{"experiment": "gauss", "seed": 1, "colour": 3}"#).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
}

#[test]
fn invalid_settings_are_config_errors() {
    for text in [
        r#"{"experiment": "gauss"}"#,
        r#"{"experiment": "gauss", "seed": 1, "train": {"learning_rate": -1}}"#,
        r#"{"experiment": "gauss", "seed": 1, "draw": {}}"#,
        r#"{"experiment": "quad", "seed": 1, "objective": ["gensim", "supervised", "gensim"]}"#,
        r#"{"experiment": "draw", "seed": 1, "train": {"loss": {"kind": "gen_sim_regression"}}}"#,
        r#"{"experiment": "gauss", "seed": 1,"#,
    ] {
        let err = parse(text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn seed_override_changes_hash() {
    let text = r#"{"experiment": "gauss", "seed": 1}"#;
    let a = parse(text).unwrap();
    let b = ExperimentConfig::from_json(text, &Overrides { seed: Some(2), ..Overrides::default() }).unwrap();
    assert_eq!(b.seed, 2);
    assert_eq!(b.train.seed, 2);
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash(), parse(text).unwrap().hash());
    assert_eq!(a.experiment, Experiment::Gauss);
}

#[test]
fn run_writes_reports_whose_hash_matches_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_gauss(dir.path());
    let summary = run_experiment(&cfg, Stage::Run).unwrap();
    let manifest = read_json(&dir.path().join("manifest.json"));
    let metrics = read_json(&dir.path().join("metrics.json"));
    let config_bytes = std::fs::read(dir.path().join("config.json")).unwrap();
    assert_eq!(manifest["config_hash"], Value::from(summary.config_hash.clone()));
    assert_eq!(metrics["config_hash"], manifest["config_hash"]);
    assert_eq!(sha256_hex(&config_bytes), summary.config_hash);
    assert_eq!(manifest["partial"], Value::Bool(false));
    assert_eq!(manifest["stages_completed"], serde_json::json!(["gen-data", "train", "eval"]));
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(a.as_str().unwrap()).exists(), "{a}");
    }
    let log = std::fs::read_to_string(dir.path().join("logs/epochs_gensim.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,mean_loss,wall_ms"));
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn eval_after_train_matches_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&tiny_gauss(a.path()), Stage::Run).unwrap();
    run_experiment(&tiny_gauss(b.path()), Stage::Train).unwrap();
    assert!(!b.path().join("metrics.json").exists());
    run_experiment(&tiny_gauss(b.path()), Stage::Eval).unwrap();
    let read = |d: &Path| std::fs::read(d.join("metrics.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn eval_without_checkpoints_fails_and_marks_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&tiny_gauss(dir.path()), Stage::Eval).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["partial"], Value::Bool(true));
    assert_eq!(manifest["failed_stage"], Value::from("eval"));
}

#[test]
fn dataset_cache_is_reused() {
    let cache = tempfile::tempdir().unwrap();
    let cfg = tiny_gauss(Path::new("unused"));
    let (first, hit1) = gensim_cli::data::load_or_generate(&cfg, Some(cache.path())).unwrap();
    let (second, hit2) = gensim_cli::data::load_or_generate(&cfg, Some(cache.path())).unwrap();
    assert!(!hit1);
    assert!(hit2);
    assert_eq!(first, second);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_gensim");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "gauss", "seed": 1, "train": {"learningrate": 1}}"#).unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["run", "--config", bad.to_str().unwrap()]), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(status(&["run", "--config", missing.to_str().unwrap()]), Some(4));
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"experiment": "gauss", "seed": 1}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(status(&["probe", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]), Some(2));
    assert_eq!(status(&["gradcheck", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]), Some(0));
    let report = read_json(&out.join("gradcheck.json"));
    assert_eq!(report["pass"], Value::Bool(true));
    assert_eq!(report["checks"].as_array().unwrap().len(), 12);
}
