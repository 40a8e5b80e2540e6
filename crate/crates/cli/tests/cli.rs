mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use keyrank::commands::{
    cmd_evaluate, cmd_pseudo_label, cmd_run_all, cmd_train, GAP_SWEEP_FILE, PRIMARY_OUTPUTS,
};
use keyrank::PipelineConfig;
use keyrank_core::theory::SyntheticCorpusSpec;

use common::{small_spec, write_workspace};

fn keyrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keyrank"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("KEYRANK_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with(cfg: &PipelineConfig, overrides: &[&str]) -> PipelineConfig {
    let mut c = cfg.clone();
    for o in overrides {
        let (k, v) = o.split_once('=').unwrap();
        c.set(k, v).unwrap();
    }
    c.validate().unwrap();
    c
}

#[test]
fn pseudo_label_reports_contamination() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(1), &[]);
    let out = cmd_pseudo_label(&ws.config).unwrap();
    let c = out.contamination.unwrap();
    assert!(c.theta > c.theta_prime, "{c:?}");
    assert_eq!(out.split.cp_indices.len() + out.split.cn_indices.len(), 300);
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(ws.config.output_dir.join("pseudo_label.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["n_docs"], 300);
    assert!(summary["theta"].as_f64().unwrap() > summary["theta_prime"].as_f64().unwrap());
}

#[test]
fn run_all_equals_staged_commands() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(2), &[("epochs", "3")]);
    let all = with(
        &ws.config,
        &[&format!("output_dir={}", dir.path().join("all").display())],
    );
    let staged = with(
        &ws.config,
        &[&format!(
            "output_dir={}",
            dir.path().join("staged").display()
        )],
    );
    cmd_run_all(&all).unwrap();
    cmd_pseudo_label(&staged).unwrap();
    cmd_train(&staged, None).unwrap();
    cmd_evaluate(&staged, None, None).unwrap();
    for name in PRIMARY_OUTPUTS {
        let a = fs::read(all.output_dir.join(name)).unwrap();
        let b = fs::read(staged.output_dir.join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn seed_changes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(3), &[("epochs", "2")]);
    cmd_pseudo_label(&ws.config).unwrap();
    let a = cmd_train(&ws.config, None).unwrap().model;
    let b = cmd_train(&with(&ws.config, &["seed=99"]), None)
        .unwrap()
        .model;
    assert_ne!(a, b);
}

#[test]
fn zero_phi_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(4), &[("phi", "0")]);
    let o = keyrank(&["pseudo-label", "--config", ws.config_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("empty corrupted-positive set"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_embeddings_are_tagged_with_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(5), &[]);
    let o = keyrank(&[
        "pseudo-label",
        "--config",
        ws.config_path.to_str().unwrap(),
        "--set",
        "embeddings=/nonexistent/vectors.txt",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("[pseudo-label]") && err.contains("/nonexistent/vectors.txt"),
        "{err}"
    );
}

#[test]
fn config_errors_exit_with_one() {
    let o = keyrank(&["train", "--set", "colour=red"]);
    assert_eq!(o.status.code(), Some(1));
    let o = keyrank(&["train", "--set", "loss=zero_one"]);
    assert_eq!(o.status.code(), Some(1));
    let o = keyrank(&["train"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = keyrank(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(keyrank(&["--help"]).status.code(), Some(0));
}

#[test]
fn unlabeled_test_corpus_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(6), &[("epochs", "1")]);
    cmd_pseudo_label(&ws.config).unwrap();
    cmd_train(&ws.config, None).unwrap();
    let unlabeled = dir.path().join("unlabeled.txt");
    fs::write(&unlabeled, "a plain sentence\nanother one\n").unwrap();
    let cfg = with(
        &ws.config,
        &[&format!("test_corpus={}", unlabeled.display())],
    );
    let err = cmd_evaluate(&cfg, None, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("must be labeled"), "{err}");
}

fn write_tf_case(dir: &Path, params: &str) -> PipelineConfig {
    let corpus = dir.join("corpus.txt");
    fs::write(&corpus, "+1\tgood\n-1\tbad\n+1\tgood good\n-1\tbad\n").unwrap();
    let model = dir.join("model.txt");
    fs::write(&model, format!("ranker-v1 linear 2\n{params}")).unwrap();
    PipelineConfig::load(
        None,
        &[
            format!("corpus={}", corpus.display()),
            "corpus_format=labeled".into(),
            format!("test_corpus={}", corpus.display()),
            "feature_kind=tf".into(),
            "prior_source=user".into(),
            "prior=0.5".into(),
            "eval_k=2".into(),
            format!("output_dir={}", dir.join("out").display()),
        ],
    )
    .unwrap()
}

#[test]
fn perfect_scorer_scores_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    // Vocabulary order is first-seen: good, bad.
    let cfg = write_tf_case(dir.path(), "1\n-1\n0\n");
    let e = cmd_evaluate(&cfg, Some(&dir.path().join("model.txt")), None).unwrap();
    let m = e.metrics;
    assert_eq!(
        (m.auc, m.macro_f1, m.accuracy, m.prec_at_k),
        (1.0, 1.0, 1.0, 1.0)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(json["auc_pct"], 100.0);
    assert_eq!(json["threshold"]["source"], "user");
}

#[test]
fn constant_scorer_has_half_auc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tf_case(dir.path(), "0\n0\n0.5\n");
    let e = cmd_evaluate(&cfg, Some(&dir.path().join("model.txt")), None).unwrap();
    assert_eq!(e.metrics.auc, 0.5);
    assert!(e.threshold.warning.is_some());
}

#[test]
fn threshold_grid_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(8), &[("epochs", "2")]);
    let (_, _, e) = cmd_run_all(&ws.config).unwrap();
    assert_eq!(e.grid.len(), 10);
    let csv = fs::read_to_string(ws.config.output_dir.join("threshold_grid.csv")).unwrap();
    assert!(csv.starts_with("pi_hat,beta,achieved_fraction,macro_f1,accuracy\n0.05,"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn heuristic_prior_uses_the_split_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let ws = write_workspace(dir.path(), &small_spec(9), &[("epochs", "1")]);
    let cfg = with(&ws.config, &["prior_source=heuristic_split_ratio"]);
    let (p, _, e) = cmd_run_all(&cfg).unwrap();
    assert_eq!(e.threshold.pi_hat, p.split.cp_fraction());
}

#[test]
fn small_corpus_trains_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticCorpusSpec {
        n_docs: 200,
        seed: 10,
        ..Default::default()
    };
    let ws = write_workspace(dir.path(), &spec, &[("epochs", "50")]);
    cmd_pseudo_label(&ws.config).unwrap();
    let start = Instant::now();
    let t = cmd_train(&ws.config, None).unwrap();
    assert!(
        start.elapsed().as_secs_f64() < 10.0,
        "{:?}",
        start.elapsed()
    );
    assert_eq!(t.report.risk_trace.len(), 50);
    let trace = fs::read_to_string(ws.config.output_dir.join("risk_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 52);
}

#[test]
fn theory_check_exit_codes() {
    let o = keyrank(&["theory-check", "--instances", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text
        .lines()
        .all(|l| l.starts_with("PASS ") && l.contains(" residual=") && l.contains(" tol=")));

    let o = keyrank(&["theory-check", "--instances", "10", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("FAIL affine_identity_sigmoid"));

    let o = keyrank(&["theory-check", "--instances", "10", "--inject-equal-gap"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("WARN "));
}

#[test]
fn gap_sweep_writes_csv_to_the_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_keyrank"))
        .args([
            "gap-sweep",
            "--seeds",
            "2",
            "--set",
            "epochs=2",
            "--gaps",
            "0.9:0.1,0.6:0.4",
        ])
        .env("KEYRANK_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join(GAP_SWEEP_FILE)).unwrap();
    assert!(
        csv.starts_with("gap,theta,theta_prime,mean_auc,stderr,n_seeds\n0.8,0.9,0.1,"),
        "{csv}"
    );
    assert_eq!(csv.lines().count(), 3);

    let o = keyrank(&["gap-sweep", "--gaps", "0.5:0.5", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
