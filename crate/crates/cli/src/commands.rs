//! The pipeline stages as functions; `main` only parses arguments and
//! prints.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use keyrank_core::metrics::{
    accuracy, calibrate_threshold, classify, macro_f1, percent, MetricsReport, PriorSource,
    Threshold,
};
use keyrank_core::pseudo_label::{
    estimate_contamination, load_keywords, pseudo_label, read_split, render_split,
    ContaminationEstimate, KeywordSet, PseudoSplit,
};
use keyrank_core::ranker::{train, RankerModel, TrainConfig, TrainReport};
use keyrank_core::text::{
    load_corpus, load_embeddings, Corpus, CorpusFormat, EmbeddingTable, FeatureKind, FeatureSpace,
};
use keyrank_core::theory::{
    gap_sweep, run_identity_suite, GapSweep, MixtureSpec, SuiteConfig, SuiteReport,
};
use keyrank_core::{sub_seed, Error};

use crate::config::{require, PipelineConfig};
use crate::error::{CliError, StageExt};

pub const SPLIT_FILE: &str = "split.txt";
pub const PSEUDO_LABEL_SUMMARY: &str = "pseudo_label.json";
pub const MODEL_FILE: &str = "model.txt";
pub const RISK_TRACE_FILE: &str = "risk_trace.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const METRICS_TEXT_FILE: &str = "metrics.txt";
pub const THRESHOLD_GRID_FILE: &str = "threshold_grid.csv";
pub const GAP_SWEEP_FILE: &str = "gap_sweep.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// Files that must be byte-identical across repeated seeded runs.
pub const PRIMARY_OUTPUTS: [&str; 8] = [
    SPLIT_FILE,
    PSEUDO_LABEL_SUMMARY,
    MODEL_FILE,
    RISK_TRACE_FILE,
    TRAIN_REPORT_FILE,
    METRICS_FILE,
    METRICS_TEXT_FILE,
    THRESHOLD_GRID_FILE,
];

fn write_output(cfg: &PipelineConfig, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |path: &Path, source| CliError::Stage {
        stage: "output",
        source: Error::Io {
            path: path.to_path_buf(),
            source,
        },
    };
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(name);
    fs::write(&path, contents).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

fn load_training_corpus(cfg: &PipelineConfig, stage: &'static str) -> Result<Corpus, CliError> {
    load_corpus(require(&cfg.corpus, "corpus")?, cfg.corpus_format).stage(stage)
}

fn load_table(cfg: &PipelineConfig, stage: &'static str) -> Result<EmbeddingTable, CliError> {
    load_embeddings(require(&cfg.embeddings, "embeddings")?).stage(stage)
}

/// Embeddings are only read when the features need them.
fn feature_table(
    cfg: &PipelineConfig,
    stage: &'static str,
) -> Result<Option<EmbeddingTable>, CliError> {
    match cfg.feature_kind {
        FeatureKind::MeanEmbedding => load_table(cfg, stage).map(Some),
        _ => Ok(None),
    }
}

fn split_path(cfg: &PipelineConfig, split: Option<&Path>) -> PathBuf {
    split.map_or_else(|| cfg.output_dir.join(SPLIT_FILE), Path::to_path_buf)
}

fn model_path(cfg: &PipelineConfig, model: Option<&Path>) -> PathBuf {
    model.map_or_else(|| cfg.output_dir.join(MODEL_FILE), Path::to_path_buf)
}

#[derive(Debug, Clone)]
pub struct PseudoLabelOutcome {
    pub split: PseudoSplit,
    pub contamination: Option<ContaminationEstimate>,
    pub n_docs: usize,
}

impl PseudoLabelOutcome {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "documents: {}\nCP: {}\nCN: {}\nexpanded keywords: {}\n",
            self.n_docs,
            self.split.cp_indices.len(),
            self.split.cn_indices.len(),
            self.split.expanded_keywords.len()
        );
        if let Some(c) = &self.contamination {
            let _ = writeln!(
                s,
                "theta: {:.4}\ntheta_prime: {:.4}",
                c.theta, c.theta_prime
            );
        }
        for w in &self.split.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Expands the keywords, splits the corpus into CP and CN and writes the
/// split file and a JSON summary.
pub fn cmd_pseudo_label(cfg: &PipelineConfig) -> Result<PseudoLabelOutcome, CliError> {
    const STAGE: &str = "pseudo-label";
    let corpus = load_training_corpus(cfg, STAGE)?;
    let keywords = load_keywords(require(&cfg.keywords, "keywords")?).stage(STAGE)?;
    let table = load_table(cfg, STAGE)?;
    let ks = KeywordSet::new(keywords, cfg.alpha, cfg.gamma, cfg.phi).stage(STAGE)?;
    let split = pseudo_label(&corpus, &ks, &table).stage(STAGE)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    if split.cp_indices.is_empty() {
        return Err(Error::Empty("corrupted-positive set")).stage(STAGE);
    }
    if split.cn_indices.is_empty() {
        return Err(Error::Empty("corrupted-negative set")).stage(STAGE);
    }
    let contamination = if corpus.is_labeled() {
        Some(estimate_contamination(&split, &corpus).stage(STAGE)?)
    } else {
        None
    };
    if let Some(c) = &contamination {
        if c.theta <= c.theta_prime {
            log::warn!(
                "theta {} does not exceed theta_prime {}; the split carries no ranking signal",
                c.theta,
                c.theta_prime
            );
        }
    }

    write_output(cfg, SPLIT_FILE, &render_split(&split, &corpus))?;
    let summary = json!({
        "n_docs": corpus.doc_count(),
        "n_cp": split.cp_indices.len(),
        "n_cn": split.cn_indices.len(),
        "cp_fraction": split.cp_fraction(),
        "alpha": split.alpha,
        "gamma": split.gamma,
        "phi": split.phi,
        "n_expanded_keywords": split.expanded_keywords.len(),
        "warnings": split.warnings,
        "theta": contamination.map(|c| c.theta),
        "theta_prime": contamination.map(|c| c.theta_prime),
    });
    write_output(cfg, PSEUDO_LABEL_SUMMARY, &json_text(&summary))?;
    Ok(PseudoLabelOutcome {
        n_docs: corpus.doc_count(),
        split,
        contamination,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RankerModel,
    pub report: TrainReport,
    pub steps_per_epoch: usize,
}

impl TrainOutcome {
    pub fn summary(&self) -> String {
        format!(
            "initial risk: {}\nfinal risk: {}\nepochs: {}\nsteps per epoch: {}\n",
            self.report.initial_risk,
            self.report
                .risk_trace
                .last()
                .copied()
                .unwrap_or(self.report.initial_risk),
            self.report.risk_trace.len(),
            self.steps_per_epoch
        )
    }
}

/// The training configuration actually used: the pipeline's
/// hyperparameters with the seed replaced by the `train` sub-seed.
pub fn effective_train_config(cfg: &PipelineConfig) -> TrainConfig {
    TrainConfig {
        seed: sub_seed(cfg.seed, "train"),
        ..cfg.train.clone()
    }
}

/// Minimizes the corrupted AUC risk between the CP and CN documents of the
/// split and writes the model, the risk trace and a JSON report.
pub fn cmd_train(cfg: &PipelineConfig, split: Option<&Path>) -> Result<TrainOutcome, CliError> {
    const STAGE: &str = "train";
    let corpus = load_training_corpus(cfg, STAGE)?;
    let split = read_split(&split_path(cfg, split), &corpus).stage(STAGE)?;
    if split.cp_indices.is_empty() {
        return Err(Error::Empty("corrupted-positive set")).stage(STAGE);
    }
    if split.cn_indices.is_empty() {
        return Err(Error::Empty("corrupted-negative set")).stage(STAGE);
    }
    let table = feature_table(cfg, STAGE)?;
    let space = FeatureSpace::fit(&corpus, cfg.feature_kind, table.as_ref()).stage(STAGE)?;
    let features = space.transform(&corpus);
    let cp = features.select(&split.cp_indices);
    let cn = features.select(&split.cn_indices);

    let train_cfg = effective_train_config(cfg);
    let init = RankerModel::init(
        cfg.architecture,
        space.dimension(),
        sub_seed(train_cfg.seed, "init"),
    )
    .stage(STAGE)?;
    let (model, report) = train(init, &cp, &cn, &train_cfg).stage(STAGE)?;
    log::info!("training took {:?}", report.wall_clock);
    let steps_per_epoch = train_cfg.steps_per_epoch(cp.rows(), cn.rows());

    write_output(cfg, MODEL_FILE, &model.render())?;
    write_output(cfg, RISK_TRACE_FILE, &report.risk_trace_csv())?;
    let summary = json!({
        "loss": train_cfg.loss.kind().name(),
        "architecture": model.architecture().to_string(),
        "input_dim": model.input_dim(),
        "feature_kind": cfg.feature_kind.to_string(),
        "n_cp": cp.rows(),
        "n_cn": cn.rows(),
        "epochs": train_cfg.epochs,
        "steps_per_epoch": steps_per_epoch,
        "learning_rate": train_cfg.learning_rate,
        "weight_decay": train_cfg.weight_decay,
        "batch_pairs": train_cfg.batch_pairs,
        "seed": train_cfg.seed,
        "initial_risk": report.initial_risk,
        "final_risk": report.risk_trace.last(),
    });
    write_output(cfg, TRAIN_REPORT_FILE, &json_text(&summary))?;
    Ok(TrainOutcome {
        model,
        report,
        steps_per_epoch,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub pi_hat: f64,
    pub beta: f64,
    pub achieved_fraction: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub metrics: MetricsReport,
    pub threshold: Threshold,
    pub grid: Vec<GridRow>,
}

impl EvaluateOutcome {
    /// Aligned two-column table of percentages.
    pub fn table(&self) -> String {
        let rows = [
            ("AUC".to_string(), self.metrics.auc),
            ("Macro-F1".to_string(), self.metrics.macro_f1),
            ("ACC".to_string(), self.metrics.accuracy),
            (format!("Prec@{}", self.metrics.k), self.metrics.prec_at_k),
        ];
        let mut s = format!("{:<12}{:>8}\n", "metric", "value");
        for (name, v) in rows {
            let _ = writeln!(s, "{name:<12}{:>8.1}", percent(v));
        }
        let _ = writeln!(
            s,
            "{:<12}{:>8}\n{:<12}{:>8}",
            "pi_hat",
            self.threshold.pi_hat,
            "source",
            self.threshold.source.name()
        );
        s
    }

    pub fn grid_csv(&self) -> String {
        let mut s = String::from("pi_hat,beta,achieved_fraction,macro_f1,accuracy\n");
        for r in &self.grid {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.pi_hat, r.beta, r.achieved_fraction, r.macro_f1, r.accuracy
            );
        }
        s
    }
}

fn resolve_prior(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    split: Option<&PseudoSplit>,
) -> Result<f64, CliError> {
    match cfg.prior_source {
        PriorSource::User => cfg
            .prior
            .ok_or_else(|| CliError::Config("prior_source = user needs a prior value".into())),
        PriorSource::TruePrior => match cfg.prior {
            Some(p) => Ok(p),
            None if corpus.is_labeled() => {
                let labels = corpus.gold_labels().stage("evaluate")?;
                Ok(labels.iter().filter(|l| l.is_pos()).count() as f64 / labels.len() as f64)
            }
            None => Err(CliError::Config(
                "prior_source = true_prior needs a prior value or a labeled training corpus".into(),
            )),
        },
        PriorSource::HeuristicSplitRatio => split
            .map(PseudoSplit::cp_fraction)
            .ok_or_else(|| CliError::Config("heuristic_split_ratio needs a split file".into())),
    }
}

/// Scores the labeled test corpus, calibrates the threshold on the
/// training-corpus scores and writes the metrics and the threshold grid.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    model: Option<&Path>,
    split: Option<&Path>,
) -> Result<EvaluateOutcome, CliError> {
    const STAGE: &str = "evaluate";
    let corpus = load_training_corpus(cfg, STAGE)?;
    let test_path = require(&cfg.test_corpus, "test_corpus")?;
    let test = load_corpus(test_path, CorpusFormat::Labeled).map_err(|e| match e {
        Error::UnknownLabel { .. } | Error::MalformedLine { .. } => CliError::Data {
            stage: STAGE,
            message: format!("test corpus {} must be labeled: {e}", test_path.display()),
        },
        other => CliError::Stage {
            stage: STAGE,
            source: other,
        },
    })?;
    let gold = test.gold_labels().stage(STAGE)?;
    let model = RankerModel::load(&model_path(cfg, model)).stage(STAGE)?;
    let split = if cfg.prior_source == PriorSource::HeuristicSplitRatio {
        Some(read_split(&split_path(cfg, split), &corpus).stage(STAGE)?)
    } else {
        None
    };

    let table = feature_table(cfg, STAGE)?;
    let space = FeatureSpace::fit(&corpus, cfg.feature_kind, table.as_ref()).stage(STAGE)?;
    let train_scores = model.scores(&space.transform(&corpus)).stage(STAGE)?;
    let test_scores = model.scores(&space.transform(&test)).stage(STAGE)?;

    let pi_hat = resolve_prior(cfg, &corpus, split.as_ref())?;
    let threshold = calibrate_threshold(&train_scores, pi_hat, cfg.prior_source).stage(STAGE)?;
    let metrics =
        MetricsReport::compute(&test_scores, &gold, threshold.beta, cfg.eval_k).stage(STAGE)?;
    let grid = cfg
        .threshold_grid
        .iter()
        .map(|&p| {
            let t = calibrate_threshold(&train_scores, p, PriorSource::User)?;
            let pred = classify(&test_scores, t.beta);
            Ok(GridRow {
                pi_hat: p,
                beta: t.beta,
                achieved_fraction: t.achieved_fraction,
                macro_f1: macro_f1(&pred, &gold)?,
                accuracy: accuracy(&pred, &gold)?,
            })
        })
        .collect::<keyrank_core::Result<Vec<_>>>()
        .stage(STAGE)?;

    let outcome = EvaluateOutcome {
        metrics,
        threshold,
        grid,
    };
    let m = &outcome.metrics;
    let t = &outcome.threshold;
    let report = json!({
        "auc": m.auc,
        "macro_f1": m.macro_f1,
        "accuracy": m.accuracy,
        "prec_at_k": m.prec_at_k,
        "k": m.k,
        "n_eval": m.n_eval,
        "auc_pct": percent(m.auc),
        "macro_f1_pct": percent(m.macro_f1),
        "accuracy_pct": percent(m.accuracy),
        "prec_at_k_pct": percent(m.prec_at_k),
        "threshold": {
            "beta": t.beta,
            "pi_hat": t.pi_hat,
            "source": t.source.name(),
            "achieved_fraction": t.achieved_fraction,
            "warning": t.warning,
        },
    });
    write_output(cfg, METRICS_FILE, &json_text(&report))?;
    write_output(cfg, METRICS_TEXT_FILE, &outcome.table())?;
    write_output(cfg, THRESHOLD_GRID_FILE, &outcome.grid_csv())?;
    Ok(outcome)
}

/// pseudo-label, train and evaluate chained through the output directory.
pub fn cmd_run_all(
    cfg: &PipelineConfig,
) -> Result<(PseudoLabelOutcome, TrainOutcome, EvaluateOutcome), CliError> {
    write_output(cfg, CONFIG_FILE, &cfg.render())?;
    let p = cmd_pseudo_label(cfg)?;
    let t = cmd_train(cfg, None)?;
    let e = cmd_evaluate(cfg, None, None)?;
    Ok((p, t, e))
}

/// Runs the exact-risk identity suite and writes one line per check (plus
/// any warnings) to `out`. Fails with [`CliError::CheckFailed`] if any
/// check fails.
pub fn cmd_theory_check(
    suite: &SuiteConfig,
    out: &mut impl Write,
) -> Result<SuiteReport, CliError> {
    let report = run_identity_suite(suite).stage("theory-check")?;
    let io = |e| CliError::Data {
        stage: "theory-check",
        message: format!("cannot write report: {e}"),
    };
    for w in &report.warnings {
        writeln!(out, "WARN {w}").map_err(io)?;
    }
    for c in &report.checks {
        writeln!(out, "{}", c.line()).map_err(io)?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArgs {
    pub mixture: MixtureSpec,
    pub gaps: Vec<(f64, f64)>,
    pub n_seeds: usize,
}

pub const DEFAULT_GAPS: [(f64, f64); 4] = [(0.9, 0.1), (0.8, 0.2), (0.7, 0.3), (0.6, 0.4)];

/// Parses `0.9:0.1,0.8:0.2`.
pub fn parse_gaps(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .map(|pair| {
            let bad = || CliError::Usage(format!("gap {pair:?} is not theta:theta_prime"));
            let (a, b) = pair.trim().split_once(':').ok_or_else(bad)?;
            Ok((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Trains on label-corrupted mixtures for every gap and seed and writes
/// the per-gap mean clean AUC as CSV.
pub fn cmd_gap_sweep(cfg: &PipelineConfig, args: &SweepArgs) -> Result<GapSweep, CliError> {
    let seeds: Vec<u64> = (0..args.n_seeds as u64).map(|i| cfg.seed + i).collect();
    let sweep = gap_sweep(
        &args.mixture,
        &args.gaps,
        &cfg.train,
        cfg.architecture,
        &seeds,
    )
    .stage("gap-sweep")?;
    write_output(cfg, GAP_SWEEP_FILE, &sweep.to_csv())?;
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_lists() {
        assert_eq!(
            parse_gaps("0.9:0.1, 0.7:0.3").unwrap(),
            [(0.9, 0.1), (0.7, 0.3)]
        );
        assert!(parse_gaps("0.9-0.1").is_err());
        assert!(parse_gaps("a:0.1").is_err());
    }

    #[test]
    fn train_seed_is_a_sub_seed() {
        let cfg = PipelineConfig {
            seed: 5,
            ..Default::default()
        };
        assert_eq!(effective_train_config(&cfg).seed, sub_seed(5, "train"));
    }

    #[test]
    fn theory_check_writes_lines() {
        let mut out = Vec::new();
        let suite = SuiteConfig {
            instances: 5,
            ..Default::default()
        };
        cmd_theory_check(&suite, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().all(|l| l.starts_with("PASS ")));

        let mut out = Vec::new();
        let err = cmd_theory_check(&SuiteConfig { tol: 0.0, ..suite }, &mut out).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
