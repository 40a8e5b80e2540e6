//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use keyrank_core::losses::{LossKind, LossSpec};
use keyrank_core::metrics::PriorSource;
use keyrank_core::ranker::{Architecture, TrainConfig};
use keyrank_core::text::{CorpusFormat, FeatureKind};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KEYRANK_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "keyrank-out";

pub const DEFAULT_THRESHOLD_GRID: [f64; 10] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub corpus_format: CorpusFormat,
    pub keywords: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub feature_kind: FeatureKind,
    pub alpha: usize,
    pub gamma: usize,
    pub phi: f64,
    pub architecture: Architecture,
    /// Hidden width used when `architecture = mlp1`.
    pub hidden: usize,
    /// Training hyperparameters; `train.seed` is ignored in favour of a
    /// sub-seed of `seed`.
    pub train: TrainConfig,
    pub prior_source: PriorSource,
    pub prior: Option<f64>,
    pub eval_k: usize,
    pub threshold_grid: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            corpus_format: CorpusFormat::Unlabeled,
            keywords: None,
            embeddings: None,
            test_corpus: None,
            feature_kind: FeatureKind::MeanEmbedding,
            alpha: 3,
            gamma: 5,
            phi: 90.0,
            architecture: Architecture::Linear,
            hidden: 32,
            train: TrainConfig::default(),
            prior_source: PriorSource::TruePrior,
            prior: None,
            eval_k: 100,
            threshold_grid: DEFAULT_THRESHOLD_GRID.to_vec(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }
}

fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

impl PipelineConfig {
    /// Reads an optional config file, then applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies config text: `key = value` lines, `#` comments, blank lines.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let t = &mut self.train;
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "corpus_format" => self.corpus_format = parse_value(key, value)?,
            "keywords" => self.keywords = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "test_corpus" => self.test_corpus = Some(PathBuf::from(value)),
            "feature_kind" => self.feature_kind = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "phi" => self.phi = parse_value(key, value)?,
            "architecture" => {
                self.architecture = match value {
                    "linear" => Architecture::Linear,
                    "mlp1" => Architecture::Mlp1 {
                        hidden: self.hidden,
                    },
                    _ => return Err(CliError::Config(format!("unknown architecture {value:?}"))),
                }
            }
            "hidden" => {
                self.hidden = parse_value(key, value)?;
                if let Architecture::Mlp1 { hidden } = &mut self.architecture {
                    *hidden = self.hidden;
                }
            }
            "loss" => t.loss = LossSpec::new(parse_value::<LossKind>(key, value)?),
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "weight_decay" => t.weight_decay = parse_value(key, value)?,
            "batch_pairs" => t.batch_pairs = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "max_steps_per_epoch" => t.max_steps_per_epoch = parse_value(key, value)?,
            "adam_beta1" => t.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => t.adam_beta2 = parse_value(key, value)?,
            "adam_eps" => t.adam_eps = parse_value(key, value)?,
            "prior_source" => self.prior_source = parse_value(key, value)?,
            "prior" => self.prior = Some(parse_value(key, value)?),
            "eval_k" => self.eval_k = parse_value(key, value)?,
            "threshold_grid" => self.threshold_grid = parse_list(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(0.0..=100.0).contains(&self.phi) {
            return bad(format!("phi must lie in [0, 100], got {}", self.phi));
        }
        if self.alpha == 0 {
            return bad("alpha must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if let Some(p) = self.prior {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("prior must lie in [0, 1], got {p}"));
            }
        }
        if self.prior_source == PriorSource::User && self.prior.is_none() {
            return bad("prior_source = user needs a prior value".into());
        }
        if self.eval_k == 0 {
            return bad("eval_k must be at least 1".into());
        }
        if self.threshold_grid.is_empty()
            || self.threshold_grid.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return bad("threshold_grid needs values in [0, 1]".into());
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Resolved configuration in the same `key = value` format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        for (k, p) in [
            ("corpus", &self.corpus),
            ("keywords", &self.keywords),
            ("embeddings", &self.embeddings),
            ("test_corpus", &self.test_corpus),
        ] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("corpus_format", self.corpus_format.to_string());
        put("feature_kind", self.feature_kind.to_string());
        put("alpha", self.alpha.to_string());
        put("gamma", self.gamma.to_string());
        put("phi", self.phi.to_string());
        put("hidden", self.hidden.to_string());
        put("architecture", self.architecture.to_string());
        let t = &self.train;
        put("loss", t.loss.kind().to_string());
        put("learning_rate", t.learning_rate.to_string());
        put("weight_decay", t.weight_decay.to_string());
        put("batch_pairs", t.batch_pairs.to_string());
        put("epochs", t.epochs.to_string());
        put("max_steps_per_epoch", t.max_steps_per_epoch.to_string());
        put("adam_beta1", t.adam_beta1.to_string());
        put("adam_beta2", t.adam_beta2.to_string());
        put("adam_eps", t.adam_eps.to_string());
        put("prior_source", self.prior_source.to_string());
        if let Some(p) = self.prior {
            put("prior", p.to_string());
        }
        put("eval_k", self.eval_k.to_string());
        let grid: Vec<String> = self.threshold_grid.iter().map(f64::to_string).collect();
        put("threshold_grid", grid.join(","));
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        out
    }
}

pub(crate) fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("missing required key {key:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.alpha, c.gamma, c.phi), (3, 5, 90.0));
        assert_eq!(c.train.weight_decay, 0.003);
        assert_eq!(c.threshold_grid.len(), 10);
    }

    #[test]
    fn parses_text_and_comments() {
        let mut c = PipelineConfig::default();
        c.apply_text(
            "# comment\nloss = logistic\n\nphi=80 # trailing\narchitecture = mlp1\nhidden = 8\n",
        )
        .unwrap();
        assert_eq!(c.train.loss.kind(), LossKind::Logistic);
        assert_eq!(c.phi, 80.0);
        assert_eq!(c.architecture, Architecture::Mlp1 { hidden: 8 });
        let mut c = PipelineConfig::default();
        c.apply_text("hidden = 4\narchitecture = mlp1").unwrap();
        assert_eq!(c.architecture, Architecture::Mlp1 { hidden: 4 });
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.set("colour", "red"), Err(CliError::Config(_))));
        assert!(matches!(c.set("phi", "ninety"), Err(CliError::Config(_))));
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn validation() {
        let over = |s: &str| PipelineConfig::load(None, &[s.to_string()]);
        assert!(over("phi=120").is_err());
        assert!(over("loss=zero_one").is_err());
        assert!(over("prior_source=user").is_err());
        assert!(over("threshold_grid=0.2,1.5").is_err());
        assert!(over("threshold_grid=0.2, 0.4").is_ok());
    }

    #[test]
    fn render_round_trips() {
        let c = PipelineConfig::load(
            None,
            &[
                "corpus=a.txt".into(),
                "prior=0.31".into(),
                "architecture=mlp1".into(),
                "hidden=4".into(),
            ],
        )
        .unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&c.render()).unwrap();
        assert_eq!(back, c);
    }
}
