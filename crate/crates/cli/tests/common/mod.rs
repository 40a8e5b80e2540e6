//! Synthetic workspaces on disk for the command tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use keyrank::PipelineConfig;
use keyrank_core::theory::{generate_synthetic_corpus, synthetic_embeddings, SyntheticCorpusSpec};

pub const EMBEDDING_DIM: usize = 16;
pub const EMBEDDING_SIGNAL: f64 = 1.0;
/// Offset between the training and test corpus seeds.
pub const TEST_SEED_OFFSET: u64 = 1_000_000;

pub struct Workspace {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub config: PipelineConfig,
}

/// Writes a labeled training corpus, a labeled test corpus, the planted
/// keywords, embeddings and a config file into `dir`.
pub fn write_workspace(
    dir: &Path,
    spec: &SyntheticCorpusSpec,
    extra: &[(&str, &str)],
) -> Workspace {
    fs::create_dir_all(dir).unwrap();
    let (train, keywords) = generate_synthetic_corpus(spec).unwrap();
    let test_spec = SyntheticCorpusSpec {
        seed: spec.seed + TEST_SEED_OFFSET,
        ..spec.clone()
    };
    let (test, _) = generate_synthetic_corpus(&test_spec).unwrap();
    let table = synthetic_embeddings(spec, EMBEDDING_DIM, EMBEDDING_SIGNAL, spec.seed).unwrap();

    let corpus = dir.join("train.txt");
    let test_corpus = dir.join("test.txt");
    let kw = dir.join("keywords.txt");
    let emb = dir.join("embeddings.txt");
    train.write_labeled(&corpus).unwrap();
    test.write_labeled(&test_corpus).unwrap();
    fs::write(&kw, keywords.keywords.join("\n") + "\n").unwrap();
    table.write(&emb).unwrap();

    let mut text = format!(
        "corpus = {}\ncorpus_format = labeled\ntest_corpus = {}\nkeywords = {}\nembeddings = {}\n\
         output_dir = {}\nprior_source = true_prior\nprior = {}\nseed = {}\n",
        corpus.display(),
        test_corpus.display(),
        kw.display(),
        emb.display(),
        dir.join("out").display(),
        spec.pi,
        spec.seed,
    );
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let config_path = dir.join("keyrank.conf");
    fs::write(&config_path, &text).unwrap();
    let config = PipelineConfig::load(Some(&config_path), &[]).unwrap();
    Workspace {
        dir: dir.to_path_buf(),
        config_path,
        config,
    }
}

pub fn small_spec(seed: u64) -> SyntheticCorpusSpec {
    SyntheticCorpusSpec {
        n_docs: 300,
        seed,
        ..Default::default()
    }
}
