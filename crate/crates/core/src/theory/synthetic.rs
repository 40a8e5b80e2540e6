use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pseudo_label::KeywordSet;
use crate::text::{Corpus, Document, EmbeddingTable, Label, TokenizerConfig};

/// Class-conditional unigram generator for labeled toy corpora.
///
/// Each token is a planted keyword with a class-dependent rate, otherwise a
/// topic word with probability `topic_rate` (drawn from the document's own
/// class list with probability `topic_purity`), otherwise a common word.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub n_docs: usize,
    pub pi: f64,
    pub n_keywords: usize,
    pub n_topic_words: usize,
    pub n_common_words: usize,
    /// Document lengths are uniform on `[min_len, max_len]`.
    pub min_len: usize,
    pub max_len: usize,
    pub keyword_rate_pos: f64,
    pub keyword_rate_neg: f64,
    pub topic_rate: f64,
    pub topic_purity: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_docs: 2000,
            pi: 0.5,
            n_keywords: 5,
            n_topic_words: 60,
            n_common_words: 300,
            min_len: 15,
            max_len: 35,
            keyword_rate_pos: 0.05,
            keyword_rate_neg: 0.005,
            topic_rate: 0.15,
            topic_purity: 0.8,
            seed: 0,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_keywords == 0 || self.n_topic_words == 0 || self.n_common_words == 0 {
            return Err(Error::invalid("word list sizes must be positive"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid(
                "document lengths must satisfy 1 <= min_len <= max_len",
            ));
        }
        if !(0.0..=1.0).contains(&self.pi) || !(0.0..=1.0).contains(&self.topic_purity) {
            return Err(Error::invalid("pi and topic_purity must lie in [0, 1]"));
        }
        if self.keyword_rate_pos <= self.keyword_rate_neg {
            return Err(Error::invalid(
                "keyword rate for positives must exceed the rate for negatives",
            ));
        }
        for rate in [self.keyword_rate_pos, self.keyword_rate_neg] {
            if rate < 0.0 || rate + self.topic_rate > 1.0 {
                return Err(Error::invalid(
                    "keyword and topic rates must sum to at most 1",
                ));
            }
        }
        Ok(())
    }

    pub fn keyword(i: usize) -> String {
        format!("kw{i}")
    }

    pub fn topic_word(label: Label, i: usize) -> String {
        match label {
            Label::Pos => format!("pos{i}"),
            Label::Neg => format!("neg{i}"),
        }
    }

    pub fn common_word(i: usize) -> String {
        format!("w{i}")
    }

    fn sample_token<R: Rng>(&self, rng: &mut R, label: Label) -> String {
        let keyword_rate = match label {
            Label::Pos => self.keyword_rate_pos,
            Label::Neg => self.keyword_rate_neg,
        };
        let u: f64 = rng.random();
        if u < keyword_rate {
            Self::keyword(rng.random_range(0..self.n_keywords))
        } else if u < keyword_rate + self.topic_rate {
            let own = rng.random_bool(self.topic_purity);
            let class = if own { label } else { label.flipped() };
            Self::topic_word(class, rng.random_range(0..self.n_topic_words))
        } else {
            Self::common_word(rng.random_range(0..self.n_common_words))
        }
    }
}

/// Samples a labeled corpus and returns it with the planted keywords
/// (`α = 3`, `γ = 5`, `φ = 90`).
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Result<(Corpus, KeywordSet)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cfg = TokenizerConfig::default();
    let docs = (0..spec.n_docs)
        .map(|i| {
            let label = if rng.random_bool(spec.pi) {
                Label::Pos
            } else {
                Label::Neg
            };
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let words: Vec<String> = (0..len)
                .map(|_| spec.sample_token(&mut rng, label))
                .collect();
            Document::new(format!("doc{i}"), words.join(" "), Some(label), &cfg)
        })
        .collect();
    let keywords = KeywordSet::new(
        (0..spec.n_keywords)
            .map(SyntheticCorpusSpec::keyword)
            .collect(),
        3,
        5,
        90.0,
    )?;
    Ok((Corpus::new(docs), keywords))
}

/// Embeddings for every word the generator can emit. Keywords and positive
/// topic words lean along a shared random direction, negative topic words
/// lean the opposite way, common words are isotropic noise.
pub fn synthetic_embeddings(
    spec: &SyntheticCorpusSpec,
    dimension: usize,
    signal: f64,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut direction: Vec<f64> = (0..dimension).map(|_| normal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut table = EmbeddingTable::new(dimension)?;
    let mut add = |word: String, lean: f64, rng: &mut ChaCha8Rng| -> Result<()> {
        let v: Vec<f64> = direction
            .iter()
            .map(|d| lean * signal * d + normal.sample(rng) / (dimension as f64).sqrt())
            .collect();
        table.insert(&word, &v).map(|_| ())
    };
    for i in 0..spec.n_keywords {
        add(SyntheticCorpusSpec::keyword(i), 1.0, &mut rng)?;
    }
    for i in 0..spec.n_topic_words {
        add(
            SyntheticCorpusSpec::topic_word(Label::Pos, i),
            1.0,
            &mut rng,
        )?;
        add(
            SyntheticCorpusSpec::topic_word(Label::Neg, i),
            -1.0,
            &mut rng,
        )?;
    }
    for i in 0..spec.n_common_words {
        add(SyntheticCorpusSpec::common_word(i), 0.0, &mut rng)?;
    }
    Ok(table)
}
