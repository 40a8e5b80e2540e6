//! Corpus ingestion, tokenization, vocabularies, document features and
//! word-embedding tables.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label. `Pos` is +1 and `Neg` is −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// Parses `+1`, `1` or `-1`.
    pub fn parse(token: &str) -> Option<Label> {
        match token.trim() {
            "+1" | "1" => Some(Label::Pos),
            "-1" => Some(Label::Neg),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "+1",
            Label::Neg => "-1",
        })
    }
}

/// What happens to characters that are neither alphanumeric nor whitespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PunctuationRule {
    /// Delete them, so `A-1` becomes the single token `a1`.
    #[default]
    Strip,
    /// Treat them as whitespace, so `A-1` becomes `a` and `1`.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub punctuation: PunctuationRule,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            punctuation: PunctuationRule::Strip,
        }
    }
}

pub fn tokenize(raw_text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut cleaned = String::with_capacity(raw_text.len());
    for c in raw_text.chars() {
        if c.is_alphanumeric() {
            if config.lowercase {
                cleaned.extend(c.to_lowercase());
            } else {
                cleaned.push(c);
            }
        } else if c.is_whitespace() || config.punctuation == PunctuationRule::Split {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub gold_label: Option<Label>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        raw_text: impl Into<String>,
        gold_label: Option<Label>,
        config: &TokenizerConfig,
    ) -> Self {
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text, config);
        Self {
            id: id.into(),
            raw_text,
            tokens,
            gold_label,
        }
    }
}

/// Token to index map with indices contiguous from 0 in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        let mut vocabulary = Vocabulary::default();
        for doc in &documents {
            for token in &doc.tokens {
                vocabulary.insert(token);
            }
        }
        Self {
            documents,
            vocabulary,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn doc_count(&self) -> usize {
        self.documents.len()
    }

    pub fn is_labeled(&self) -> bool {
        self.documents.iter().all(|d| d.gold_label.is_some())
    }

    /// Gold labels for every document, or an error naming the first
    /// unlabeled one.
    pub fn gold_labels(&self) -> Result<Vec<Label>> {
        self.documents
            .iter()
            .map(|d| {
                d.gold_label
                    .ok_or_else(|| Error::MissingGoldLabel(d.id.clone()))
            })
            .collect()
    }

    /// Writes the corpus in the `label<TAB>text` format.
    pub fn write_labeled(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for doc in &self.documents {
            let label = doc
                .gold_label
                .ok_or_else(|| Error::MissingGoldLabel(doc.id.clone()))?;
            out.push_str(&format!("{label}\t{}\n", doc.raw_text));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_unlabeled(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&doc.raw_text);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Labeled,
    Unlabeled,
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Labeled => "labeled",
            CorpusFormat::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(CorpusFormat::Labeled),
            "unlabeled" => Ok(CorpusFormat::Unlabeled),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, format, &TokenizerConfig::default())
}

/// Parses corpus text; document ids are `doc<index>` in file order.
pub fn parse_corpus(text: &str, format: CorpusFormat, config: &TokenizerConfig) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let id = format!("doc{}", documents.len());
        let doc = match format {
            CorpusFormat::Unlabeled => Document::new(id, line, None, config),
            CorpusFormat::Labeled => {
                let (label, body) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                    line: line_no,
                    message: "expected `label<TAB>text`".into(),
                })?;
                let label = Label::parse(label).ok_or_else(|| Error::UnknownLabel {
                    line: line_no,
                    token: label.to_owned(),
                })?;
                Document::new(id, body, Some(label), config)
            }
        };
        documents.push(doc);
    }
    Ok(Corpus::new(documents))
}

/// Word vectors of a fixed dimension, kept in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            dimension,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        })
    }

    /// Adds a word; returns `false` (and keeps the old vector) if the word
    /// is already present.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::invalid(format!(
                "vector for {word:?} has length {}, table dimension is {}",
                vector.len(),
                self.dimension
            )));
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_owned(), self.words.len());
        self.words.push(word.to_owned());
        self.vectors.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// `None` for absent words, which is distinct from a zero vector.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vector(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), self.vector(i)))
    }

    /// Writes the table in GloVe text format, in insertion order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (word, vector) in self.iter() {
            let mut line = word.to_owned();
            for v in vector {
                line.push(' ');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut buf = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let word = parts.next().unwrap_or_default();
        buf.clear();
        for part in parts {
            let v: f64 = part.parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                message: format!("non-numeric component {part:?}"),
            })?;
            buf.push(v);
        }
        let table = match &mut table {
            Some(t) => t,
            None => {
                if buf.is_empty() {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: "word has no vector components".into(),
                    });
                }
                table.insert(EmbeddingTable::new(buf.len())?)
            }
        };
        if buf.len() != table.dimension {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected: table.dimension,
                found: buf.len(),
            });
        }
        if !table.insert(word, &buf)? {
            warn!("duplicate embedding for {word:?} at line {line_no}; keeping the first");
        }
    }
    table.ok_or(Error::Empty("embedding file"))
}

/// Cosine similarity; 0 whenever either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// The `k` words most cosine-similar to `query`, excluding the query.
/// Ties are ordered lexicographically by word.
pub fn nearest_words(table: &EmbeddingTable, query: &str, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let q = table
        .get(query)
        .ok_or_else(|| Error::OutOfVocabulary(query.to_owned()))?;
    let mut scored: Vec<(&str, f64)> = table
        .iter()
        .filter(|(w, _)| *w != query)
        .map(|(w, v)| (w, cosine(q, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(w, s)| (w.to_owned(), s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Tf,
    Tfidf,
    MeanEmbedding,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tf" => Ok(FeatureKind::Tf),
            "tfidf" => Ok(FeatureKind::Tfidf),
            "mean_embedding" => Ok(FeatureKind::MeanEmbedding),
            other => Err(Error::invalid(format!("unknown feature kind {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Tf => "tf",
            FeatureKind::Tfidf => "tfidf",
            FeatureKind::MeanEmbedding => "mean_embedding",
        })
    }
}

/// Dense row-major matrix; row `i` belongs to document `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>], kind: FeatureKind) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::invalid("ragged feature rows"));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            values,
            kind: self.kind,
        }
    }
}

/// A fitted featurizer: vocabulary and idf weights from one corpus, usable
/// on others (tokens outside the fitted vocabulary are ignored).
#[derive(Debug, Clone)]
pub enum FeatureSpace<'a> {
    Tf {
        vocabulary: Vocabulary,
    },
    Tfidf {
        vocabulary: Vocabulary,
        idf: Vec<f64>,
    },
    MeanEmbedding {
        table: &'a EmbeddingTable,
    },
}

impl<'a> FeatureSpace<'a> {
    pub fn fit(
        corpus: &Corpus,
        kind: FeatureKind,
        table: Option<&'a EmbeddingTable>,
    ) -> Result<Self> {
        Ok(match kind {
            FeatureKind::Tf => FeatureSpace::Tf {
                vocabulary: corpus.vocabulary().clone(),
            },
            FeatureKind::Tfidf => {
                let vocabulary = corpus.vocabulary().clone();
                let mut df = vec![0usize; vocabulary.len()];
                let mut seen = vec![usize::MAX; vocabulary.len()];
                for (d, doc) in corpus.documents().iter().enumerate() {
                    for token in &doc.tokens {
                        let j = vocabulary.get(token).expect("corpus token in vocabulary");
                        if seen[j] != d {
                            seen[j] = d;
                            df[j] += 1;
                        }
                    }
                }
                let n = corpus.doc_count() as f64;
                let idf = df.iter().map(|&f| (n / f as f64).ln()).collect();
                FeatureSpace::Tfidf { vocabulary, idf }
            }
            FeatureKind::MeanEmbedding => FeatureSpace::MeanEmbedding {
                table: table.ok_or_else(|| {
                    Error::invalid("mean_embedding features require an embedding table")
                })?,
            },
        })
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureSpace::Tf { .. } => FeatureKind::Tf,
            FeatureSpace::Tfidf { .. } => FeatureKind::Tfidf,
            FeatureSpace::MeanEmbedding { .. } => FeatureKind::MeanEmbedding,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            FeatureSpace::Tf { vocabulary } | FeatureSpace::Tfidf { vocabulary, .. } => {
                vocabulary.len()
            }
            FeatureSpace::MeanEmbedding { table } => table.dimension(),
        }
    }

    pub fn transform_tokens(&self, tokens: &[String], row: &mut [f64]) {
        row.fill(0.0);
        match self {
            FeatureSpace::Tf { vocabulary } => {
                for t in tokens {
                    if let Some(j) = vocabulary.get(t) {
                        row[j] += 1.0;
                    }
                }
            }
            FeatureSpace::Tfidf { vocabulary, idf } => {
                for t in tokens {
                    if let Some(j) = vocabulary.get(t) {
                        row[j] += 1.0;
                    }
                }
                let mut norm = 0.0;
                for (v, w) in row.iter_mut().zip(idf) {
                    *v *= w;
                    norm += *v * *v;
                }
                if norm > 0.0 {
                    let norm = norm.sqrt();
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
            FeatureSpace::MeanEmbedding { table } => {
                let mut count = 0usize;
                for t in tokens {
                    if let Some(v) = table.get(t) {
                        count += 1;
                        row.iter_mut().zip(v).for_each(|(r, x)| *r += x);
                    }
                }
                if count > 0 {
                    row.iter_mut().for_each(|r| *r /= count as f64);
                }
            }
        }
    }

    pub fn transform(&self, corpus: &Corpus) -> FeatureMatrix {
        let cols = self.dimension();
        let mut values = vec![0.0; corpus.doc_count() * cols];
        if cols > 0 {
            for (doc, row) in corpus.documents().iter().zip(values.chunks_mut(cols)) {
                self.transform_tokens(&doc.tokens, row);
            }
        }
        FeatureMatrix {
            rows: corpus.doc_count(),
            cols,
            values,
            kind: self.kind(),
        }
    }
}

/// Fits a feature space on `corpus` and transforms the same corpus.
pub fn featurize(
    corpus: &Corpus,
    kind: FeatureKind,
    table: Option<&EmbeddingTable>,
) -> Result<FeatureMatrix> {
    Ok(FeatureSpace::fit(corpus, kind, table)?.transform(corpus))
}
