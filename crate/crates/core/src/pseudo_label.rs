//! Keyword-based pseudo-labeling of an unlabeled corpus into a corrupted
//! positive set (CP) and a corrupted negative set (CN).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{nearest_words, Corpus, EmbeddingTable, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSet {
    pub keywords: Vec<String>,
    /// Copies of each original keyword in the merged keyword document.
    pub alpha: usize,
    /// Embedding neighbours added per keyword.
    pub gamma: usize,
    /// Percentage of positively-scored documents labeled CP.
    pub phi: f64,
}

impl KeywordSet {
    pub fn new(keywords: Vec<String>, alpha: usize, gamma: usize, phi: f64) -> Result<Self> {
        let ks = Self {
            keywords,
            alpha,
            gamma,
            phi,
        };
        ks.validate()?;
        Ok(ks)
    }

    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::Empty("keyword set"));
        }
        if self.alpha == 0 {
            return Err(Error::invalid("alpha must be at least 1"));
        }
        validate_phi(self.phi)
    }
}

fn validate_phi(phi: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&phi) {
        return Err(Error::invalid(format!(
            "phi must lie in [0, 100], got {phi}"
        )));
    }
    Ok(())
}

/// Reads one keyword per line; blank lines are ignored.
pub fn load_keywords(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let keywords: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect();
    if keywords.is_empty() {
        return Err(Error::Empty("keyword file"));
    }
    Ok(keywords)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    /// Keyword multiset: α copies of each keyword plus its neighbours.
    pub tokens: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn expand_keywords(ks: &KeywordSet, table: &EmbeddingTable) -> Result<Expansion> {
    ks.validate()?;
    let mut out = Expansion::default();
    for w in &ks.keywords {
        out.tokens.extend(std::iter::repeat_n(w.clone(), ks.alpha));
        if ks.gamma == 0 {
            continue;
        }
        match nearest_words(table, w, ks.gamma) {
            Ok(neighbours) => out.tokens.extend(neighbours.into_iter().map(|(t, _)| t)),
            Err(Error::OutOfVocabulary(_)) => {
                let msg = format!("out-of-vocabulary keyword {w:?} not expanded");
                warn!("{msg}");
                out.warnings.push(msg);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn term_counts<'a>(tokens: impl IntoIterator<Item = &'a str>) -> BTreeMap<&'a str, f64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    counts
}

fn norm(counts: &BTreeMap<&str, f64>) -> f64 {
    counts.values().map(|c| c * c).sum::<f64>().sqrt()
}

/// Cosine similarity between the term-count vector of the merged keyword
/// document and that of every corpus document.
pub fn score_documents(corpus: &Corpus, expanded: &[String]) -> Vec<f64> {
    let keyword_doc = term_counts(expanded.iter().map(String::as_str));
    let keyword_norm = norm(&keyword_doc);
    corpus
        .documents()
        .iter()
        .map(|doc| {
            let counts = term_counts(doc.tokens.iter().map(String::as_str));
            let doc_norm = norm(&counts);
            if keyword_norm == 0.0 || doc_norm == 0.0 {
                return 0.0;
            }
            let dot: f64 = counts
                .iter()
                .filter_map(|(t, c)| keyword_doc.get(t).map(|k| k * c))
                .sum();
            dot / (keyword_norm * doc_norm)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSplit {
    /// Ascending document indices of the corrupted positive set.
    pub cp_indices: Vec<usize>,
    /// Ascending document indices of the corrupted negative set.
    pub cn_indices: Vec<usize>,
    pub similarities: Vec<f64>,
    pub expanded_keywords: Vec<String>,
    pub alpha: usize,
    pub gamma: usize,
    pub phi: f64,
    pub warnings: Vec<String>,
}

impl PseudoSplit {
    /// Fraction of the corpus placed in CP.
    pub fn cp_fraction(&self) -> f64 {
        let n = self.cp_indices.len() + self.cn_indices.len();
        if n == 0 {
            0.0
        } else {
            self.cp_indices.len() as f64 / n as f64
        }
    }
}

/// `⌈x⌉` that ignores floating-point noise just above an integer, so that
/// e.g. `0.31 * 100` counts as 31.
pub fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// The top-φ% (rounded up) of positively-scored documents form CP; all
/// other documents form CN. Ties at the cut go to the smaller index.
pub fn split(similarities: &[f64], phi: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    validate_phi(phi)?;
    let mut positive: Vec<usize> = (0..similarities.len())
        .filter(|&i| similarities[i] > 0.0)
        .collect();
    let take = ceil_count(phi * positive.len() as f64 / 100.0).min(positive.len());
    positive.sort_by(|&a, &b| similarities[b].total_cmp(&similarities[a]).then(a.cmp(&b)));
    let mut in_cp = vec![false; similarities.len()];
    for &i in &positive[..take] {
        in_cp[i] = true;
    }
    let (cp, cn): (Vec<usize>, Vec<usize>) = (0..similarities.len()).partition(|&i| in_cp[i]);
    Ok((cp, cn))
}

/// Runs the full keyword pipeline: expansion, scoring and the φ split.
pub fn pseudo_label(
    corpus: &Corpus,
    ks: &KeywordSet,
    table: &EmbeddingTable,
) -> Result<PseudoSplit> {
    let expansion = expand_keywords(ks, table)?;
    let similarities = score_documents(corpus, &expansion.tokens);
    let (cp_indices, cn_indices) = split(&similarities, ks.phi)?;
    Ok(PseudoSplit {
        cp_indices,
        cn_indices,
        similarities,
        expanded_keywords: expansion.tokens,
        alpha: ks.alpha,
        gamma: ks.gamma,
        phi: ks.phi,
        warnings: expansion.warnings,
    })
}

/// Positive fractions of CP and CN measured with gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationEstimate {
    pub theta: f64,
    pub theta_prime: f64,
}

impl ContaminationEstimate {
    pub fn gap(&self) -> f64 {
        self.theta - self.theta_prime
    }
}

fn positive_fraction(indices: &[usize], labels: &[Label], what: &'static str) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty(what));
    }
    let pos = indices.iter().filter(|&&i| labels[i].is_pos()).count();
    Ok(pos as f64 / indices.len() as f64)
}

pub fn estimate_contamination(
    split: &PseudoSplit,
    corpus: &Corpus,
) -> Result<ContaminationEstimate> {
    let labels = corpus.gold_labels()?;
    Ok(ContaminationEstimate {
        theta: positive_fraction(&split.cp_indices, &labels, "corrupted-positive set")?,
        theta_prime: positive_fraction(&split.cn_indices, &labels, "corrupted-negative set")?,
    })
}

const SPLIT_MAGIC: &str = "# pseudo-label split v1";

/// Serializes the split: a header with (α, γ, φ), the expanded keywords and
/// warnings, then `CP:` and `CN:` sections of `id<TAB>similarity` lines.
pub fn render_split(split: &PseudoSplit, corpus: &Corpus) -> String {
    let docs = corpus.documents();
    let mut out = String::new();
    let _ = writeln!(out, "{SPLIT_MAGIC}");
    let _ = writeln!(out, "alpha {}", split.alpha);
    let _ = writeln!(out, "gamma {}", split.gamma);
    let _ = writeln!(out, "phi {}", split.phi);
    let _ = writeln!(out, "expanded {}", split.expanded_keywords.join(" "));
    for w in &split.warnings {
        let _ = writeln!(out, "warning {w}");
    }
    for (name, indices) in [("CP:", &split.cp_indices), ("CN:", &split.cn_indices)] {
        let _ = writeln!(out, "{name}");
        for &i in indices {
            let _ = writeln!(out, "{}\t{}", docs[i].id, split.similarities[i]);
        }
    }
    out
}

pub fn write_split(split: &PseudoSplit, corpus: &Corpus, path: &Path) -> Result<()> {
    fs::write(path, render_split(split, corpus)).map_err(|e| Error::io(path, e))
}

pub fn read_split(path: &Path, corpus: &Corpus) -> Result<PseudoSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text, corpus)
}

pub fn parse_split(text: &str, corpus: &Corpus) -> Result<PseudoSplit> {
    let bad = |m: String| Error::format("split", m);
    let ids: HashMap<&str, usize> = corpus
        .documents()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, SPLIT_MAGIC)) => {}
        _ => return Err(bad("missing header line".into())),
    }
    let mut split = PseudoSplit {
        cp_indices: Vec::new(),
        cn_indices: Vec::new(),
        similarities: vec![0.0; corpus.doc_count()],
        expanded_keywords: Vec::new(),
        alpha: 1,
        gamma: 0,
        phi: 0.0,
        warnings: Vec::new(),
    };
    let mut seen = vec![false; corpus.doc_count()];
    let mut section: Option<bool> = None;
    for (i, line) in lines {
        let line_no = i + 1;
        match line {
            "CP:" => section = Some(true),
            "CN:" => section = Some(false),
            _ => match section {
                None => {
                    let (key, value) = line.split_once(' ').unwrap_or((line, ""));
                    let parse_err = |_| bad(format!("line {line_no}: bad value for {key}"));
                    match key {
                        "alpha" => split.alpha = value.parse().map_err(parse_err)?,
                        "gamma" => split.gamma = value.parse().map_err(parse_err)?,
                        "phi" => {
                            split.phi = value
                                .parse()
                                .map_err(|_| bad(format!("line {line_no}: bad phi")))?
                        }
                        "expanded" => {
                            split.expanded_keywords =
                                value.split_whitespace().map(str::to_owned).collect()
                        }
                        "warning" => split.warnings.push(value.to_owned()),
                        _ => return Err(bad(format!("line {line_no}: unknown header {key:?}"))),
                    }
                }
                Some(is_cp) => {
                    let (id, sim) = line.split_once('\t').ok_or_else(|| {
                        bad(format!("line {line_no}: expected id<TAB>similarity"))
                    })?;
                    let &idx = ids
                        .get(id)
                        .ok_or_else(|| bad(format!("line {line_no}: unknown document {id:?}")))?;
                    if std::mem::replace(&mut seen[idx], true) {
                        return Err(bad(format!("line {line_no}: duplicate document {id:?}")));
                    }
                    split.similarities[idx] = sim
                        .parse()
                        .map_err(|_| bad(format!("line {line_no}: bad similarity")))?;
                    if is_cp {
                        split.cp_indices.push(idx);
                    } else {
                        split.cn_indices.push(idx);
                    }
                }
            },
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(bad(format!(
            "document {:?} is in neither section",
            corpus.documents()[missing].id
        )));
    }
    split.cp_indices.sort_unstable();
    split.cn_indices.sort_unstable();
    Ok(split)
}
