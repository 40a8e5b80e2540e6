//! Threshold calibration from a class prior and the evaluation metrics:
//! AUC, macro-F1, accuracy and precision@k.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_label::ceil_count;
use crate::text::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    TruePrior,
    HeuristicSplitRatio,
    User,
}

impl PriorSource {
    pub fn name(self) -> &'static str {
        match self {
            PriorSource::TruePrior => "true_prior",
            PriorSource::HeuristicSplitRatio => "heuristic_split_ratio",
            PriorSource::User => "user",
        }
    }
}

impl fmt::Display for PriorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriorSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PriorSource::TruePrior,
            PriorSource::HeuristicSplitRatio,
            PriorSource::User,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown prior source {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub beta: f64,
    pub pi_hat: f64,
    pub source: PriorSource,
    /// Fraction of calibration scores strictly above `beta`. Differs from
    /// the requested top fraction only when scores tie across the cut.
    pub achieved_fraction: f64,
    pub warning: Option<String>,
}

/// Threshold putting the top `⌈π̂·n⌉` scores strictly above it: the
/// midpoint between the k-th and (k+1)-th largest scores.
pub fn calibrate_threshold(scores: &[f64], pi_hat: f64, source: PriorSource) -> Result<Threshold> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if !(0.0..=1.0).contains(&pi_hat) {
        return Err(Error::invalid(format!(
            "pi_hat must lie in [0, 1], got {pi_hat}"
        )));
    }
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ceil_count(pi_hat * n as f64).min(n);
    let beta = if k == 0 {
        sorted[0] + 1.0
    } else if k == n {
        sorted[n - 1] - 1.0
    } else {
        0.5 * (sorted[k - 1] + sorted[k])
    };
    let above = scores.iter().filter(|&&s| s > beta).count();
    let achieved_fraction = above as f64 / n as f64;
    let warning = (above != k).then(|| {
        format!(
            "tied scores at the cut: {above} of {n} scores lie above the threshold, {k} requested"
        )
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let literal = sign_reading_threshold(&sorted, pi_hat);
    if literal != beta {
        log::info!(
            "threshold for pi_hat={pi_hat}: top-fraction reading {beta}, sign-difference reading {literal}"
        );
    }
    Ok(Threshold {
        beta,
        pi_hat,
        source,
        achieved_fraction,
        warning,
    })
}

/// The threshold under the literal reading `P(g > β) − P(g < β) = π̂`,
/// i.e. the top `(1 + π̂)/2` fraction. Expects descending scores.
fn sign_reading_threshold(sorted_desc: &[f64], pi_hat: f64) -> f64 {
    let n = sorted_desc.len();
    let k = ceil_count(0.5 * (1.0 + pi_hat) * n as f64).min(n);
    if k == 0 {
        sorted_desc[0] + 1.0
    } else if k == n {
        sorted_desc[n - 1] - 1.0
    } else {
        0.5 * (sorted_desc[k - 1] + sorted_desc[k])
    }
}

/// `+1` iff the score is strictly above the threshold.
pub fn classify(scores: &[f64], beta: f64) -> Vec<Label> {
    scores
        .iter()
        .map(|&s| if s > beta { Label::Pos } else { Label::Neg })
        .collect()
}

fn check_nonempty(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() {
        return Err(Error::Empty("positive score list"));
    }
    if neg.is_empty() {
        return Err(Error::Empty("negative score list"));
    }
    Ok(())
}

/// Converts twice the Mann–Whitney count (wins count 2, ties 1) into AUC.
/// Both AUC routes go through here so they agree bit for bit.
fn auc_from_doubled_wins(doubled_wins: u128, n_pos: usize, n_neg: usize) -> f64 {
    let pairs = n_pos as u128 * n_neg as u128;
    let doubled_losses = 2 * pairs - doubled_wins;
    let risk_sum = doubled_losses as f64 * 0.5;
    1.0 - risk_sum / pairs as f64
}

/// Pair-by-pair AUC: `1 − mean ℓ₀₋₁(s_P − s_N)`.
pub fn auc_brute_force(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_nonempty(pos, neg)?;
    let mut doubled = 0u128;
    for &p in pos {
        for &n in neg {
            doubled += match p.partial_cmp(&n) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(auc_from_doubled_wins(doubled, pos.len(), neg.len()))
}

/// Rank-sum AUC in `O(n log n)`; tied groups share their mid-rank.
pub fn auc_rank_based(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_nonempty(pos, neg)?;
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of doubled 1-based ranks of positives; a tie group spanning
    // ranks lo+1..=hi has doubled mid-rank lo + hi + 1.
    let mut doubled_rank_sum = 0u128;
    let mut lo = 0;
    while lo < all.len() {
        let mut hi = lo + 1;
        // -0.0 and 0.0 are equal scores.
        while hi < all.len() && all[hi].0 == all[lo].0 {
            hi += 1;
        }
        let n_pos_in_group = all[lo..hi].iter().filter(|e| e.1).count() as u128;
        doubled_rank_sum += n_pos_in_group * (lo + hi + 1) as u128;
        lo = hi;
    }
    let np = pos.len() as u128;
    let doubled_wins = doubled_rank_sum - np * (np + 1);
    Ok(auc_from_doubled_wins(doubled_wins, pos.len(), neg.len()))
}

/// AUC with half credit for ties; exact pair enumeration for up to 10⁶
/// pairs, rank sums beyond that.
pub fn auc_score(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if (pos.len() as u128) * (neg.len() as u128) <= 1_000_000 {
        auc_brute_force(pos, neg)
    } else {
        auc_rank_based(pos, neg)
    }
}

/// AUC of `scores` against gold labels.
pub fn auc_from_labels(scores: &[f64], gold: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), gold.len())?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (&s, l) in scores.iter().zip(gold) {
        if l.is_pos() {
            pos.push(s)
        } else {
            neg.push(s)
        }
    }
    auc_score(&pos, &neg)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

fn f1_for(class: Label, pred: &[Label], gold: &[Label]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fneg == 0 {
        0.0
    } else {
        tp as f64 / (tp + fneg) as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mean of the F1 scores of both classes; an F1 with zero precision and
/// recall counts as 0.
pub fn macro_f1(pred: &[Label], gold: &[Label]) -> Result<f64> {
    check_lengths(pred.len(), gold.len())?;
    Ok(0.5 * (f1_for(Label::Pos, pred, gold) + f1_for(Label::Neg, pred, gold)))
}

pub fn accuracy(pred: &[Label], gold: &[Label]) -> Result<f64> {
    check_lengths(pred.len(), gold.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("label list"));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Fraction of gold positives among the `k` highest scores; ties at the
/// boundary go to the smaller index.
pub fn precision_at_k(scores: &[f64], gold: &[Label], k: usize) -> Result<f64> {
    check_lengths(scores.len(), gold.len())?;
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!(
            "k must lie in [1, {}], got {k}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..k].iter().filter(|&&i| gold[i].is_pos()).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub prec_at_k: f64,
    pub k: usize,
    pub n_eval: usize,
}

/// Rounds a `[0, 1]` value to a percentage with one decimal.
pub fn percent(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

impl MetricsReport {
    /// Computes every metric; `k` is clamped to the number of documents.
    pub fn compute(scores: &[f64], gold: &[Label], beta: f64, k: usize) -> Result<Self> {
        check_lengths(scores.len(), gold.len())?;
        let pred = classify(scores, beta);
        let k = k.min(scores.len());
        Ok(Self {
            auc: auc_from_labels(scores, gold)?,
            macro_f1: macro_f1(&pred, gold)?,
            accuracy: accuracy(&pred, gold)?,
            prec_at_k: precision_at_k(scores, gold, k)?,
            k,
            n_eval: scores.len(),
        })
    }

    /// Flat JSON object with the raw values plus `*_pct` percentages.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"auc\":{},\"macro_f1\":{},\"accuracy\":{},\"prec_at_k\":{},\"k\":{},\"n_eval\":{},\
             \"auc_pct\":{:.1},\"macro_f1_pct\":{:.1},\"accuracy_pct\":{:.1},\"prec_at_k_pct\":{:.1}}}",
            self.auc,
            self.macro_f1,
            self.accuracy,
            self.prec_at_k,
            self.k,
            self.n_eval,
            percent(self.auc),
            percent(self.macro_f1),
            percent(self.accuracy),
            percent(self.prec_at_k),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Neg as N, Pos as P};

    #[test]
    fn calibration_examples() {
        let t = calibrate_threshold(&[3.0, 2.0, 1.0, 0.0], 0.5, PriorSource::User).unwrap();
        assert_eq!(t.beta, 1.5);
        assert_eq!(t.achieved_fraction, 0.5);
        assert!(t.warning.is_none());

        let t = calibrate_threshold(&[3.0, 2.0, 1.0], 0.0, PriorSource::User).unwrap();
        assert_eq!(t.beta, 4.0);
        assert_eq!(classify(&[3.0, 2.0, 1.0], t.beta), [N, N, N]);
        let t = calibrate_threshold(&[3.0, 2.0, 1.0], 1.0, PriorSource::User).unwrap();
        assert_eq!(t.beta, 0.0);

        let t = calibrate_threshold(&[5.0, 4.0, 4.0, 1.0], 0.5, PriorSource::User).unwrap();
        assert_eq!(t.beta, 4.0);
        assert_eq!(t.achieved_fraction, 0.25);
        assert!(t.warning.is_some());

        assert!(calibrate_threshold(&[], 0.5, PriorSource::User).is_err());
        assert!(calibrate_threshold(&[1.0], 1.5, PriorSource::User).is_err());
    }

    #[test]
    fn sign_reading_selects_a_larger_top_fraction() {
        let sorted = [4.0, 3.0, 2.0, 1.0];
        // (1 + 0.5) / 2 = 0.75 of 4 scores -> 3 above.
        assert_eq!(sign_reading_threshold(&sorted, 0.5), 1.5);
    }

    #[test]
    fn prior_source_names() {
        for name in ["true_prior", "heuristic_split_ratio", "user"] {
            assert_eq!(name.parse::<PriorSource>().unwrap().to_string(), name);
        }
        assert!("oracle".parse::<PriorSource>().is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[1.0, -1.0], 0.0), [P, N]);
        assert_eq!(classify(&[0.0], 0.0), [N]);
        let scores = [0.3, -2.0, 7.0, 1.1];
        let t = calibrate_threshold(&scores, 0.5, PriorSource::TruePrior).unwrap();
        let labels = classify(&scores, t.beta);
        assert_eq!(labels.iter().filter(|l| l.is_pos()).count(), 2);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[2.0, 1.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(auc_score(&[0.0], &[0.0]).unwrap(), 0.5);
        assert_eq!(auc_score(&[3.0, 1.0], &[2.0, 0.0]).unwrap(), 0.75);
        assert_eq!(auc_rank_based(&[3.0, 1.0], &[2.0, 0.0]).unwrap(), 0.75);
        let tied = auc_rank_based(&[1.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!((tied - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            tied,
            auc_brute_force(&[1.0, 1.0], &[1.0, 0.0, 1.0]).unwrap()
        );
        assert!(auc_score(&[], &[1.0]).is_err());
        assert!(auc_rank_based(&[1.0], &[]).is_err());
    }

    #[test]
    fn auc_treats_signed_zeros_as_ties() {
        assert_eq!(auc_rank_based(&[-0.0], &[0.0]).unwrap(), 0.5);
        assert_eq!(auc_brute_force(&[-0.0], &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[P, N, P], &[P, N, P]).unwrap(), 1.0);
        let f = macro_f1(&[P, P, P, P], &[P, P, N, N]).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(percent(f), 33.3);
        assert_eq!(macro_f1(&[P, N, P, N], &[P, P, N, N]).unwrap(), 0.5);
        assert!(macro_f1(&[P], &[P, N]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[P, N], &[P, N]).unwrap(), 1.0);
        assert_eq!(accuracy(&[N, P], &[P, N]).unwrap(), 0.0);
        assert_eq!(accuracy(&[P, P, N, N], &[P, P, N, P]).unwrap(), 0.75);
        assert!(accuracy(&[P], &[]).is_err());
    }

    #[test]
    fn precision_at_k_examples() {
        assert_eq!(
            precision_at_k(&[3.0, 2.0, 1.0], &[P, N, P], 2).unwrap(),
            0.5
        );
        assert_eq!(
            precision_at_k(&[3.0, 2.0, 1.0], &[P, P, N], 2).unwrap(),
            1.0
        );
        assert_eq!(
            precision_at_k(&[0.4, 0.9, 0.1, 0.5], &[P, N, N, P], 4).unwrap(),
            0.5
        );
        // tie at rank 1 goes to index 0
        assert_eq!(precision_at_k(&[1.0, 1.0], &[N, P], 1).unwrap(), 0.0);
        assert!(precision_at_k(&[1.0], &[P], 2).is_err());
        assert!(precision_at_k(&[1.0], &[P], 0).is_err());
    }

    #[test]
    fn report_json_layout() {
        let r = MetricsReport::compute(&[2.0, 1.0, 0.0, -1.0], &[P, P, N, N], 0.5, 100).unwrap();
        assert_eq!(r.k, 4);
        assert_eq!(
            r.to_json(),
            "{\"auc\":1,\"macro_f1\":1,\"accuracy\":1,\"prec_at_k\":0.5,\"k\":4,\"n_eval\":4,\
             \"auc_pct\":100.0,\"macro_f1_pct\":100.0,\"accuracy_pct\":100.0,\"prec_at_k_pct\":50.0}"
        );
    }
}
