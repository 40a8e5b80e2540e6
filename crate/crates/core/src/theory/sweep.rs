use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::auc_score;
use crate::ranker::{train, Architecture, RankerModel, TrainConfig};
use crate::text::{FeatureKind, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Gaussian,
    StudentT { df: f64 },
}

/// Two-class feature generator: class means `±(separation/2)·1/√dim`
/// plus i.i.d. per-coordinate noise. A fraction `outlier_rate` of positives
/// is pushed `outlier_shift` further out along the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub dim: usize,
    pub separation: f64,
    pub noise: NoiseKind,
    pub outlier_rate: f64,
    pub outlier_shift: f64,
    pub n_cp: usize,
    pub n_cn: usize,
    pub n_test_per_class: usize,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            separation: 2.0,
            noise: NoiseKind::Gaussian,
            outlier_rate: 0.0,
            outlier_shift: 0.0,
            n_cp: 100,
            n_cn: 100,
            n_test_per_class: 500,
        }
    }
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_cp == 0 || self.n_cn == 0 || self.n_test_per_class == 0 {
            return Err(Error::invalid("mixture sizes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(Error::invalid("outlier_rate must lie in [0, 1]"));
        }
        if let NoiseKind::StudentT { df } = self.noise {
            if df.is_nan() || df <= 0.0 {
                return Err(Error::invalid(
                    "Student-t degrees of freedom must be positive",
                ));
            }
        }
        Ok(())
    }

    fn sample_rows<R: Rng>(&self, rng: &mut R, positive: bool, n: usize) -> Vec<Vec<f64>> {
        let shift = 0.5 * self.separation / (self.dim as f64).sqrt();
        let shift = if positive { shift } else { -shift };
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let student = match self.noise {
            NoiseKind::StudentT { df } => Some(StudentT::new(df).expect("validated df")),
            NoiseKind::Gaussian => None,
        };
        (0..n)
            .map(|_| {
                let mut row: Vec<f64> = (0..self.dim)
                    .map(|_| {
                        let e = match &student {
                            Some(t) => t.sample(rng),
                            None => normal.sample(rng),
                        };
                        shift + e
                    })
                    .collect();
                if positive && self.outlier_rate > 0.0 && rng.random_bool(self.outlier_rate) {
                    row[0] += self.outlier_shift;
                }
                row
            })
            .collect()
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    FeatureMatrix::from_rows(&rows, FeatureKind::Tf).expect("rectangular rows")
}

fn check_gap(theta: f64, theta_prime: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) || !(0.0..=1.0).contains(&theta_prime) {
        return Err(Error::invalid("theta and theta_prime must lie in [0, 1]"));
    }
    if theta <= theta_prime {
        return Err(Error::invalid(format!(
            "need theta > theta_prime, got ({theta}, {theta_prime})"
        )));
    }
    Ok(())
}

/// Trains on corrupted sets with exactly `round(θ·n_cp)` positives in CP
/// and `round(θ′·n_cn)` in CN and returns the clean test AUC.
///
/// All samples derive from `seed` alone, so trials with the same seed and
/// different `(θ, θ′)` share their feature pools and test set.
pub fn run_gap_trial(
    spec: &MixtureSpec,
    theta: f64,
    theta_prime: f64,
    config: &TrainConfig,
    architecture: Architecture,
    seed: u64,
) -> Result<f64> {
    spec.validate()?;
    check_gap(theta, theta_prime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = spec.n_cp + spec.n_cn;
    let pos = spec.sample_rows(&mut rng, true, pool);
    let neg = spec.sample_rows(&mut rng, false, pool);
    let test_pos = to_matrix(spec.sample_rows(&mut rng, true, spec.n_test_per_class));
    let test_neg = to_matrix(spec.sample_rows(&mut rng, false, spec.n_test_per_class));

    let k_cp = (theta * spec.n_cp as f64).round() as usize;
    let k_cn = (theta_prime * spec.n_cn as f64).round() as usize;
    let cp: Vec<Vec<f64>> = pos[..k_cp]
        .iter()
        .chain(&neg[..spec.n_cp - k_cp])
        .cloned()
        .collect();
    let cn: Vec<Vec<f64>> = pos[spec.n_cp..spec.n_cp + k_cn]
        .iter()
        .chain(&neg[spec.n_cp..pool - k_cn])
        .cloned()
        .collect();

    let init = RankerModel::init(architecture, spec.dim, seed)?;
    let config = TrainConfig {
        seed,
        ..config.clone()
    };
    let (model, _) = train(init, &to_matrix(cp), &to_matrix(cn), &config)?;
    auc_score(&model.scores(&test_pos)?, &model.scores(&test_neg)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub theta: f64,
    pub theta_prime: f64,
    pub mean_auc: f64,
    pub stderr: f64,
    /// Per-seed AUCs in seed order.
    pub aucs: Vec<f64>,
}

impl GapRow {
    pub fn gap(&self) -> f64 {
        self.theta - self.theta_prime
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSweep {
    pub rows: Vec<GapRow>,
    /// Rank correlation between gap and mean AUC.
    pub spearman: f64,
}

impl GapSweep {
    /// Largest increase of mean AUC from one row to the next (0 if the
    /// sequence never increases).
    pub fn worst_inversion(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].mean_auc - w[0].mean_auc)
            .fold(0.0, f64::max)
    }

    pub fn is_non_increasing(&self, tol: f64) -> bool {
        self.worst_inversion() <= tol
    }

    /// `gap,theta,theta_prime,mean_auc,stderr,n_seeds`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gap,theta,theta_prime,mean_auc,stderr,n_seeds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                (r.gap() * 1e12).round() / 1e12,
                r.theta,
                r.theta_prime,
                r.mean_auc,
                r.stderr,
                r.aucs.len()
            );
        }
        out
    }
}

/// Mean and standard error (sample standard deviation over `√n`).
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trains one model per (gap, seed) and records clean test AUC. Gaps must
/// be sorted by decreasing `θ − θ′`.
pub fn gap_sweep(
    spec: &MixtureSpec,
    gaps: &[(f64, f64)],
    config: &TrainConfig,
    architecture: Architecture,
    seeds: &[u64],
) -> Result<GapSweep> {
    if gaps.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("gap or seed list"));
    }
    for &(t, tp) in gaps {
        check_gap(t, tp)?;
    }
    if gaps.windows(2).any(|w| w[1].0 - w[1].1 > w[0].0 - w[0].1) {
        return Err(Error::invalid(
            "gaps must be sorted by decreasing theta - theta_prime",
        ));
    }
    let jobs: Vec<(usize, u64)> = (0..gaps.len())
        .flat_map(|g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let aucs = jobs
        .par_iter()
        .map(|&(g, s)| run_gap_trial(spec, gaps[g].0, gaps[g].1, config, architecture, s))
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<GapRow> = gaps
        .iter()
        .zip(aucs.chunks(seeds.len()))
        .map(|(&(theta, theta_prime), chunk)| {
            let (mean_auc, stderr) = mean_stderr(chunk);
            GapRow {
                theta,
                theta_prime,
                mean_auc,
                stderr,
                aucs: chunk.to_vec(),
            }
        })
        .collect();
    let gap_values: Vec<f64> = rows.iter().map(GapRow::gap).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_auc).collect();
    Ok(GapSweep {
        spearman: spearman(&gap_values, &means),
        rows,
    })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut lo = 0;
    while lo < order.len() {
        let mut hi = lo + 1;
        while hi < order.len() && values[order[hi]] == values[order[lo]] {
            hi += 1;
        }
        let rank = (lo + hi + 1) as f64 / 2.0;
        for &i in &order[lo..hi] {
            ranks[i] = rank;
        }
        lo = hi;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs equal lengths");
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
