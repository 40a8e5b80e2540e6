//! Exact risks on finite-support distributions, the corrupted-risk
//! decompositions checked against them, and synthetic data generators.

mod suite;
mod sweep;
mod synthetic;

use rand::Rng;

pub use suite::{
    argmin_mismatches, random_contamination, random_linear_model, run_identity_suite, CheckOutcome,
    SuiteConfig, SuiteReport,
};
pub use sweep::{gap_sweep, run_gap_trial, spearman, GapRow, GapSweep, MixtureSpec, NoiseKind};
pub use synthetic::{generate_synthetic_corpus, synthetic_embeddings, SyntheticCorpusSpec};

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::ranker::RankerModel;

/// Class-conditional masses on a shared finite support, with the prior and
/// the contamination levels of the corrupted sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    pub support: Vec<Vec<f64>>,
    pub p_pos: Vec<f64>,
    pub p_neg: Vec<f64>,
    pub pi: f64,
    pub theta: f64,
    pub theta_prime: f64,
}

fn check_mass(mass: &[f64], n: usize, name: &str) -> Result<()> {
    if mass.len() != n {
        return Err(Error::invalid(format!(
            "{name} has {} entries, support has {n}",
            mass.len()
        )));
    }
    if mass.iter().any(|&m| m.is_nan() || m < 0.0) {
        return Err(Error::invalid(format!("{name} has a negative entry")));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("{name} sums to {total}")));
    }
    Ok(())
}

impl DiscreteProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.support.len();
        if n == 0 {
            return Err(Error::Empty("support"));
        }
        check_mass(&self.p_pos, n, "p_pos")?;
        check_mass(&self.p_neg, n, "p_neg")?;
        for (name, v) in [
            ("pi", self.pi),
            ("theta", self.theta),
            ("theta_prime", self.theta_prime),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the corrupted sets carry ranking information (`θ > θ′`).
    pub fn is_identifiable(&self) -> bool {
        self.theta > self.theta_prime
    }

    /// Random masses over `support_size` random points of dimension `dim`.
    pub fn random<R: Rng>(
        rng: &mut R,
        support_size: usize,
        dim: usize,
        theta: f64,
        theta_prime: f64,
    ) -> Self {
        let support = (0..support_size)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        Self {
            support,
            p_pos: random_simplex(rng, support_size),
            p_neg: random_simplex(rng, support_size),
            pi: rng.random_range(0.05..0.95),
            theta,
            theta_prime,
        }
    }

    /// `p_θ = θ p(x|+1) + (1 − θ) p(x|−1)`.
    pub fn mixture(&self, theta: f64) -> Vec<f64> {
        self.p_pos
            .iter()
            .zip(&self.p_neg)
            .map(|(p, n)| theta * p + (1.0 - theta) * n)
            .collect()
    }

    fn scores(&self, model: &RankerModel) -> Result<Vec<f64>> {
        self.support.iter().map(|x| model.score(x)).collect()
    }
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// `Σ_x Σ_x′ p(x) q(x′) f(s_x, s_x′)`.
fn double_sum(p: &[f64], q: &[f64], scores: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        let mut row = 0.0;
        for (j, &qj) in q.iter().enumerate() {
            row += qj * f(scores[i], scores[j]);
        }
        total += pi * row;
    }
    total
}

/// Bipartite ranking risk `E_P E_N ℓ(g(x) − g(x′))`.
pub fn exact_clean_auc_risk(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
) -> Result<f64> {
    problem.validate()?;
    let s = problem.scores(model)?;
    Ok(double_sum(&problem.p_pos, &problem.p_neg, &s, |a, b| {
        loss.value(a - b)
    }))
}

/// Corrupted risk `E_θ E_θ′ ℓ(g(x) − g(x′))`.
pub fn exact_corrupted_auc_risk(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
) -> Result<f64> {
    problem.validate()?;
    let s = problem.scores(model)?;
    let p_theta = problem.mixture(problem.theta);
    let p_theta_prime = problem.mixture(problem.theta_prime);
    Ok(double_sum(&p_theta, &p_theta_prime, &s, |a, b| {
        loss.value(a - b)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(residual: f64, tol: f64) -> Self {
        Self {
            residual,
            tol,
            passed: residual <= tol,
        }
    }
}

/// Checks `R_corr = (θ − θ′) R + K(1 − θ + θ′)/2` for a symmetric loss.
pub fn verify_affine_identity(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
    tol: f64,
) -> Result<IdentityCheck> {
    let k = loss
        .symmetry_constant()
        .ok_or(Error::NotSymmetric(loss.kind().name()))?;
    Ok(IdentityCheck::new(
        affine_residual(problem, model, loss, k)?,
        tol,
    ))
}

/// Residual of the affine identity with the given `K`, for any loss. Used
/// to show the identity fails without symmetry.
pub fn affine_residual(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
    k: f64,
) -> Result<f64> {
    let (t, tp) = (problem.theta, problem.theta_prime);
    let corrupted = exact_corrupted_auc_risk(problem, model, loss)?;
    let clean = exact_clean_auc_risk(problem, model, loss)?;
    Ok((corrupted - ((t - tp) * clean + k * (1.0 - t + tp) / 2.0)).abs())
}

/// The four terms of the general corrupted-risk decomposition, each an
/// exact double sum of `φ(x, x′) = ℓ(g(x) − g(x′)) + ℓ(g(x′) − g(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `(θ − θ′) R`
    pub clean_term: f64,
    /// `(1 − θ)θ′ E_P E_N φ`
    pub pos_neg_term: f64,
    /// `θθ′/2 E_P′ E_P φ`
    pub pos_pos_term: f64,
    /// `(1 − θ)(1 − θ′)/2 E_N′ E_N φ`
    pub neg_neg_term: f64,
    pub corrupted: f64,
}

impl Decomposition {
    pub fn excess(&self) -> f64 {
        self.pos_neg_term + self.pos_pos_term + self.neg_neg_term
    }

    pub fn total(&self) -> f64 {
        self.clean_term + self.excess()
    }

    /// Weights of the three excess terms.
    pub fn excess_weights(theta: f64, theta_prime: f64) -> [f64; 3] {
        [
            (1.0 - theta) * theta_prime,
            theta * theta_prime / 2.0,
            (1.0 - theta) * (1.0 - theta_prime) / 2.0,
        ]
    }
}

pub fn decompose_corrupted_risk(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
) -> Result<Decomposition> {
    problem.validate()?;
    let s = problem.scores(model)?;
    let (t, tp) = (problem.theta, problem.theta_prime);
    let phi = |a: f64, b: f64| loss.value(a - b) + loss.value(b - a);
    let clean = double_sum(&problem.p_pos, &problem.p_neg, &s, |a, b| loss.value(a - b));
    let [w_pn, w_pp, w_nn] = Decomposition::excess_weights(t, tp);
    // P′ and N′ are independent copies of P and N.
    Ok(Decomposition {
        clean_term: (t - tp) * clean,
        pos_neg_term: w_pn * double_sum(&problem.p_pos, &problem.p_neg, &s, phi),
        pos_pos_term: w_pp * double_sum(&problem.p_pos, &problem.p_pos, &s, phi),
        neg_neg_term: w_nn * double_sum(&problem.p_neg, &problem.p_neg, &s, phi),
        corrupted: exact_corrupted_auc_risk(problem, model, loss)?,
    })
}

/// Checks that the decomposition sums to the corrupted risk; holds for
/// every margin loss.
pub fn verify_decomposition(
    problem: &DiscreteProblem,
    model: &RankerModel,
    loss: &LossSpec,
    tol: f64,
) -> Result<(IdentityCheck, Decomposition)> {
    let d = decompose_corrupted_risk(problem, model, loss)?;
    Ok((IdentityCheck::new((d.total() - d.corrupted).abs(), tol), d))
}

/// Index of the candidate with the smallest value; first one wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::ranker::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(w: &[f64], b: f64) -> RankerModel {
        let mut p = w.to_vec();
        p.push(b);
        RankerModel::from_params(Architecture::Linear, w.len(), p).unwrap()
    }

    fn random_linear(rng: &mut ChaCha8Rng, dim: usize) -> RankerModel {
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        linear(&w, rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constant_scorer_has_half_zero_one_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = DiscreteProblem::random(&mut rng, 5, 2, 0.8, 0.3);
        let zo = LossKind::ZeroOne.into();
        assert_eq!(
            exact_clean_auc_risk(&p, &linear(&[0.0, 0.0], 3.0), &zo).unwrap(),
            0.5
        );
    }

    #[test]
    fn separated_supports_have_zero_risk() {
        let p = DiscreteProblem {
            support: vec![vec![1.0], vec![2.0], vec![-1.0], vec![-3.0]],
            p_pos: vec![0.5, 0.5, 0.0, 0.0],
            p_neg: vec![0.0, 0.0, 0.25, 0.75],
            pi: 0.5,
            theta: 1.0,
            theta_prime: 0.0,
        };
        let g = linear(&[1.0], 0.0);
        assert_eq!(
            exact_clean_auc_risk(&p, &g, &LossKind::ZeroOne.into()).unwrap(),
            0.0
        );
    }

    #[test]
    fn clean_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = DiscreteProblem::random(&mut rng, 6, 3, 1.0, 0.0);
            let g = random_linear(&mut rng, 3);
            for kind in LossKind::ALL {
                let loss = kind.into();
                let a = exact_corrupted_auc_risk(&p, &g, &loss).unwrap();
                let b = exact_clean_auc_risk(&p, &g, &loss).unwrap();
                assert!((a - b).abs() <= 1e-12, "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn equal_contamination_gives_half_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DiscreteProblem::random(&mut rng, 7, 2, 0.4, 0.4);
        assert!(!p.is_identifiable());
        let g = random_linear(&mut rng, 2);
        let r = exact_corrupted_auc_risk(&p, &g, &LossKind::Sigmoid.into()).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn affine_identity_requires_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = DiscreteProblem::random(&mut rng, 5, 2, 0.9, 0.2);
        let g = random_linear(&mut rng, 2);
        let check = verify_affine_identity(&p, &g, &LossKind::Sigmoid.into(), 1e-10).unwrap();
        assert!(check.passed, "{check:?}");
        let check = verify_affine_identity(&p, &g, &LossKind::ZeroOne.into(), 1e-10).unwrap();
        assert!(check.passed, "{check:?}");
        let logistic = LossKind::Logistic.into();
        assert!(matches!(
            verify_affine_identity(&p, &g, &logistic, 1e-10),
            Err(Error::NotSymmetric(_))
        ));
        let k = 2.0 * std::f64::consts::LN_2;
        assert!(affine_residual(&p, &g, &logistic, k).unwrap() > 1e-10);
    }

    #[test]
    fn decomposition_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = DiscreteProblem::random(&mut rng, 6, 2, 0.7, 0.35);
        let g = random_linear(&mut rng, 2);
        for kind in [LossKind::Logistic, LossKind::Squared, LossKind::Sigmoid] {
            let (check, _) = verify_decomposition(&p, &g, &kind.into(), 1e-10).unwrap();
            assert!(check.passed, "{kind}: {check:?}");
        }
        // Symmetric loss: φ ≡ K, so excess = K · Σ weights.
        let (_, d) = verify_decomposition(&p, &g, &LossKind::Sigmoid.into(), 1e-10).unwrap();
        let weights: f64 = Decomposition::excess_weights(0.7, 0.35).iter().sum();
        assert!((d.excess() - weights).abs() < 1e-12);
        assert!((weights - (1.0 - 0.7 + 0.35) / 2.0).abs() < 1e-15);

        assert_eq!(Decomposition::excess_weights(1.0, 0.0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let p = DiscreteProblem {
            support: vec![vec![0.0], vec![1.0]],
            p_pos: vec![0.5, 0.6],
            p_neg: vec![0.5, 0.5],
            pi: 0.5,
            theta: 0.9,
            theta_prime: 0.1,
        };
        assert!(exact_clean_auc_risk(&p, &linear(&[1.0], 0.0), &LossKind::Sigmoid.into()).is_err());
    }

    #[test]
    fn argmin_first_on_ties() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmin(&[]), None);
    }
}
