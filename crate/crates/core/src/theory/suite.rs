use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    argmin, exact_clean_auc_risk, exact_corrupted_auc_risk, verify_affine_identity,
    verify_decomposition, DiscreteProblem,
};
use crate::error::Result;
use crate::losses::{LossKind, LossSpec};
use crate::ranker::{Architecture, RankerModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    /// Random (problem, model) pairs per identity check.
    pub instances: usize,
    pub tol: f64,
    pub seed: u64,
    pub support_size: usize,
    pub dim: usize,
    pub candidates: usize,
    pub argmin_problems: usize,
    /// Adds a `θ = θ′` instance to the identity checks.
    pub inject_equal_gap: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            tol: 1e-10,
            seed: 0,
            support_size: 6,
            dim: 3,
            candidates: 20,
            argmin_problems: 50,
            inject_equal_gap: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    /// Worst residual over all instances (mismatch count for argmin).
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, residual: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tol,
            passed: residual <= tol,
        }
    }

    /// `PASS|FAIL <name> residual=<value> tol=<value>`
    pub fn line(&self) -> String {
        format!(
            "{} {} residual={:e} tol={:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tol
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn random_linear_model<R: Rng>(rng: &mut R, dim: usize) -> RankerModel {
    let params = (0..=dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    RankerModel::from_params(Architecture::Linear, dim, params).expect("dim + 1 params")
}

/// `θ′ ~ U[0, 1 − gap)`, `θ ~ U[θ′ + gap, 1]`.
pub fn random_contamination<R: Rng>(rng: &mut R, min_gap: f64) -> (f64, f64) {
    let theta_prime = rng.random_range(0.0..1.0 - min_gap);
    let theta = rng.random_range(theta_prime + min_gap..=1.0);
    (theta, theta_prime)
}

fn instances(cfg: &SuiteConfig, stream: u64) -> Vec<(DiscreteProblem, RankerModel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stream);
    let mut out: Vec<_> = (0..cfg.instances)
        .map(|_| {
            let (t, tp) = random_contamination(&mut rng, 0.0);
            let p = DiscreteProblem::random(&mut rng, cfg.support_size, cfg.dim, t, tp);
            (p, random_linear_model(&mut rng, cfg.dim))
        })
        .collect();
    if cfg.inject_equal_gap {
        let p = DiscreteProblem::random(&mut rng, cfg.support_size, cfg.dim, 0.5, 0.5);
        out.push((p, random_linear_model(&mut rng, cfg.dim)));
    }
    out
}

/// Over random problems, whether the candidate minimizing the corrupted
/// risk also minimizes the clean risk. Returns the number of mismatches.
pub fn argmin_mismatches(
    loss: &LossSpec,
    problems: usize,
    candidates: usize,
    min_gap: f64,
    cfg: &SuiteConfig,
) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa4);
    let models: Vec<RankerModel> = (0..candidates)
        .map(|_| random_linear_model(&mut rng, cfg.dim))
        .collect();
    let mut mismatches = 0;
    for _ in 0..problems {
        let (t, tp) = random_contamination(&mut rng, min_gap);
        let p = DiscreteProblem::random(&mut rng, cfg.support_size, cfg.dim, t, tp);
        let clean = models
            .iter()
            .map(|m| exact_clean_auc_risk(&p, m, loss))
            .collect::<Result<Vec<_>>>()?;
        let corrupted = models
            .iter()
            .map(|m| exact_corrupted_auc_risk(&p, m, loss))
            .collect::<Result<Vec<_>>>()?;
        if argmin(&clean) != argmin(&corrupted) {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

/// Runs every exact-risk identity on fresh random instances.
pub fn run_identity_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    for (stream, kind) in [(1, LossKind::Sigmoid), (2, LossKind::ZeroOne)] {
        let loss = LossSpec::new(kind);
        let mut worst = 0.0f64;
        for (i, (p, g)) in instances(cfg, stream).iter().enumerate() {
            if !p.is_identifiable() {
                warnings.push(format!(
                    "instance {i}: theta = theta_prime = {}; corrupted risk is constant",
                    p.theta
                ));
            }
            worst = worst.max(verify_affine_identity(p, g, &loss, cfg.tol)?.residual);
        }
        checks.push(CheckOutcome::new(
            &format!("affine_identity_{}", kind.name()),
            worst,
            cfg.tol,
        ));
    }

    for (stream, kind) in [
        (3, LossKind::Logistic),
        (4, LossKind::Squared),
        (5, LossKind::Sigmoid),
    ] {
        let loss = LossSpec::new(kind);
        let mut worst = 0.0f64;
        for (p, g) in &instances(cfg, stream) {
            worst = worst.max(verify_decomposition(p, g, &loss, cfg.tol)?.0.residual);
        }
        checks.push(CheckOutcome::new(
            &format!("decomposition_{}", kind.name()),
            worst,
            cfg.tol,
        ));
    }

    let mut worst = 0.0f64;
    for (p, g) in instances(
        &SuiteConfig {
            inject_equal_gap: false,
            ..cfg.clone()
        },
        6,
    ) {
        let p = DiscreteProblem {
            theta: 1.0,
            theta_prime: 0.0,
            ..p
        };
        for kind in LossKind::ALL {
            let loss = LossSpec::new(kind);
            let diff =
                exact_corrupted_auc_risk(&p, &g, &loss)? - exact_clean_auc_risk(&p, &g, &loss)?;
            worst = worst.max(diff.abs());
        }
    }
    checks.push(CheckOutcome::new("clean_reduction", worst, cfg.tol));

    let mismatches = argmin_mismatches(
        &LossSpec::new(LossKind::Sigmoid),
        cfg.argmin_problems,
        cfg.candidates,
        0.1,
        cfg,
    )?;
    checks.push(CheckOutcome::new(
        "argmin_preservation",
        mismatches as f64,
        0.0,
    ));

    Ok(SuiteReport { checks, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_identity_suite(&SuiteConfig::default()).unwrap();
        assert_eq!(report.checks.len(), 7);
        assert!(report.all_passed(), "{report:?}");
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn equal_gap_warns_without_failing() {
        let cfg = SuiteConfig {
            instances: 5,
            inject_equal_gap: true,
            ..Default::default()
        };
        let report = run_identity_suite(&cfg).unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.warnings.len(), 2);
    }

    #[test]
    fn zero_tolerance_fails_on_rounding() {
        let cfg = SuiteConfig {
            instances: 20,
            tol: 0.0,
            ..Default::default()
        };
        let report = run_identity_suite(&cfg).unwrap();
        assert!(!report.all_passed());
        let line = report.checks[0].line();
        assert!(
            line.starts_with("FAIL affine_identity_sigmoid residual="),
            "{line}"
        );
    }

    #[test]
    fn contamination_respects_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let (t, tp) = random_contamination(&mut rng, 0.1);
            assert!(t - tp >= 0.1 && t <= 1.0 && tp >= 0.0);
        }
    }
}
