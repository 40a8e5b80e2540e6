//! Pairwise AUC risk over corrupted positive/negative sets, its gradient,
//! and Adam training of a [`RankerModel`].

mod adam;
mod model;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use model::{Architecture, RankerModel};

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec};
use crate::text::FeatureMatrix;

fn check_sets(model: &RankerModel, cp: &FeatureMatrix, cn: &FeatureMatrix) -> Result<()> {
    if cp.rows() == 0 {
        return Err(Error::Empty("corrupted-positive set"));
    }
    if cn.rows() == 0 {
        return Err(Error::Empty("corrupted-negative set"));
    }
    for m in [cp, cn] {
        if m.cols() != model.input_dim() {
            return Err(Error::InputDimension {
                expected: model.input_dim(),
                found: m.cols(),
            });
        }
    }
    Ok(())
}

/// Mean of `ℓ(s_i − s_j)` over every (positive score, negative score) pair.
pub fn pairwise_risk(pos_scores: &[f64], neg_scores: &[f64], loss: &LossSpec) -> f64 {
    let mut total = 0.0;
    for &sp in pos_scores {
        let mut row = 0.0;
        for &sn in neg_scores {
            row += loss.value(sp - sn);
        }
        total += row;
    }
    total / (pos_scores.len() as f64 * neg_scores.len() as f64)
}

/// Exact empirical corrupted AUC risk, `1/(n_CP n_CN) ΣΣ ℓ(g(x_i) − g(x_j))`.
pub fn empirical_corrupted_risk(
    model: &RankerModel,
    cp: &FeatureMatrix,
    cn: &FeatureMatrix,
    loss: &LossSpec,
) -> Result<f64> {
    check_sets(model, cp, cn)?;
    Ok(pairwise_risk(&model.scores(cp)?, &model.scores(cn)?, loss))
}

/// Exact gradient of [`empirical_corrupted_risk`] with respect to the model
/// parameters.
pub fn risk_gradient(
    model: &RankerModel,
    cp: &FeatureMatrix,
    cn: &FeatureMatrix,
    loss: &LossSpec,
) -> Result<Vec<f64>> {
    check_sets(model, cp, cn)?;
    if !loss.is_differentiable() {
        return Err(Error::NonDifferentiable(loss.kind().name()));
    }
    let sp = model.scores(cp)?;
    let sn = model.scores(cn)?;
    let scale = 1.0 / (sp.len() as f64 * sn.len() as f64);
    // Σ_ij ℓ'(z_ij)(∇g_i − ∇g_j) = Σ_i a_i ∇g_i − Σ_j b_j ∇g_j
    let mut a = vec![0.0; sp.len()];
    let mut b = vec![0.0; sn.len()];
    for (i, &si) in sp.iter().enumerate() {
        for (j, &sj) in sn.iter().enumerate() {
            let c = loss.grad_unchecked(si - sj) * scale;
            a[i] += c;
            b[j] += c;
        }
    }
    let mut grad = vec![0.0; model.params().len()];
    for (i, x) in cp.iter_rows().enumerate() {
        model.accumulate_grad(x, a[i], &mut grad);
    }
    for (j, x) in cn.iter_rows().enumerate() {
        model.accumulate_grad(x, -b[j], &mut grad);
    }
    Ok(grad)
}

/// Gradient and risk of the mean loss over the given `(cp, cn)` pairs.
pub fn batch_gradient(
    model: &RankerModel,
    cp: &FeatureMatrix,
    cn: &FeatureMatrix,
    pairs: &[(usize, usize)],
    loss: &LossSpec,
    grad: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    let scale = 1.0 / pairs.len() as f64;
    let mut risk = 0.0;
    for &(i, j) in pairs {
        let (xi, xj) = (cp.row(i), cn.row(j));
        let z = model.score_unchecked(xi) - model.score_unchecked(xj);
        risk += loss.value(z);
        let c = loss.grad_unchecked(z) * scale;
        model.accumulate_grad(xi, c, grad);
        model.accumulate_grad(xj, -c, grad);
    }
    risk * scale
}

/// Draws `batch_pairs` index pairs uniformly, with replacement, from the
/// `n_cp × n_cn` grid.
pub fn sample_pair_batch<R: Rng>(
    rng: &mut R,
    n_cp: usize,
    n_cn: usize,
    batch_pairs: usize,
) -> Result<Vec<(usize, usize)>> {
    if n_cp == 0 || n_cn == 0 {
        return Err(Error::Empty("pair grid"));
    }
    if batch_pairs == 0 {
        return Err(Error::invalid("batch_pairs must be at least 1"));
    }
    Ok((0..batch_pairs)
        .map(|_| (rng.random_range(0..n_cp), rng.random_range(0..n_cn)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_pairs: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_steps_per_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossSpec::new(LossKind::Sigmoid),
            learning_rate: 1e-3,
            weight_decay: 0.003,
            batch_pairs: 64,
            epochs: 20,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_steps_per_epoch: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.loss.is_differentiable() {
            return Err(Error::NonDifferentiable(self.loss.kind().name()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate must be a finite non-negative number",
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(
                "weight_decay must be a finite non-negative number",
            ));
        }
        if self.batch_pairs == 0 || self.epochs == 0 || self.max_steps_per_epoch == 0 {
            return Err(Error::invalid(
                "batch_pairs, epochs and max_steps_per_epoch must be positive",
            ));
        }
        for (name, beta) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::invalid("adam_eps must be positive"));
        }
        Ok(())
    }

    /// `⌈n_cp·n_cn / batch_pairs⌉`, capped at `max_steps_per_epoch`.
    pub fn steps_per_epoch(&self, n_cp: usize, n_cn: usize) -> usize {
        let pairs = n_cp as u128 * n_cn as u128;
        let steps = pairs.div_ceil(self.batch_pairs as u128);
        steps.min(self.max_steps_per_epoch as u128) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_risk: f64,
    /// Full-data empirical corrupted risk after each epoch.
    pub risk_trace: Vec<f64>,
    pub final_params: Vec<f64>,
    pub wall_clock: Duration,
    pub seed: u64,
}

impl TrainReport {
    /// `epoch,risk` CSV with epoch 0 holding the initial risk.
    pub fn risk_trace_csv(&self) -> String {
        let mut out = String::from("epoch,risk\n");
        out.push_str(&format!("0,{}\n", self.initial_risk));
        for (e, r) in self.risk_trace.iter().enumerate() {
            out.push_str(&format!("{},{r}\n", e + 1));
        }
        out
    }
}

/// Minimizes the empirical corrupted risk from `initial` with Adam over
/// uniformly sampled pair batches.
pub fn train(
    initial: RankerModel,
    cp: &FeatureMatrix,
    cn: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<(RankerModel, TrainReport)> {
    config.validate()?;
    check_sets(&initial, cp, cn)?;
    let start = Instant::now();
    let mut model = initial;
    let loss = config.loss;
    let initial_risk = empirical_corrupted_risk(&model, cp, cn, &loss)?;
    if !initial_risk.is_finite() {
        return Err(Error::NonFiniteRisk {
            epoch: 0,
            step: 0,
            value: initial_risk,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(
        model.params().len(),
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
        config.weight_decay,
    );
    let mask = model.decay_mask();
    let steps = config.steps_per_epoch(cp.rows(), cn.rows());
    let mut grad = vec![0.0; model.params().len()];
    let mut risk_trace = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        for step in 1..=steps {
            let pairs = sample_pair_batch(&mut rng, cp.rows(), cn.rows(), config.batch_pairs)?;
            let batch_risk = batch_gradient(&model, cp, cn, &pairs, &loss, &mut grad);
            if !batch_risk.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteRisk {
                    epoch,
                    step,
                    value: batch_risk,
                });
            }
            adam.step(model.params_mut(), &grad, &mask);
        }
        let risk = empirical_corrupted_risk(&model, cp, cn, &loss)?;
        if !risk.is_finite() {
            return Err(Error::NonFiniteRisk {
                epoch,
                step: steps,
                value: risk,
            });
        }
        log::debug!("epoch {epoch}: corrupted risk {risk}");
        risk_trace.push(risk);
    }

    let report = TrainReport {
        initial_risk,
        risk_trace,
        final_params: model.params().to_vec(),
        wall_clock: start.elapsed(),
        seed: config.seed,
    };
    Ok((model, report))
}
