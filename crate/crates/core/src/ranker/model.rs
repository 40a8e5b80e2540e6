use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// `w·x + b`
    Linear,
    /// `w₂·tanh(W₁x + b₁) + b₂`
    Mlp1 { hidden: usize },
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Linear => f.write_str("linear"),
            Architecture::Mlp1 { .. } => f.write_str("mlp1"),
        }
    }
}

/// A scoring function `g: ℝ^d → ℝ` with a flat parameter vector.
///
/// Parameter order, which is also the model-file order:
/// * linear: `w[0..d]`, then `b`.
/// * mlp1: `W₁` row-major (`hidden × d`), `b₁[0..hidden]`,
///   `w₂[0..hidden]`, then `b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    architecture: Architecture,
    input_dim: usize,
    params: Vec<f64>,
}

impl RankerModel {
    pub fn param_count(architecture: Architecture, input_dim: usize) -> usize {
        match architecture {
            Architecture::Linear => input_dim + 1,
            Architecture::Mlp1 { hidden } => hidden * input_dim + 2 * hidden + 1,
        }
    }

    pub fn from_params(
        architecture: Architecture,
        input_dim: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if let Architecture::Mlp1 { hidden: 0 } = architecture {
            return Err(Error::invalid("hidden dimension must be positive"));
        }
        let expected = Self::param_count(architecture, input_dim);
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "{architecture} model with input dimension {input_dim} needs {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            architecture,
            input_dim,
            params,
        })
    }

    /// Linear models start at zero; mlp1 weights are drawn uniformly from
    /// `±1/√fan_in` of their layer.
    pub fn init(architecture: Architecture, input_dim: usize, seed: u64) -> Result<Self> {
        let n = Self::param_count(architecture, input_dim);
        let params = match architecture {
            Architecture::Linear => vec![0.0; n],
            Architecture::Mlp1 { hidden } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let first = hidden * input_dim + hidden;
                let a1 = 1.0 / (input_dim as f64).sqrt();
                let a2 = 1.0 / (hidden.max(1) as f64).sqrt();
                (0..n)
                    .map(|i| {
                        let a = if i < first { a1 } else { a2 };
                        rng.random_range(-a..=a)
                    })
                    .collect()
            }
        };
        Self::from_params(architecture, input_dim, params)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `true` for parameters subject to weight decay (everything but biases).
    pub fn decay_mask(&self) -> Vec<bool> {
        let d = self.input_dim;
        match self.architecture {
            Architecture::Linear => (0..=d).map(|i| i < d).collect(),
            Architecture::Mlp1 { hidden } => {
                let w1 = hidden * d;
                (0..self.params.len())
                    .map(|i| i < w1 || (w1 + hidden..w1 + 2 * hidden).contains(&i))
                    .collect()
            }
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::InputDimension {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.input_dim;
        let p = &self.params;
        match self.architecture {
            Architecture::Linear => dot(&p[..d], x) + p[d],
            Architecture::Mlp1 { hidden } => {
                let w1 = hidden * d;
                let mut out = p[w1 + 2 * hidden];
                for h in 0..hidden {
                    let a = dot(&p[h * d..(h + 1) * d], x) + p[w1 + h];
                    out += p[w1 + hidden + h] * a.tanh();
                }
                out
            }
        }
    }

    pub fn scores(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.rows() > 0 && features.cols() != self.input_dim {
            return Err(Error::InputDimension {
                expected: self.input_dim,
                found: features.cols(),
            });
        }
        Ok(features
            .iter_rows()
            .map(|x| self.score_unchecked(x))
            .collect())
    }

    /// Adds `coef · ∇g(x)` to `grad`.
    pub(crate) fn accumulate_grad(&self, x: &[f64], coef: f64, grad: &mut [f64]) {
        let d = self.input_dim;
        match self.architecture {
            Architecture::Linear => {
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += coef * xi;
                }
                grad[d] += coef;
            }
            Architecture::Mlp1 { hidden } => {
                let p = &self.params;
                let w1 = hidden * d;
                for h in 0..hidden {
                    let t = (dot(&p[h * d..(h + 1) * d], x) + p[w1 + h]).tanh();
                    let w2 = p[w1 + hidden + h];
                    grad[w1 + hidden + h] += coef * t;
                    let back = coef * w2 * (1.0 - t * t);
                    for (g, xi) in grad[h * d..(h + 1) * d].iter_mut().zip(x) {
                        *g += back * xi;
                    }
                    grad[w1 + h] += back;
                }
                grad[w1 + 2 * hidden] += coef;
            }
        }
    }

    pub fn render(&self) -> String {
        let mut out = match self.architecture {
            Architecture::Linear => format!("ranker-v1 linear {}\n", self.input_dim),
            Architecture::Mlp1 { hidden } => {
                format!("ranker-v1 mlp1 {} {hidden}\n", self.input_dim)
            }
        };
        for p in &self.params {
            // Display prints the shortest string that parses back exactly.
            let _ = writeln!(out, "{p}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::format("model", m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(format!("bad dimension {s:?}")))
        };
        let (architecture, input_dim) = match fields.as_slice() {
            ["ranker-v1", "linear", d] => (Architecture::Linear, parse_dim(d)?),
            ["ranker-v1", "mlp1", d, h] => (
                Architecture::Mlp1 {
                    hidden: parse_dim(h)?,
                },
                parse_dim(d)?,
            ),
            _ => return Err(bad(format!("unrecognized header {header:?}"))),
        };
        let params = lines
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad parameter {l:?}", i + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(architecture, input_dim, params).map_err(|e| bad(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_scores() {
        let m = RankerModel::from_params(Architecture::Linear, 2, vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(m.score(&[2.0, 1.0]).unwrap(), 1.0);
        let zero = RankerModel::init(Architecture::Linear, 3, 7).unwrap();
        assert_eq!(zero.score(&[5.0, -2.0, 9.0]).unwrap(), 0.0);
        assert!(matches!(
            m.score(&[1.0]),
            Err(Error::InputDimension {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn mlp_matches_hand_rolled_forward_pass() {
        let arch = Architecture::Mlp1 { hidden: 3 };
        let m = RankerModel::init(arch, 2, 11).unwrap();
        let p = m.params();
        // W1 = p[0..6] (3x2), b1 = p[6..9], w2 = p[9..12], b2 = p[12]
        let x = [0.3, -1.7];
        let mut expected = p[12];
        for h in 0..3 {
            let pre = p[2 * h] * x[0] + p[2 * h + 1] * x[1] + p[6 + h];
            expected += p[9 + h] * pre.tanh();
        }
        assert!((m.score(&x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn mlp_init_is_seeded_and_bounded() {
        let arch = Architecture::Mlp1 { hidden: 4 };
        let a = RankerModel::init(arch, 9, 3).unwrap();
        assert_eq!(a, RankerModel::init(arch, 9, 3).unwrap());
        assert_ne!(a, RankerModel::init(arch, 9, 4).unwrap());
        assert!(a.params()[..40].iter().all(|w| w.abs() <= 1.0 / 3.0));
        assert!(a.params()[40..].iter().all(|w| w.abs() <= 0.5));
    }

    #[test]
    fn decay_mask_excludes_biases() {
        let m = RankerModel::init(Architecture::Linear, 2, 0).unwrap();
        assert_eq!(m.decay_mask(), [true, true, false]);
        let m = RankerModel::init(Architecture::Mlp1 { hidden: 2 }, 1, 0).unwrap();
        // W1 (2), b1 (2), w2 (2), b2
        assert_eq!(
            m.decay_mask(),
            [true, true, false, false, true, true, false]
        );
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let m = RankerModel::init(Architecture::Mlp1 { hidden: 2 }, 3, 99).unwrap();
        let text = m.render();
        assert!(text.starts_with("ranker-v1 mlp1 3 2\n"));
        assert_eq!(RankerModel::parse(&text).unwrap(), m);
        let lin = RankerModel::from_params(Architecture::Linear, 1, vec![0.1, -3e-300]).unwrap();
        assert_eq!(
            lin.render(),
            format!("ranker-v1 linear 1\n0.1\n{}\n", -3e-300)
        );
        assert_eq!(RankerModel::parse(&lin.render()).unwrap(), lin);
        assert!(RankerModel::parse("ranker-v1 linear 2\n1\n2\n").is_err());
        assert!(RankerModel::parse("ranker-v2 linear 1\n1\n2\n").is_err());
    }
}
