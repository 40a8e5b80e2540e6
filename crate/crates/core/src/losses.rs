//! Margin losses `ℓ(z)` with `z` the score difference of a pair.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    Sigmoid,
    Logistic,
    Squared,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::ZeroOne,
        LossKind::Sigmoid,
        LossKind::Logistic,
        LossKind::Squared,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::Sigmoid => "sigmoid",
            LossKind::Logistic => "logistic",
            LossKind::Squared => "squared",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss {s:?}")))
    }
}

/// A margin loss together with its symmetry constant, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    kind: LossKind,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.kind, LossKind::ZeroOne | LossKind::Sigmoid)
    }

    /// `K` in `ℓ(z) + ℓ(−z) = K`, for symmetric losses.
    pub fn symmetry_constant(&self) -> Option<f64> {
        self.is_symmetric().then_some(1.0)
    }

    pub fn is_differentiable(&self) -> bool {
        self.kind != LossKind::ZeroOne
    }

    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::ZeroOne => -0.5 * sign(z) + 0.5,
            // 1 / (1 + e^z)
            LossKind::Sigmoid => logistic_sigmoid(-z),
            // log(1 + e^{-z})
            LossKind::Logistic => {
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            LossKind::Squared => (1.0 - z) * (1.0 - z),
        }
    }

    pub fn grad(&self, z: f64) -> Result<f64> {
        Ok(match self.kind {
            LossKind::ZeroOne => return Err(Error::NonDifferentiable("zero_one")),
            LossKind::Sigmoid => {
                let s = logistic_sigmoid(z);
                -s * (1.0 - s)
            }
            LossKind::Logistic => -logistic_sigmoid(-z),
            LossKind::Squared => -2.0 * (1.0 - z),
        })
    }

    /// Derivative without the differentiability check; callers validate the
    /// spec once up front.
    pub(crate) fn grad_unchecked(&self, z: f64) -> f64 {
        self.grad(z).unwrap_or(f64::NAN)
    }
}

impl From<LossKind> for LossSpec {
    fn from(kind: LossKind) -> Self {
        LossSpec::new(kind)
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1 / (1 + e^{-z})` without overflow.
pub fn logistic_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetryCheck {
    Symmetric { k: f64 },
    Violation { z: f64, deviation: f64 },
}

/// Checks `ℓ(z) + ℓ(−z) = 2ℓ(0)` over the grid and reports the worst point.
pub fn verify_symmetry(spec: &LossSpec, grid: &[f64], tol: f64) -> Result<SymmetryCheck> {
    if grid.is_empty() {
        return Err(Error::Empty("symmetry grid"));
    }
    let k = 2.0 * spec.value(0.0);
    let (z, deviation) = grid
        .iter()
        .map(|&z| (z, (spec.value(z) + spec.value(-z) - k).abs()))
        .fold(
            (grid[0], -1.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    Ok(if deviation <= tol {
        SymmetryCheck::Symmetric { k }
    } else {
        SymmetryCheck::Violation { z, deviation }
    })
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: LossKind) -> LossSpec {
        LossSpec::new(kind)
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(spec(LossKind::Sigmoid).value(0.0), 0.5);
        assert_eq!(spec(LossKind::ZeroOne).value(0.0), 0.5);
        assert!((spec(LossKind::Logistic).value(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(spec(LossKind::Squared).value(0.0), 1.0);
    }

    #[test]
    fn zero_one_values() {
        let l = spec(LossKind::ZeroOne);
        assert_eq!(l.value(3.0), 0.0);
        assert_eq!(l.value(-1e-300), 1.0);
    }

    #[test]
    fn gradients() {
        assert_eq!(spec(LossKind::Sigmoid).grad(0.0).unwrap(), -0.25);
        assert_eq!(spec(LossKind::Squared).grad(1.0).unwrap(), 0.0);
        assert_eq!(spec(LossKind::Logistic).grad(0.0).unwrap(), -0.5);
        assert!(matches!(
            spec(LossKind::ZeroOne).grad(1.0),
            Err(Error::NonDifferentiable(_))
        ));
    }

    #[test]
    fn logistic_grad_matches_finite_difference_at_three() {
        let l = spec(LossKind::Logistic);
        let h = 1e-5;
        let fd = (l.value(3.0 + h) - l.value(3.0 - h)) / (2.0 * h);
        let g = l.grad(3.0).unwrap();
        assert!(((g - fd) / g).abs() < 1e-6, "{g} vs {fd}");
    }

    #[test]
    fn no_overflow_at_extremes() {
        for z in [-700.0, -1e4, 700.0, 1e4] {
            for kind in [LossKind::Logistic, LossKind::Sigmoid] {
                let v = spec(kind).value(z);
                let g = spec(kind).grad(z).unwrap();
                assert!(v.is_finite() && g.is_finite(), "{kind} at {z}");
            }
        }
        assert!((spec(LossKind::Logistic).value(-700.0) - 700.0).abs() < 1e-9);
    }

    #[test]
    fn symmetry_verdicts() {
        let grid = linspace(-10.0, 10.0, 201);
        assert_eq!(
            verify_symmetry(&spec(LossKind::Sigmoid), &grid, 1e-12).unwrap(),
            SymmetryCheck::Symmetric { k: 1.0 }
        );
        let no_zero: Vec<f64> = grid.iter().copied().filter(|&z| z != 0.0).collect();
        assert_eq!(
            verify_symmetry(&spec(LossKind::ZeroOne), &no_zero, 0.0).unwrap(),
            SymmetryCheck::Symmetric { k: 1.0 }
        );
        match verify_symmetry(&spec(LossKind::Logistic), &grid, 1e-12).unwrap() {
            SymmetryCheck::Violation { z, deviation } => {
                assert_eq!(z.abs(), 10.0);
                assert!(deviation > 1.0);
            }
            other => panic!("{other:?}"),
        }
        let l = spec(LossKind::Logistic);
        assert!((l.value(5.0) + l.value(-5.0) - 5.013_430_696_978_236).abs() < 1e-12);
        assert!(verify_symmetry(&l, &[], 1.0).is_err());
    }

    #[test]
    fn parse_names() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
