//! Scalar arithmetic for the Transformer: an exact backend over sums of
//! square roots and a big-float backend with significant and guard bits.

mod adaptive;
mod bigfloat;
mod exact;
mod float;
mod radius;
mod rational;
mod surd;

use std::cmp::Ordering;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaptive::{certified_compare, compare_or_exact, Expr};
pub use bigfloat::BigFloat;
pub use exact::ExactBackend;
pub use float::{FloatBackend, FloatScalar, FloatMode};
pub use radius::Radius;
pub use rational::Rational;
pub use surd::{square_part, Surd, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum NumericError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("value not representable by this backend: {0}")]
    NotRepresentable(String),
}

/// Precision settings for the float backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub significant_bits: u32,
    pub guard_bits: u32,
    pub max_escalations: u32,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig { significant_bits: 64, guard_bits: 32, max_escalations: 8 }
    }
}

pub const GUARD_BITS_ENV: &str = "PTM_GUARD_BITS";

impl PrecisionConfig {
    pub const MIN_SIGNIFICANT_BITS: u32 = 8;

    pub fn new(significant_bits: u32, guard_bits: u32, max_escalations: u32) -> Result<Self, NumericError> {
        if significant_bits < Self::MIN_SIGNIFICANT_BITS {
            return Err(NumericError::NotRepresentable(format!(
                "significant_bits must be at least {}, got {significant_bits}",
                Self::MIN_SIGNIFICANT_BITS
            )));
        }
        Ok(PrecisionConfig { significant_bits, guard_bits, max_escalations })
    }

    /// Applies the `PTM_GUARD_BITS` override if it is set and parses.
    pub fn with_env_override(mut self) -> Self {
        if let Some(g) = std::env::var(GUARD_BITS_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            self.guard_bits = g;
        }
        self
    }
}

/// Similarity map applied to raw attention scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sim {
    Identity,
    /// `min(x, cap)`, i.e. `cap - ReLU(cap - x)`.
    Min(Rational),
}

/// Arithmetic used by the Transformer engine.
///
/// `approx` must be within relative error 2^-46 of the value the backend
/// compares with; the engine relies on it to prune attention candidates
/// before asking for exact or float comparisons.
pub trait Backend: Clone + Send + Sync + 'static {
    type Scalar: Clone + Debug + Send + Sync;
    /// Identity of a key vector for grouping positions with equal keys.
    type Key: Clone + Debug + Eq + Hash + Send + Sync;

    fn label(&self) -> String;

    fn from_rational(&self, q: &Rational) -> Self::Scalar;

    fn from_int(&self, n: i64) -> Self::Scalar {
        self.from_rational(&Rational::from_int(n))
    }

    fn zero(&self) -> Self::Scalar {
        self.from_int(0)
    }

    /// True only when `a` is known to be exactly zero; adding such a value
    /// may be skipped.
    fn is_zero(&self, _a: &Self::Scalar) -> bool {
        false
    }

    fn add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Result<Self::Scalar, NumericError>;
    fn sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Result<Self::Scalar, NumericError>;
    fn mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Result<Self::Scalar, NumericError>;
    fn div(&self, a: &Self::Scalar, b: &Self::Scalar) -> Result<Self::Scalar, NumericError>;
    fn neg(&self, a: &Self::Scalar) -> Self::Scalar;
    fn sqrt(&self, a: &Self::Scalar) -> Result<Self::Scalar, NumericError>;
    fn compare(&self, a: &Self::Scalar, b: &Self::Scalar) -> Result<Ordering, NumericError>;

    fn relu(&self, a: &Self::Scalar) -> Result<Self::Scalar, NumericError> {
        Ok(match self.compare(a, &self.zero())? {
            Ordering::Greater => a.clone(),
            _ => self.zero(),
        })
    }

    /// `v / |v|` with the zero vector mapped to itself.
    fn layer_norm(&self, v: &[Self::Scalar]) -> Result<Vec<Self::Scalar>, NumericError>;

    /// The positional value `p_i = 1 - ((i+1)(i+2)+1) / (sqrt((i+1)^2+1) sqrt((i+2)^2+1))`.
    fn positional(&self, i: usize) -> Result<Self::Scalar, NumericError>;

    fn approx(&self, a: &Self::Scalar) -> f64;

    /// Exact rational value when the backend knows it.
    fn to_rational(&self, a: &Self::Scalar) -> Option<Rational>;

    fn key(&self, v: &[Self::Scalar]) -> Option<Self::Key>;

    /// Slack for f64 candidate screening, relative to `Σ |q_d| |k_d|`.
    fn screen_tolerance(&self) -> f64;

    fn render(&self, a: &Self::Scalar) -> String;

    fn dot(&self, q: &[Self::Scalar], k: &[Self::Scalar]) -> Result<Self::Scalar, NumericError> {
        let mut acc = self.zero();
        for (a, b) in q.iter().zip(k) {
            acc = self.add(&acc, &self.mul(a, b)?)?;
        }
        Ok(acc)
    }

    fn apply_sim(&self, x: Self::Scalar, sim: &Sim) -> Result<Self::Scalar, NumericError> {
        match sim {
            Sim::Identity => Ok(x),
            Sim::Min(c) => {
                let c = self.from_rational(c);
                Ok(if self.compare(&x, &c)? == Ordering::Less { x } else { c })
            }
        }
    }

    /// Indices of `keys` whose similarity with `q` is maximal.
    fn select_max(
        &self,
        q: &[Self::Scalar],
        keys: &[&[Self::Scalar]],
        sim: &Sim,
    ) -> Result<Vec<usize>, NumericError> {
        let mut scores = Vec::with_capacity(keys.len());
        for k in keys {
            scores.push(self.apply_sim(self.dot(q, k)?, sim)?);
        }
        let mut best = 0;
        for j in 1..scores.len() {
            if self.compare(&scores[j], &scores[best])? == Ordering::Greater {
                best = j;
            }
        }
        let mut out = Vec::new();
        for (j, s) in scores.iter().enumerate() {
            if j == best || self.compare(s, &scores[best])? != Ordering::Less {
                out.push(j);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_tiny_mantissa() {
        assert!(PrecisionConfig::new(7, 0, 0).is_err());
        assert!(PrecisionConfig::new(8, 0, 0).is_ok());
    }
}
