//! Probability vectors over class labels and their information measures.
//!
//! A [`LabelDistribution`] is the "soft label" of one item: how probable each
//! class is according to some population of judges. Construction validates
//! instead of silently renormalizing, so any smoothing has to be explicit at
//! the call site.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on |sum − 1| accepted at construction.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Index of one class, in `[0, K)` for whatever `K` the context defines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub usize);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A validated probability vector over `K ≥ 2` classes.
///
/// Entries are non-negative and sum to 1 within [`NORMALIZATION_TOLERANCE`].
/// All operations are pure; values are immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    /// Validate `probs` as a distribution. Entries are stored untouched.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewClasses { len: probs.len() });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(Error::NegativeEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    /// Distribution with all mass on `class`.
    pub fn one_hot(class: ClassLabel, classes: usize) -> Result<Self> {
        if class.index() >= classes {
            return Err(Error::ClassOutOfRange {
                class: class.index(),
                classes,
            });
        }
        let mut probs = vec![0.0; classes];
        probs[class.index()] = 1.0;
        Self::new(probs)
    }

    /// Uniform distribution over `classes` classes.
    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0 / classes as f64; classes])
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, class: ClassLabel) -> Result<f64> {
        self.probs
            .get(class.index())
            .copied()
            .ok_or(Error::ClassOutOfRange {
                class: class.index(),
                classes: self.k(),
            })
    }

    /// Most probable class; ties break toward the lowest index.
    pub fn argmax(&self) -> ClassLabel {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        ClassLabel(best)
    }

    /// Shannon entropy in nats, with the convention 0·log 0 = 0.
    pub fn entropy(&self) -> f64 {
        let mut total = 0.0;
        for &p in &self.probs {
            if p > 0.0 {
                total -= p * p.ln();
            }
        }
        total
    }

    /// KL divergence D(self ‖ q) in nats: Σ p·ln(p/q), with 0·ln(0/q) = 0.
    ///
    /// Errors with [`Error::UnsupportedDivergence`] when q puts zero mass
    /// where self puts positive mass.
    pub fn kl_divergence(&self, q: &LabelDistribution) -> Result<f64> {
        if self.k() != q.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: q.k(),
            });
        }
        let mut total = 0.0;
        for (index, (&p, &qv)) in self.probs.iter().zip(q.probs.iter()).enumerate() {
            if p == 0.0 {
                continue;
            }
            if qv == 0.0 {
                return Err(Error::UnsupportedDivergence { index });
            }
            total += p * (p / qv).ln();
        }
        Ok(total)
    }

    /// Collapse to two classes: (P(positive), 1 − P(positive)).
    pub fn collapse_to_binary(&self, positive: ClassLabel) -> Result<LabelDistribution> {
        let p = self.prob(positive)?;
        LabelDistribution::new(vec![p, 1.0 - p])
    }
}

impl TryFrom<Vec<f64>> for LabelDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<LabelDistribution> for Vec<f64> {
    fn from(d: LabelDistribution) -> Vec<f64> {
        d.probs
    }
}
