//! Relative information (Kullback-Leibler divergence), Shannon entropy, and
//! their population-level variants.
//!
//! `+infinity` is a legitimate return value here, not an error: a divergence
//! against a reference with smaller support starts infinite and can drop to a
//! finite value as the trajectory moves, and monitors must be able to record
//! that.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("weights sum to {sum}, which is more than 1e-9 away from 1")]
    OffSimplex { sum: f64 },
    #[error("all-zero input cannot be normalized")]
    AllZero,
}

/// A probability distribution on a finite set.
///
/// Construction checks the simplex constraints (nonnegative entries, total
/// within `1e-9` of one) and then normalizes exactly, so downstream code can
/// rely on the weights summing to one up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    weights: Vec<f64>,
}

impl ProbDist {
    pub fn new(weights: Vec<f64>) -> Result<Self, InfoError> {
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(InfoError::NonFinite { index });
            }
            if w < 0.0 {
                return Err(InfoError::NegativeEntry { index, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum == 0.0 {
            return Err(InfoError::AllZero);
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(InfoError::OffSimplex { sum });
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { weights })
    }

    /// The uniform distribution on `n` outcomes.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one outcome");
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A vector of nonnegative population sizes or concentrations. Unlike
/// [`ProbDist`] there is no normalization constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    counts: Vec<f64>,
}

impl Population {
    pub fn new(counts: Vec<f64>) -> Result<Self, InfoError> {
        for (index, &c) in counts.iter().enumerate() {
            if !c.is_finite() {
                return Err(InfoError::NonFinite { index });
            }
            if c < 0.0 {
                return Err(InfoError::NegativeEntry { index, value: c });
            }
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// `I(p, q) = Σ pᵢ ln(pᵢ/qᵢ)`, the information of `p` relative to `q`.
///
/// Conventions: terms with `pᵢ = 0` contribute nothing; `pᵢ > 0` with
/// `qᵢ = 0` makes the result `+inf`. The result is nonnegative and vanishes
/// exactly when `p = q` componentwise.
pub fn relative_information(p: &ProbDist, q: &ProbDist) -> Result<f64, InfoError> {
    if p.len() != q.len() {
        return Err(InfoError::DimensionMismatch(p.len(), q.len()));
    }
    Ok(relative_information_raw(p.weights(), q.weights()))
}

/// `S(p) = −Σ pᵢ ln pᵢ`, in `[0, ln n]`.
pub fn shannon_entropy(p: &ProbDist) -> f64 {
    let mut acc = 0.0;
    for &w in p.weights() {
        if w > 0.0 {
            acc -= w * w.ln();
        }
    }
    acc
}

/// Relative information for (unnormalized) populations:
/// `Σ [Pᵢ ln(Pᵢ/Qᵢ) − (Pᵢ − Qᵢ)]`.
///
/// Each summand is nonnegative, so the total is too, and it vanishes exactly
/// when `P = Q`. When both arguments happen to be probability distributions
/// the linear terms cancel and this reduces to [`relative_information`].
pub fn population_relative_information(p: &Population, q: &Population) -> Result<f64, InfoError> {
    if p.len() != q.len() {
        return Err(InfoError::DimensionMismatch(p.len(), q.len()));
    }
    Ok(population_relative_information_raw(p.counts(), q.counts()))
}

/// Slice-level kernel behind [`relative_information`].
///
/// Intended for trajectory monitors, where the state is raw integrator output:
/// entries at or below zero are treated as exactly zero. The `0 ln 0` case is
/// handled by branching, never by evaluating `ln(0)`.
pub fn relative_information_raw(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).ln();
    }
    acc
}

/// Slice-level kernel behind [`population_relative_information`].
pub fn population_relative_information_raw(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let pi = pi.max(0.0);
        let qi = qi.max(0.0);
        if pi == 0.0 {
            acc += qi;
        } else if qi == 0.0 {
            return f64::INFINITY;
        } else {
            acc += pi * (pi / qi).ln() - (pi - qi);
        }
    }
    acc
}
