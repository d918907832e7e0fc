//! Compactly supported probability measures stored as weighted atoms.
//!
//! Every transform in this crate (moments, Cauchy transform, K-function)
//! is exact for atomic measures, so atoms are the only stored
//! representation. Continuous laws (semicircle, arcsine, Marchenko-Pastur)
//! enter tests as closed-form references only.

use thiserror::Error;

/// Atoms closer than this are merged during canonicalization.
pub const MERGE_TOL: f64 = 1e-12;

/// Maximum allowed deviation of the weight sum from 1 before construction
/// is rejected instead of renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measure must have at least one atom")]
    Empty,
    #[error("atoms and weights have different lengths ({atoms} vs {weights})")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("non-finite atom or weight")]
    NonFinite,
    #[error("weight {0} is not strictly positive")]
    NonPositiveWeight(f64),
    #[error("weights sum to {0}, more than {WEIGHT_SUM_TOL} away from 1")]
    WeightSum(f64),
    #[error("dilation by zero is rejected; construct a point mass explicitly")]
    ZeroDilation,
}

/// A probability measure with finitely many atoms.
///
/// Canonical form: atoms strictly increasing, duplicates (within
/// [`MERGE_TOL`]) merged, weights strictly positive and summing to 1.
/// Immutable after construction; all operations return new measures.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Builds a measure from parallel atom/weight lists.
    ///
    /// Weights within [`WEIGHT_SUM_TOL`] of summing to 1 are renormalized;
    /// a larger deviation is a validation error.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if atoms.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        if atoms.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite);
        }
        if let Some(&w) = weights.iter().find(|w| **w <= 0.0) {
            return Err(MeasureError::NonPositiveWeight(w));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MeasureError::WeightSum(sum));
        }

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Merge near-duplicates at the weight-averaged position.
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (t, w) in pairs {
            match merged.last_mut() {
                Some((tl, wl)) if (t - *tl).abs() < MERGE_TOL => {
                    let total = *wl + w;
                    *tl = (*tl * *wl + t * w) / total;
                    *wl = total;
                }
                _ => merged.push((t, w)),
            }
        }
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        let (atoms, weights) = merged.into_iter().map(|(t, w)| (t, w / total)).unzip();
        Ok(Self { atoms, weights })
    }

    /// The point mass at `t`.
    pub fn point_mass(t: f64) -> Self {
        Self {
            atoms: vec![t],
            weights: vec![1.0],
        }
    }

    /// The symmetric two-point measure on +-`a` with equal weights.
    pub fn symmetric_coin(a: f64) -> Self {
        Self::new(vec![-a, a], vec![0.5, 0.5]).expect("valid coin")
    }

    /// Bernoulli(p) on {0,1} shifted to have mean zero:
    /// atoms (-p, 1-p) with weights (1-p, p).
    pub fn bernoulli_centered(p: f64) -> Result<Self, MeasureError> {
        Self::new(vec![-p, 1.0 - p], vec![1.0 - p, p])
    }

    /// Two-point measure with mean 0 and variance 1: weight q = 1-p on
    /// -sqrt(p/q) and weight p on sqrt(q/p). The heavy weight sits on the
    /// small atom, stretching the left support edge for p > 1/2.
    pub fn standardized_two_point(p: f64) -> Result<Self, MeasureError> {
        let q = 1.0 - p;
        Self::new(vec![-(p / q).sqrt(), (q / p).sqrt()], vec![q, p])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one atom
    }

    /// Norm bound L = max |atom|; the support lies in [-L, L].
    pub fn norm_bound(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// Weight carried by the largest atom.
    pub fn max_atom_weight(&self) -> f64 {
        *self.weights.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * (t - m) * (t - m))
            .sum()
    }

    /// Raw moments m_1..m_order.
    pub fn moments(&self, order: usize) -> MomentVector {
        assert!(order >= 1, "moment order must be at least 1");
        let mut values = Vec::with_capacity(order);
        let mut powers: Vec<f64> = vec![1.0; self.len()];
        for _ in 0..order {
            for (p, t) in powers.iter_mut().zip(&self.atoms) {
                *p *= t;
            }
            values.push(
                powers
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| p * w)
                    .sum::<f64>(),
            );
        }
        MomentVector { values }
    }

    /// Shifts atoms so the first moment becomes zero.
    pub fn center(&self) -> Self {
        let m1 = self.mean();
        Self {
            atoms: self.atoms.iter().map(|t| t - m1).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Scales every atom by `alpha` (nonzero); weights unchanged.
    pub fn dilate(&self, alpha: f64) -> Result<Self, MeasureError> {
        if alpha == 0.0 {
            return Err(MeasureError::ZeroDilation);
        }
        if !alpha.is_finite() {
            return Err(MeasureError::NonFinite);
        }
        let mut atoms: Vec<f64> = self.atoms.iter().map(|t| t * alpha).collect();
        let mut weights = self.weights.clone();
        if alpha < 0.0 {
            atoms.reverse();
            weights.reverse();
        }
        Ok(Self { atoms, weights })
    }

    /// Mirror image across the origin; dilation by -1.
    pub fn reflect(&self) -> Self {
        self.dilate(-1.0).expect("-1 is nonzero")
    }
}

/// Raw moments m_1..m_order of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// m_k, 1-based; zero beyond the stored order.
    pub fn get(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.values.get(k - 1).copied().unwrap_or(0.0)
    }
}
