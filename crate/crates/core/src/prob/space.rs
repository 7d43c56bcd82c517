use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

/// Probabilities must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Atoms beyond this count are refused; everything here is desk scale.
const MAX_ATOMS: usize = 1 << 24;

/// A finite probability space: labelled atoms with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProbSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl FiniteProbSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(LabError::InvalidSpace("no atoms".into()));
        }
        if labels.len() != weights.len() {
            return Err(LabError::InvalidSpace(format!("{} labels but {} weights", labels.len(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(LabError::InvalidSpace(format!("non-positive weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(LabError::InvalidSpace(format!("weights sum to {total}")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(LabError::InvalidSpace(format!("duplicate atom label {dup:?}")));
        }
        Ok(FiniteProbSpace { labels, weights })
    }

    /// Atoms labelled `"0"`, `"1"`, ...
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let labels = (0..weights.len()).map(|k| k.to_string()).collect();
        Self::new(labels, weights)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidSpace("no atoms".into()));
        }
        Self::from_weights(vec![1.0 / n as f64; n])
    }

    /// The fair coin {0, 1}.
    pub fn coin() -> Self {
        Self::from_weights(vec![0.5, 0.5]).expect("coin is valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.iter().all(|w| *w == self.weights[0])
    }
}

/// Product of finite factor spaces, one per coordinate.
///
/// Atoms are enumerated in mixed radix with the last coordinate fastest, so
/// averaging out a coordinate suffix is a contiguous block reduction.
/// `axes` groups consecutive coordinates (e.g. `[N + 1, M + 1]` for the
/// two-parameter canonical space) and is descriptive only.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpace {
    factors: Vec<FiniteProbSpace>,
    axes: Vec<usize>,
    strides: Vec<usize>,
    weights: Vec<f64>,
}

impl ProductSpace {
    pub fn new(factors: Vec<FiniteProbSpace>) -> Result<Self> {
        let axes = vec![factors.len()];
        Self::with_axes(factors, axes)
    }

    pub fn with_axes(factors: Vec<FiniteProbSpace>, axes: Vec<usize>) -> Result<Self> {
        if axes.iter().sum::<usize>() != factors.len() {
            return Err(LabError::InvalidSpace(format!("axes {axes:?} do not cover {} coordinates", factors.len())));
        }
        let mut count: usize = 1;
        for f in &factors {
            count = count
                .checked_mul(f.len())
                .filter(|c| *c <= MAX_ATOMS)
                .ok_or_else(|| LabError::InvalidSpace("too many atoms".into()))?;
        }
        let mut strides = vec![1; factors.len()];
        for c in (0..factors.len().saturating_sub(1)).rev() {
            strides[c] = strides[c + 1] * factors[c + 1].len();
        }
        let mut weights = vec![1.0; count];
        for (c, factor) in factors.iter().enumerate() {
            let radix = factor.len();
            for (atom, w) in weights.iter_mut().enumerate() {
                *w *= factor.weights()[(atom / strides[c]) % radix];
            }
        }
        Ok(ProductSpace { factors, axes, strides, weights })
    }

    /// `base` as a one-coordinate space.
    pub fn single(base: FiniteProbSpace) -> Self {
        Self::new(vec![base]).expect("single factor is valid")
    }

    /// `base^(sum of lengths)` with one axis per entry of `lengths`.
    pub fn power(base: &FiniteProbSpace, lengths: &[usize]) -> Result<Self> {
        let total = lengths.iter().sum();
        Self::with_axes(vec![base.clone(); total], lengths.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn n_coords(&self) -> usize {
        self.factors.len()
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn factor(&self, c: usize) -> &FiniteProbSpace {
        &self.factors[c]
    }

    pub fn factors(&self) -> &[FiniteProbSpace] {
        &self.factors
    }

    pub fn radix(&self, c: usize) -> usize {
        self.factors[c].len()
    }

    pub fn stride(&self, c: usize) -> usize {
        self.strides[c]
    }

    pub fn coord(&self, atom: usize, c: usize) -> usize {
        (atom / self.strides[c]) % self.factors[c].len()
    }

    pub fn coords(&self, atom: usize) -> Vec<usize> {
        (0..self.n_coords()).map(|c| self.coord(atom, c)).collect()
    }

    /// Inverse of [`coords`](Self::coords). Panics on out-of-range digits.
    pub fn encode(&self, coords: &[usize]) -> usize {
        assert_eq!(coords.len(), self.n_coords(), "coordinate count");
        coords
            .iter()
            .enumerate()
            .map(|(c, &x)| {
                assert!(x < self.radix(c), "digit {x} out of range for coordinate {c}");
                x * self.strides[c]
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(FiniteProbSpace::from_weights(vec![0.5, 0.6]).is_err());
        assert!(FiniteProbSpace::from_weights(vec![1.0, 0.0]).is_err());
        assert!(FiniteProbSpace::from_weights(vec![]).is_err());
        let dup = FiniteProbSpace::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]);
        assert!(dup.is_err());
    }

    #[test]
    fn mixed_radix_last_coordinate_fastest() {
        let s = ProductSpace::new(vec![FiniteProbSpace::uniform(2).unwrap(), FiniteProbSpace::uniform(3).unwrap()])
            .unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.coords(1), vec![0, 1]);
        assert_eq!(s.coords(3), vec![1, 0]);
        for atom in 0..s.len() {
            assert_eq!(s.encode(&s.coords(atom)), atom);
        }
    }

    #[test]
    fn product_weights_multiply() {
        let b = FiniteProbSpace::from_weights(vec![0.75, 0.25]).unwrap();
        let s = ProductSpace::power(&b, &[2]).unwrap();
        assert_eq!(s.weights(), &[0.5625, 0.1875, 0.1875, 0.0625]);
        let total: f64 = s.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
