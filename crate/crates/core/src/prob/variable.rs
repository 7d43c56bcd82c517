use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::{same_space, Partition, ProductSpace};
use crate::{LabError, Result};

/// A real function on the atoms of a product space, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: Arc<ProductSpace>,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: Arc<ProductSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(LabError::ShapeMismatch(format!(
                "{} values for a space with {} atoms",
                values.len(),
                space.len()
            )));
        }
        Ok(RandomVariable { space, values })
    }

    pub fn constant(space: Arc<ProductSpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        RandomVariable { space, values }
    }

    pub fn zeros(space: Arc<ProductSpace>) -> Self {
        Self::constant(space, 0.0)
    }

    pub fn from_atoms(space: Arc<ProductSpace>, f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..space.len()).map(f).collect();
        RandomVariable { space, values }
    }

    /// Evaluates `f` on the coordinate tuple of each atom.
    pub fn from_coords(space: Arc<ProductSpace>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let values = (0..space.len()).map(|a| f(&space.coords(a))).collect();
        RandomVariable { space, values }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, atom: usize) -> f64 {
        self.values[atom]
    }

    pub fn expectation(&self) -> f64 {
        self.values.iter().zip(self.space.weights()).map(|(v, w)| v * w).sum()
    }

    /// `E[f g]`.
    pub fn inner(&self, other: &RandomVariable) -> Result<f64> {
        self.check_space(other)?;
        Ok(self.values.iter().zip(&other.values).zip(self.space.weights()).map(|((a, b), w)| a * b * w).sum())
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        self.values.iter().zip(self.space.weights()).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RandomVariable { space: self.space.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// Pointwise combination; errors on a space mismatch.
    pub fn zip_with(&self, other: &RandomVariable, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_space(other)?;
        Ok(RandomVariable {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// True when `self` is constant on every block of `sigma` up to `tol`
    /// relative to the largest magnitude.
    pub fn is_measurable(&self, sigma: &Partition, tol: f64) -> bool {
        if !same_space(&self.space, sigma.space()) {
            return false;
        }
        let mut first = vec![f64::NAN; sigma.n_blocks()];
        let scale = 1.0 + self.max_abs();
        self.values.iter().enumerate().all(|(atom, v)| {
            let b = sigma.block_of(atom);
            if first[b].is_nan() {
                first[b] = *v;
                true
            } else {
                (first[b] - v).abs() <= tol * scale
            }
        })
    }

    pub fn max_abs_diff(&self, other: &RandomVariable) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check_space(&self, other: &RandomVariable) -> Result<()> {
        if same_space(&self.space, &other.space) {
            Ok(())
        } else {
            Err(LabError::SpaceMismatch)
        }
    }
}

// Arithmetic operators panic on mismatched spaces, like ndarray on mismatched shapes.
impl Add for &RandomVariable {
    type Output = RandomVariable;

    fn add(self, rhs: &RandomVariable) -> RandomVariable {
        self.zip_with(rhs, |a, b| a + b).expect("space mismatch in +")
    }
}

impl Sub for &RandomVariable {
    type Output = RandomVariable;

    fn sub(self, rhs: &RandomVariable) -> RandomVariable {
        self.zip_with(rhs, |a, b| a - b).expect("space mismatch in -")
    }
}

impl Mul for &RandomVariable {
    type Output = RandomVariable;

    fn mul(self, rhs: &RandomVariable) -> RandomVariable {
        self.zip_with(rhs, |a, b| a * b).expect("space mismatch in *")
    }
}

impl Mul<f64> for &RandomVariable {
    type Output = RandomVariable;

    fn mul(self, c: f64) -> RandomVariable {
        self.map(|v| v * c)
    }
}

impl Neg for &RandomVariable {
    type Output = RandomVariable;

    fn neg(self) -> RandomVariable {
        self.map(|v| -v)
    }
}
