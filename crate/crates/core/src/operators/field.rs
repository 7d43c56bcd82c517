use std::sync::Arc;

use crate::filtration::{Filtration2, IndexedFiltration};
use crate::grid::Grid;
use crate::prob::{same_space, RandomVariable};
use crate::{LabError, Result};

/// Relative tolerance for the adaptedness check.
const ADAPTED_TOL: f64 = 1e-9;

/// A grid `f_{i,j}` with each entry `F_{i,j}`-measurable.
#[derive(Debug, Clone)]
pub struct AdaptedField {
    filt: Arc<Filtration2>,
    entries: Grid<RandomVariable>,
}

impl AdaptedField {
    pub fn new(filt: Arc<Filtration2>, entries: Grid<RandomVariable>) -> Result<Self> {
        if entries.shape() != filt.shape() {
            return Err(LabError::ShapeMismatch(format!(
                "field {:?} on filtration {:?}",
                entries.shape(),
                filt.shape()
            )));
        }
        for ((i, j), f) in entries.iter() {
            if !same_space(f.space(), filt.space()) {
                return Err(LabError::SpaceMismatch);
            }
            if !f.is_measurable(filt.sigma(i, j), ADAPTED_TOL) {
                return Err(LabError::NotAdapted(format!("entry ({i},{j})")));
            }
        }
        Ok(AdaptedField { filt, entries })
    }

    pub fn from_fn(filt: Arc<Filtration2>, mut f: impl FnMut(usize, usize) -> RandomVariable) -> Result<Self> {
        let (r, c) = filt.shape();
        let entries = Grid::from_fn(r, c, &mut f);
        Self::new(filt, entries)
    }

    pub fn zeros(filt: Arc<Filtration2>) -> Self {
        let (r, c) = filt.shape();
        let space = filt.space().clone();
        AdaptedField { entries: Grid::from_fn(r, c, |_, _| RandomVariable::zeros(space.clone())), filt }
    }

    /// `f_{i,j} = Δ_{i,j} F`.
    pub fn differences_of(filt: Arc<Filtration2>, big_f: &RandomVariable) -> Result<Self> {
        let entries = super::martingale_differences(big_f, filt.as_ref())?;
        Ok(AdaptedField { filt, entries })
    }

    pub fn filtration(&self) -> &Arc<Filtration2> {
        &self.filt
    }

    pub fn entries(&self) -> &Grid<RandomVariable> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> &RandomVariable {
        &self.entries[(i, j)]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    pub fn sum(&self) -> RandomVariable {
        let mut acc = RandomVariable::zeros(self.filt.space().clone());
        for (_, f) in self.entries.iter() {
            acc = &acc + f;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().iter().all(|f| f.max_abs() == 0.0)
    }

    /// True when `Δ_{i,j} f_{i,j} = f_{i,j}` for every entry.
    pub fn is_martingale_difference(&self, tol: f64) -> Result<bool> {
        for ((i, j), f) in self.entries.iter() {
            let d = super::delta(f, self.filt.as_ref(), i, j)?;
            if d.max_abs_diff(f) > tol * (1.0 + f.max_abs()) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Entrywise map; adaptedness of the result is re-checked.
    pub fn try_map(&self, mut f: impl FnMut((usize, usize), &RandomVariable) -> RandomVariable) -> Result<Self> {
        Self::new(self.filt.clone(), self.entries.map(|ij, v| f(ij, v)))
    }
}

/// `sqrt(Σ_{i,j} |f_{i,j}|^2)` pointwise.
pub fn field_square_function(field: &AdaptedField) -> RandomVariable {
    let n = field.filt.space().len();
    let mut acc = vec![0.0; n];
    for (_, f) in field.entries.iter() {
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += v * v;
        }
    }
    RandomVariable::new(field.filt.space().clone(), acc.into_iter().map(f64::sqrt).collect()).expect("length preserved")
}
