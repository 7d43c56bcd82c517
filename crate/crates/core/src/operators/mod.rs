//! Martingale differences, square and maximal functions, Hardy norms.
//!
//! All operators take an [`IndexedFiltration`], so one-parameter filtrations
//! (embedded as a single column) and two-parameter grids share one code path.
//! Differences use `E_{i,j} = 0` outside the grid, which yields the boundary
//! rules `Δ_{0,0} = E_{0,0}` and `Δ_{i,0} = E_{i,0} - E_{i-1,0}`; conditioning
//! inside `s_p` uses the clamped `E_{i ∨ 0, j ∨ 0}`.

mod field;
mod norms;

pub use field::{field_square_function, AdaptedField};
pub use norms::{measurable_basis, norm_matrix, sum_norm, NormKind, SumNormResult};

use serde::{Deserialize, Serialize};

use crate::filtration::IndexedFiltration;
use crate::grid::Grid;
use crate::prob::{same_space, RandomVariable};
use crate::{LabError, Result};

pub(crate) fn check_space(f: &RandomVariable, filt: &impl IndexedFiltration) -> Result<()> {
    if same_space(f.space(), filt.space()) {
        Ok(())
    } else {
        Err(LabError::SpaceMismatch)
    }
}

pub(crate) fn raw_expectations(values: &[f64], filt: &impl IndexedFiltration) -> Grid<Vec<f64>> {
    let (r, c) = filt.shape();
    Grid::from_fn(r, c, |i, j| filt.sigma(i, j).average(values))
}

/// `Δ_{i,j}` from a grid of conditional expectations.
pub(crate) fn raw_delta(e: &Grid<Vec<f64>>, i: usize, j: usize) -> Vec<f64> {
    let mut out = e[(i, j)].clone();
    if i > 0 {
        sub_assign(&mut out, &e[(i - 1, j)]);
    }
    if j > 0 {
        sub_assign(&mut out, &e[(i, j - 1)]);
    }
    if i > 0 && j > 0 {
        for (o, v) in out.iter_mut().zip(&e[(i - 1, j - 1)]) {
            *o += v;
        }
    }
    out
}

fn sub_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
}

pub(crate) fn raw_differences(values: &[f64], filt: &impl IndexedFiltration) -> Grid<Vec<f64>> {
    let e = raw_expectations(values, filt);
    Grid::from_fn(e.rows(), e.cols(), |i, j| raw_delta(&e, i, j))
}

/// Grid of `E_{i,j} f`.
pub fn conditional_expectations(f: &RandomVariable, filt: &impl IndexedFiltration) -> Result<Grid<RandomVariable>> {
    check_space(f, filt)?;
    let e = raw_expectations(f.values(), filt);
    Ok(e.map(|_, v| RandomVariable::new(f.space().clone(), v.clone()).expect("length preserved")))
}

pub fn delta(f: &RandomVariable, filt: &impl IndexedFiltration, i: usize, j: usize) -> Result<RandomVariable> {
    check_space(f, filt)?;
    let (r, c) = filt.shape();
    if i >= r || j >= c {
        return Err(LabError::IndexOutOfGrid(i, j, r, c));
    }
    let sigmas = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j.wrapping_sub(1))];
    let signs = [1.0, -1.0, -1.0, 1.0];
    let mut out = vec![0.0; f.len()];
    for ((a, b), s) in sigmas.into_iter().zip(signs) {
        if a < r && b < c {
            for (o, v) in out.iter_mut().zip(filt.sigma(a, b).average(f.values())) {
                *o += s * v;
            }
        }
    }
    RandomVariable::new(f.space().clone(), out)
}

pub fn martingale_differences(f: &RandomVariable, filt: &impl IndexedFiltration) -> Result<Grid<RandomVariable>> {
    check_space(f, filt)?;
    let d = raw_differences(f.values(), filt);
    Ok(d.map(|_, v| RandomVariable::new(f.space().clone(), v.clone()).expect("length preserved")))
}

/// `(Σ |Δ_{i,j} f|^p)^{1/p}`, or with `E_{i-1,j-1}` applied to each `|Δ_{i,j} f|^p`
/// when `conditional` is set.
pub fn square_function(
    f: &RandomVariable,
    filt: &impl IndexedFiltration,
    p: f64,
    conditional: bool,
) -> Result<RandomVariable> {
    check_space(f, filt)?;
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!("square function exponent p = {p} < 1")));
    }
    let d = raw_differences(f.values(), filt);
    let mut acc = vec![0.0; f.len()];
    for ((i, j), di) in d.iter() {
        let powered: Vec<f64> = di.iter().map(|v| v.abs().powf(p)).collect();
        let term =
            if conditional { filt.sigma_clamped(i as isize - 1, j as isize - 1).average(&powered) } else { powered };
        for (a, t) in acc.iter_mut().zip(term) {
            *a += t;
        }
    }
    RandomVariable::new(f.space().clone(), acc.into_iter().map(|a| a.powf(1.0 / p)).collect())
}

/// `sup_{i,j} |E_{i,j} f|`.
pub fn maximal_function(f: &RandomVariable, filt: &impl IndexedFiltration) -> Result<RandomVariable> {
    check_space(f, filt)?;
    let mut out = vec![0.0f64; f.len()];
    for sigma in filt.family() {
        for (o, v) in out.iter_mut().zip(sigma.average(f.values())) {
            *o = o.max(v.abs());
        }
    }
    RandomVariable::new(f.space().clone(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    #[serde(rename = "h1S")]
    pub h1_big_s: f64,
    #[serde(rename = "h1s")]
    pub h1_small_s: f64,
    #[serde(rename = "h1star")]
    pub h1_star: f64,
}

pub fn hardy_norms(f: &RandomVariable, filt: &impl IndexedFiltration) -> Result<HardyReport> {
    Ok(HardyReport {
        h1_big_s: square_function(f, filt, 2.0, false)?.expectation(),
        h1_small_s: square_function(f, filt, 2.0, true)?.expectation(),
        h1_star: maximal_function(f, filt)?.expectation(),
    })
}
