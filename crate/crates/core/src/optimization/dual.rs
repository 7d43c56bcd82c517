//! Certified dual norms of functionals on finite spaces.

use nalgebra::DVector;

use crate::convex::{self, DualNormSolution, GroupNorm, SolverOptions};
use crate::filtration::IndexedFiltration;
use crate::operators::{measurable_basis, norm_matrix, NormKind};
use crate::prob::{same_space, Partition, RandomVariable};
use crate::{LabError, Result};

#[derive(Debug, Clone)]
pub struct DualNormResult {
    /// Midpoint of the certified bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// Unit-norm primal element attaining the lower bound.
    pub witness: RandomVariable,
}

/// `sup { ⟨z, g⟩ : ‖z‖ ≤ 1 }` in the norm's own coordinates, bracket width `≤ tol`.
pub fn dual_norm(g: &DVector<f64>, primal: &GroupNorm, tol: f64) -> Result<DualNormSolution> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance {tol}")));
    }
    convex::dual_norm(g, primal, &SolverOptions { tol, ..Default::default() })
}

/// `sup { E[f g] : f sigma-measurable, ‖f‖ ≤ 1 }` for a norm given on atom values.
pub fn measurable_dual_norm(
    g: &RandomVariable,
    primal: &GroupNorm,
    sigma: &Partition,
    tol: f64,
) -> Result<DualNormResult> {
    if !same_space(g.space(), sigma.space()) {
        return Err(LabError::SpaceMismatch);
    }
    if primal.dim() != g.len() {
        return Err(LabError::ShapeMismatch(format!("norm on {} coordinates, {} atoms", primal.dim(), g.len())));
    }
    let q = measurable_basis(sigma);
    let weighted = DVector::from_iterator(g.len(), g.values().iter().zip(g.space().weights()).map(|(v, w)| v * w));
    let ghat = q.tr_mul(&weighted);
    let sol = dual_norm(&ghat, &primal.restrict(&q), tol)?;
    let witness = RandomVariable::new(g.space().clone(), (&q * &sol.witness).iter().copied().collect())?;
    Ok(DualNormResult {
        value: sol.value,
        lower: sol.bracket.lower,
        upper: sol.bracket.upper,
        iterations: sol.bracket.iterations,
        witness,
    })
}

/// `‖g‖_{(H_1^S)^*}` over functions measurable for the last sigma-algebra.
pub fn hardy_s_dual_norm(g: &RandomVariable, filt: &impl IndexedFiltration, tol: f64) -> Result<DualNormResult> {
    if !same_space(g.space(), filt.space()) {
        return Err(LabError::SpaceMismatch);
    }
    let (r, c) = filt.shape();
    measurable_dual_norm(g, &norm_matrix(filt, NormKind::HardyS)?, filt.sigma(r - 1, c - 1), tol)
}
