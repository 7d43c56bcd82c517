//! Hardy-type norms as [`GroupNorm`]s, and the `X + Y` sum norm.

use nalgebra::{DMatrix, DVector};

use crate::convex::{self, GroupNorm, SolverOptions};
use crate::filtration::IndexedFiltration;
use crate::prob::{Partition, RandomVariable};
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `E S_2 f`
    HardyS,
    /// `E s_2 f`
    HardyConditional,
    /// `E Σ_{i,j} |Δ_{i,j} f|`
    S1L1,
    /// `E |f|`
    L1,
    /// `(E |f|^2)^{1/2}`
    L2,
}

/// Matrix of `Δ_{i,j}` acting on atom values; column `a` is `Δ_{i,j} 1_{a}`.
fn delta_matrices(filt: &impl IndexedFiltration) -> Vec<((usize, usize), DMatrix<f64>)> {
    let n = filt.space().len();
    let (r, c) = filt.shape();
    let mut out: Vec<((usize, usize), DMatrix<f64>)> =
        (0..r).flat_map(|i| (0..c).map(move |j| ((i, j), DMatrix::zeros(n, n)))).collect();
    let mut e = vec![0.0; n];
    for a in 0..n {
        e[a] = 1.0;
        let d = super::raw_differences(&e, filt);
        for (k, ((i, j), m)) in out.iter_mut().enumerate() {
            debug_assert_eq!(k, *i * c + *j);
            m.set_column(a, &DVector::from_column_slice(&d[(*i, *j)]));
        }
        e[a] = 0.0;
    }
    out
}

/// The chosen norm on all of `R^atoms` (a seminorm unless `F_{N,M}` is the finest partition).
pub fn norm_matrix(filt: &impl IndexedFiltration, kind: NormKind) -> Result<GroupNorm> {
    let space = filt.space();
    let n = space.len();
    let w = space.weights();
    let unit = |k: usize| -> Vec<f64> { (0..n).map(|c| (c == k) as u8 as f64).collect() };
    let groups = match kind {
        NormKind::L1 => (0..n).map(|a| (w[a], vec![unit(a)])).collect(),
        NormKind::L2 => vec![(1.0, (0..n).map(|a| unit(a).into_iter().map(|v| v * w[a].sqrt()).collect()).collect())],
        NormKind::HardyS => {
            let ds = delta_matrices(filt);
            (0..n).map(|a| (w[a], ds.iter().map(|(_, m)| m.row(a).iter().copied().collect()).collect())).collect()
        }
        NormKind::S1L1 => {
            let ds = delta_matrices(filt);
            (0..n).flat_map(|a| ds.iter().map(move |(_, m)| (w[a], vec![m.row(a).iter().copied().collect()]))).collect()
        }
        NormKind::HardyConditional => {
            let ds = delta_matrices(filt);
            let prev: Vec<(&Partition, Vec<f64>)> = ds
                .iter()
                .map(|((i, j), _)| {
                    let p = filt.sigma_clamped(*i as isize - 1, *j as isize - 1);
                    (p, p.block_weights())
                })
                .collect();
            (0..n)
                .map(|a| {
                    let mut rows = Vec::new();
                    for ((_, m), (p, bw)) in ds.iter().zip(&prev) {
                        let b = p.block_of(a);
                        for other in (0..n).filter(|&o| p.block_of(o) == b) {
                            let s = (w[other] / bw[b]).sqrt();
                            rows.push(m.row(other).iter().map(|v| s * v).collect());
                        }
                    }
                    (w[a], rows)
                })
                .collect()
        }
    };
    if n == 0 {
        return Err(LabError::Empty("space".into()));
    }
    GroupNorm::new(n, groups)
}

/// Orthonormal (in the Euclidean atom coordinates) basis of `sigma`-measurable vectors.
pub fn measurable_basis(sigma: &Partition) -> DMatrix<f64> {
    let n = sigma.space().len();
    let k = sigma.n_blocks();
    let mut q = DMatrix::zeros(n, k);
    let mut counts = vec![0usize; k];
    for a in 0..n {
        counts[sigma.block_of(a)] += 1;
    }
    for a in 0..n {
        let b = sigma.block_of(a);
        q[(a, b)] = 1.0 / (counts[b] as f64).sqrt();
    }
    q
}

#[derive(Debug, Clone)]
pub struct SumNormResult {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub g: RandomVariable,
    pub h: RandomVariable,
    pub iterations: usize,
}

/// `‖f‖_{X+Y} = inf_{f = g + h} ‖g‖_X + ‖h‖_Y`, certified to `tol`.
///
/// Both norms must be definite on the space of `f`; for filtrations whose last
/// sigma-algebra is coarser than the atoms, restrict them with
/// [`measurable_basis`] first.
pub fn sum_norm(f: &RandomVariable, x: &GroupNorm, y: &GroupNorm, tol: f64) -> Result<SumNormResult> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance {tol}")));
    }
    let fv = DVector::from_column_slice(f.values());
    let opts = SolverOptions { tol, ..Default::default() };
    let sol = convex::sum_norm(&fv, x, y, &opts)?;
    let space = f.space().clone();
    Ok(SumNormResult {
        value: sol.value,
        lower: sol.bracket.lower,
        upper: sol.bracket.upper,
        g: RandomVariable::new(space.clone(), sol.g.iter().copied().collect())?,
        h: RandomVariable::new(space, sol.h.iter().copied().collect())?,
        iterations: sol.bracket.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{canonical_1p, canonical_2p};
    use crate::operators::hardy_norms;
    use crate::prob::FiniteProbSpace;

    #[test]
    fn group_norms_agree_with_pointwise_operators() {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let f = RandomVariable::from_atoms(filt.space().clone(), |a| ((a * 7) % 5) as f64 - 2.0);
        let v = DVector::from_column_slice(f.values());
        let h = hardy_norms(&f, &filt).unwrap();
        let s = norm_matrix(&filt, NormKind::HardyS).unwrap().value(&v);
        let cs = norm_matrix(&filt, NormKind::HardyConditional).unwrap().value(&v);
        assert!((s - h.h1_big_s).abs() < 1e-12);
        assert!((cs - h.h1_small_s).abs() < 1e-12);
        let s1 = norm_matrix(&filt, NormKind::S1L1).unwrap().value(&v);
        let oracle: f64 = crate::operators::martingale_differences(&f, &filt)
            .unwrap()
            .iter()
            .map(|(_, d)| d.abs().expectation())
            .sum();
        assert!((s1 - oracle).abs() < 1e-12);
        assert!((norm_matrix(&filt, NormKind::L1).unwrap().value(&v) - f.abs().expectation()).abs() < 1e-12);
        assert!((norm_matrix(&filt, NormKind::L2).unwrap().value(&v) - f.lp_norm(2.0)).abs() < 1e-12);
    }

    #[test]
    fn sum_norm_trivial_cases() {
        let filt = canonical_1p(&FiniteProbSpace::coin(), 1).unwrap();
        let x = norm_matrix(&filt, NormKind::HardyS).unwrap();
        let zero = RandomVariable::zeros(filt.space().clone());
        assert_eq!(sum_norm(&zero, &x, &x, 1e-7).unwrap().value, 0.0);
        let f = RandomVariable::from_atoms(filt.space().clone(), |a| [1.0, -2.0, 0.5, 3.0][a]);
        let r = sum_norm(&f, &x, &x, 1e-7).unwrap();
        let direct = hardy_norms(&f, &filt).unwrap().h1_big_s;
        assert!((r.value - direct).abs() <= 1e-7, "{} vs {}", r.value, direct);
        assert!(r.lower <= r.upper);
    }

    #[test]
    fn davis_garsia_sum_norm_is_equivalent_to_hardy_s() {
        let filt = canonical_1p(&FiniteProbSpace::coin(), 2).unwrap();
        let x = norm_matrix(&filt, NormKind::HardyConditional).unwrap();
        let y = norm_matrix(&filt, NormKind::S1L1).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for t in 0..12u64 {
            let f =
                RandomVariable::from_atoms(filt.space().clone(), |a| ((a as f64 + 1.0) * (t as f64 + 0.3) * 1.7).sin());
            let s = hardy_norms(&f, &filt).unwrap().h1_big_s;
            let r = sum_norm(&f, &x, &y, 1e-7).unwrap();
            lo = lo.min(r.value / s);
            hi = hi.max(r.value / s);
            assert!((&r.g + &r.h).max_abs_diff(&f) < 1e-12);
        }
        assert!(lo > 0.1 && hi < 10.0, "[{lo}, {hi}]");
    }
}
