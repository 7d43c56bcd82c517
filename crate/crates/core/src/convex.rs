//! Group-norm programs: `‖x‖ = Σ_r c_r ‖A_r x‖_2`.
//!
//! Every norm this crate optimizes over (Hardy norms, `S_1 L_1`, the
//! weighted `L_1(l_2)` objective) has this form on a finite space. Both
//! programs below are solved by Chambolle–Pock primal–dual splitting and stop
//! on a certified bracket: the upper bound is a primal objective value and the
//! lower bound comes from a dual point made exactly feasible by a
//! least-squares correction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Group {
    pub start: usize,
    pub len: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GroupNorm {
    matrix: DMatrix<f64>,
    groups: Vec<Group>,
}

impl GroupNorm {
    /// `groups` lists `(weight, rows)`; each row must have length `dim`.
    pub fn new(dim: usize, groups: Vec<(f64, Vec<Vec<f64>>)>) -> Result<Self> {
        let total: usize = groups.iter().map(|(_, r)| r.len()).sum();
        let mut data = Vec::with_capacity(total * dim);
        let mut out = Vec::with_capacity(groups.len());
        let mut start = 0;
        for (weight, rows) in groups {
            if !(weight > 0.0) {
                return Err(LabError::InvalidParameter(format!("group weight {weight}")));
            }
            for r in &rows {
                if r.len() != dim {
                    return Err(LabError::ShapeMismatch(format!("row of length {} for dim {dim}", r.len())));
                }
                data.extend_from_slice(r);
            }
            out.push(Group { start, len: rows.len(), weight });
            start += rows.len();
        }
        Ok(GroupNorm { matrix: DMatrix::from_row_slice(total, dim, &data), groups: out })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.value_of_image(&(&self.matrix * x))
    }

    fn value_of_image(&self, ax: &DVector<f64>) -> f64 {
        self.groups.iter().map(|g| g.weight * ax.rows(g.start, g.len).norm()).sum()
    }

    /// The norm composed with `x = basis * z`.
    pub fn restrict(&self, basis: &DMatrix<f64>) -> GroupNorm {
        GroupNorm { matrix: &self.matrix * basis, groups: self.groups.clone() }
    }

    /// Projects each dual block onto the ball of radius `weight`.
    fn project_balls(&self, y: &mut DVector<f64>) {
        for g in &self.groups {
            let mut block = y.rows_mut(g.start, g.len);
            let n = block.norm();
            if n > g.weight {
                block *= g.weight / n;
            }
        }
    }

    /// `max_r ‖y_r‖ / c_r`: the dual norm bound certified by the representation `A^T y`.
    fn dual_scale(&self, y: &DVector<f64>) -> f64 {
        self.groups.iter().map(|g| y.rows(g.start, g.len).norm() / g.weight).fold(0.0, f64::max)
    }

    fn gram_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let gram = self.matrix.transpose() * &self.matrix;
        gram.cholesky()
            .ok_or_else(|| LabError::InvalidParameter("group norm is degenerate (not injective on its domain)".into()))
    }

    /// Minimal correction of `y` so that `A^T y = target` exactly.
    fn represent(&self, chol: &Cholesky<f64, Dyn>, y: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
        let resid = target - self.matrix.tr_mul(y);
        y + &self.matrix * chol.solve(&resid)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Absolute width of the certified bracket.
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-7, max_iter: 100_000, check_every: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl Bracket {
    /// Both bounds carry roundoff; once they meet they may cross by a few ulps.
    fn ordered(lower: f64, upper: f64, iterations: usize) -> Self {
        Bracket { lower: lower.min(upper), upper: lower.max(upper), iterations }
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone)]
pub struct SumNormSolution {
    pub value: f64,
    pub bracket: Bracket,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
}

fn operator_norm(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    gram.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
}

/// `inf_{g + h = f} ‖g‖_X + ‖h‖_Y`, bracketed to `opts.tol`.
pub fn sum_norm(f: &DVector<f64>, x: &GroupNorm, y: &GroupNorm, opts: &SolverOptions) -> Result<SumNormSolution> {
    let n = f.len();
    if x.dim() != n || y.dim() != n {
        return Err(LabError::ShapeMismatch("norm dimension differs from the vector".into()));
    }
    let chol_x = x.gram_cholesky()?;
    let chol_y = y.gram_cholesky()?;
    let (a, b) = (x.matrix(), y.matrix());
    let bf = b * f;
    let primal = |g: &DVector<f64>| x.value(g) + y.value(&(f - g));

    // Trivial splits give the first upper bound.
    let (mut best_g, mut upper) = {
        let zero = DVector::zeros(n);
        let (p0, pf) = (primal(&zero), primal(f));
        if p0 <= pf {
            (zero, p0)
        } else {
            (f.clone(), pf)
        }
    };
    let mut lower: f64 = 0.0;
    if upper <= opts.tol {
        return Ok(SumNormSolution {
            value: upper,
            bracket: Bracket { lower: 0.0, upper, iterations: 0 },
            h: f - &best_g,
            g: best_g,
        });
    }

    let stacked = {
        let mut k = DMatrix::zeros(a.nrows() + b.nrows(), n);
        k.rows_mut(0, a.nrows()).copy_from(a);
        k.rows_mut(a.nrows(), b.nrows()).copy_from(&(-b));
        k
    };
    let step = 0.99 / operator_norm(&stacked);
    let mut g = best_g.clone();
    let mut g_bar = g.clone();
    let mut u = DVector::zeros(a.nrows());
    let mut v = DVector::zeros(b.nrows());
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        u += step * (a * &g_bar);
        x.project_balls(&mut u);
        v += step * (&bf - b * &g_bar);
        y.project_balls(&mut v);
        let g_new = &g - step * (a.tr_mul(&u) - b.tr_mul(&v));
        g_bar = 2.0 * &g_new - &g;
        g = g_new;

        if iterations % opts.check_every == 0 {
            let p = primal(&g);
            if p < upper {
                upper = p;
                best_g = g.clone();
            }
            for (phi, scale_other) in [
                {
                    let phi = a.tr_mul(&u);
                    let v2 = y.represent(&chol_y, &v, &phi);
                    (phi, x.dual_scale(&u).max(y.dual_scale(&v2)))
                },
                {
                    let phi = b.tr_mul(&v);
                    let u2 = x.represent(&chol_x, &u, &phi);
                    (phi, y.dual_scale(&v).max(x.dual_scale(&u2)))
                },
            ] {
                if scale_other > 0.0 {
                    lower = lower.max(phi.dot(f) / scale_other);
                }
            }
            if upper - lower <= opts.tol {
                break;
            }
        }
    }
    if upper - lower > opts.tol {
        return Err(LabError::NotConverged { iterations, lower, upper });
    }
    let bracket = Bracket::ordered(lower, upper, iterations);
    Ok(SumNormSolution { value: bracket.upper, bracket, h: f - &best_g, g: best_g })
}

#[derive(Debug, Clone)]
pub struct DualNormSolution {
    pub value: f64,
    pub bracket: Bracket,
    /// Unit-norm primal vector (in the norm's coordinates) attaining the lower bound.
    pub witness: DVector<f64>,
}

/// `sup { ⟨z, g⟩ : ‖z‖ ≤ 1 }` for the Euclidean pairing in the norm's coordinates.
///
/// Solves `min ‖z‖ s.t. ⟨z, g⟩ = 1`, whose value is `1 / ‖g‖_*`. Any feasible
/// `z` certifies `‖g‖_* ≥ 1 / ‖z‖`; a dual block vector `y` with
/// `A^T y = g` certifies `‖g‖_* ≤ max_r ‖y_r‖ / c_r`.
pub fn dual_norm(g: &DVector<f64>, norm: &GroupNorm, opts: &SolverOptions) -> Result<DualNormSolution> {
    if g.len() != norm.dim() {
        return Err(LabError::ShapeMismatch("dual element dimension".into()));
    }
    let gg = g.norm_squared();
    if gg == 0.0 {
        return Ok(DualNormSolution {
            value: 0.0,
            bracket: Bracket { lower: 0.0, upper: 0.0, iterations: 0 },
            witness: DVector::zeros(g.len()),
        });
    }
    let chol = norm.gram_cholesky()?;
    let a = norm.matrix();
    let project = |z: DVector<f64>| {
        let shift = (z.dot(g) - 1.0) / gg;
        z - shift * g
    };
    let step = 0.99 / operator_norm(a);
    let mut z = g / gg;
    let mut z_bar = z.clone();
    let mut y = DVector::zeros(a.nrows());
    let mut best_z = z.clone();
    let mut lower = z.dot(g) / norm.value(&z);
    let mut upper = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        y += step * (a * &z_bar);
        norm.project_balls(&mut y);
        let z_new = project(&z - step * a.tr_mul(&y));
        z_bar = 2.0 * &z_new - &z;
        z = z_new;

        if iterations % opts.check_every == 0 {
            let nz = norm.value(&z);
            if nz > 0.0 && z.dot(g) / nz > lower {
                lower = z.dot(g) / nz;
                best_z = z.clone();
            }
            let t = a.tr_mul(&y).dot(g) / gg;
            if t > 0.0 {
                let rep = norm.represent(&chol, &(&y / t), g);
                upper = upper.min(norm.dual_scale(&rep));
            }
            if upper - lower <= opts.tol {
                break;
            }
        }
    }
    if upper - lower > opts.tol {
        return Err(LabError::NotConverged { iterations, lower, upper });
    }
    let scale = norm.value(&best_z);
    let bracket = Bracket::ordered(lower, upper, iterations);
    Ok(DualNormSolution { value: bracket.mid(), bracket, witness: best_z / scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(n: usize) -> GroupNorm {
        GroupNorm::new(n, (0..n).map(|k| (1.0, vec![(0..n).map(|c| (c == k) as u8 as f64).collect()])).collect())
            .unwrap()
    }

    fn l2(n: usize) -> GroupNorm {
        GroupNorm::new(n, vec![(1.0, (0..n).map(|k| (0..n).map(|c| (c == k) as u8 as f64).collect()).collect())])
            .unwrap()
    }

    #[test]
    fn dual_of_l1_is_linf_and_l2_is_self_dual() {
        let g = DVector::from_vec(vec![0.3, -2.0, 1.1]);
        let opts = SolverOptions { tol: 1e-8, ..Default::default() };
        let d = dual_norm(&g, &l1(3), &opts).unwrap();
        assert!((d.value - 2.0).abs() < 1e-7, "{d:?}");
        let d = dual_norm(&g, &l2(3), &opts).unwrap();
        assert!((d.value - g.norm()).abs() < 1e-7);
        assert!(d.bracket.lower <= d.bracket.upper);
    }

    #[test]
    fn sum_of_l1_and_scaled_l2() {
        // inf ‖g‖_1 + 3‖h‖_2 over g + h = f: for this f the dual ball
        // intersection {‖φ‖_∞ ≤ 1, ‖φ‖_2 ≤ 3} is just the l∞ ball, so the value is ‖f‖_1.
        let f = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let x = l1(3);
        let y3 =
            GroupNorm::new(3, vec![(3.0, (0..3).map(|k| (0..3).map(|c| (c == k) as u8 as f64).collect()).collect())])
                .unwrap();
        let s = sum_norm(&f, &x, &y3, &SolverOptions::default()).unwrap();
        assert!((s.value - 1.75).abs() < 1e-6, "{s:?}");
        // With weight 1 on l2 the infimum is ‖f‖_2 (l2 ≤ l1).
        let s = sum_norm(&f, &x, &l2(3), &SolverOptions::default()).unwrap();
        assert!((s.value - f.norm()).abs() < 1e-6, "{s:?}");
        assert!((&s.g + &s.h - &f).norm() < 1e-12);
    }

    #[test]
    fn degenerate_norm_is_rejected() {
        let semi = GroupNorm::new(2, vec![(1.0, vec![vec![1.0, 0.0]])]).unwrap();
        let f = DVector::from_vec(vec![1.0, 1.0]);
        assert!(sum_norm(&f, &semi, &l2(2), &SolverOptions::default()).is_err());
    }
}
