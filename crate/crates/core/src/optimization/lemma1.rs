//! The weighted square-function inequality and its convex program.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::convex::{self, GroupNorm, SolverOptions};
use crate::prob::{same_space, Partition, ProductSpace, RandomVariable};
use crate::{LabError, Result};

const MEASURABLE_TOL: f64 = 1e-9;

/// Weights `w_{i,j} ∈ [0, 1]` over `I × J`, a family `F_i` and the level `κ`.
///
/// Entries are stored row-major in `(i, j)`.
#[derive(Debug, Clone)]
pub struct WeightSystem {
    space: Arc<ProductSpace>,
    sigmas: Vec<Partition>,
    n_j: usize,
    weights: Vec<RandomVariable>,
    kappa: f64,
}

impl WeightSystem {
    pub fn new(sigmas: Vec<Partition>, n_j: usize, weights: Vec<RandomVariable>, kappa: f64) -> Result<Self> {
        let space = sigmas.first().ok_or_else(|| LabError::Empty("index set I".into()))?.space().clone();
        if n_j == 0 {
            return Err(LabError::Empty("index set J".into()));
        }
        if weights.len() != sigmas.len() * n_j {
            return Err(LabError::ShapeMismatch(format!(
                "{} weights for |I| = {}, |J| = {n_j}",
                weights.len(),
                sigmas.len()
            )));
        }
        if !(kappa > 0.0) {
            return Err(LabError::InvalidParameter(format!("kappa = {kappa}")));
        }
        for s in &sigmas {
            if !same_space(s.space(), &space) {
                return Err(LabError::SpaceMismatch);
            }
        }
        for w in &weights {
            if !same_space(w.space(), &space) {
                return Err(LabError::SpaceMismatch);
            }
            if w.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(LabError::InvalidParameter("weights must lie in [0, 1]".into()));
            }
        }
        Ok(WeightSystem { space, sigmas, n_j, weights, kappa })
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn n_i(&self) -> usize {
        self.sigmas.len()
    }

    pub fn n_j(&self) -> usize {
        self.n_j
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sigma(&self, i: usize) -> &Partition {
        &self.sigmas[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> &RandomVariable {
        &self.weights[i * self.n_j + j]
    }

    /// Indicator of `A_{i,j} = {E_i w_{i,j} ≥ κ}` per atom.
    pub fn event(&self, i: usize, j: usize) -> Vec<bool> {
        self.sigmas[i].average(self.weight(i, j).values()).into_iter().map(|v| v >= self.kappa).collect()
    }

    fn check_field(&self, field: &[RandomVariable]) -> Result<()> {
        if field.len() != self.weights.len() {
            return Err(LabError::ShapeMismatch(format!("{} entries for {} weights", field.len(), self.weights.len())));
        }
        for (p, f) in field.iter().enumerate() {
            if !same_space(f.space(), &self.space) {
                return Err(LabError::SpaceMismatch);
            }
            if !f.is_measurable(&self.sigmas[p / self.n_j], MEASURABLE_TOL) {
                return Err(LabError::NotAdapted(format!("entry ({}, {})", p / self.n_j, p % self.n_j)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `E sqrt(Σ (w f)^2) ≥ κ^2 δ E sqrt(Σ 1_{A_{i,j}} f^2)`, with slack `1e-9`.
pub fn verify_lemma1(ws: &WeightSystem, field: &[RandomVariable], delta: f64) -> Result<Lemma1Check> {
    ws.check_field(field)?;
    let n = ws.space.len();
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    for i in 0..ws.n_i() {
        for j in 0..ws.n_j {
            let f = field[i * ws.n_j + j].values();
            let w = ws.weight(i, j).values();
            let a = ws.event(i, j);
            for atom in 0..n {
                left[atom] += (w[atom] * f[atom]).powi(2);
                if a[atom] {
                    right[atom] += f[atom] * f[atom];
                }
            }
        }
    }
    let mu = ws.space.weights();
    let lhs: f64 = left.iter().zip(mu).map(|(v, m)| m * v.sqrt()).sum();
    let rhs = ws.kappa * ws.kappa * delta * right.iter().zip(mu).map(|(v, m)| m * v.sqrt()).sum::<f64>();
    Ok(Lemma1Check { lhs, rhs, holds: lhs >= rhs - 1e-9 })
}

/// Adapted sequences supported on the events `A_{i,j}`, coordinatized by their
/// value on each block `B ⊂ A_{i,j}` of `F_i`.
#[derive(Debug, Clone)]
pub struct AdaptedSequenceSpace {
    ws: WeightSystem,
    /// `(entry, block, mass of block)` per coordinate.
    coords: Vec<(usize, usize, f64)>,
    /// Per atom: `(coordinate, w value)` for every entry whose event contains the atom.
    rows: Vec<Vec<(usize, f64)>>,
}

impl AdaptedSequenceSpace {
    pub fn new(ws: &WeightSystem) -> Self {
        let n = ws.space.len();
        let mut coords = Vec::new();
        let mut rows = vec![Vec::new(); n];
        for i in 0..ws.n_i() {
            let sigma = &ws.sigmas[i];
            let masses = sigma.block_weights();
            for j in 0..ws.n_j {
                let p = i * ws.n_j + j;
                let event = ws.event(i, j);
                let w = ws.weight(i, j).values();
                let mut index_of_block = vec![usize::MAX; sigma.n_blocks()];
                for atom in 0..n {
                    if !event[atom] {
                        continue;
                    }
                    let b = sigma.block_of(atom);
                    if index_of_block[b] == usize::MAX {
                        index_of_block[b] = coords.len();
                        coords.push((p, b, masses[b]));
                    }
                    rows[atom].push((index_of_block[b], w[atom]));
                }
            }
        }
        AdaptedSequenceSpace { ws: ws.clone(), coords, rows }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn weights(&self) -> &WeightSystem {
        &self.ws
    }

    /// Block masses: the pairing is `⟨z, y⟩ = Σ_p mass_p z_p y_p`.
    pub fn masses(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.coords.iter().map(|c| c.2))
    }

    /// Coordinates of a field; fails unless it is adapted and supported on the events.
    pub fn coordinates(&self, field: &[RandomVariable]) -> Result<DVector<f64>> {
        self.ws.check_field(field)?;
        let z = DVector::from_iterator(
            self.dim(),
            self.coords.iter().map(|&(p, b, _)| {
                let sigma = &self.ws.sigmas[p / self.ws.n_j];
                let atom = (0..self.ws.space.len()).find(|&a| sigma.block_of(a) == b).expect("block has atoms");
                field[p].value(atom)
            }),
        );
        let back = self.embed(&z);
        for (f, g) in field.iter().zip(&back) {
            if f.max_abs_diff(g) > MEASURABLE_TOL * (1.0 + f.max_abs()) {
                return Err(LabError::InvalidParameter("field is not supported on the events A_{i,j}".into()));
            }
        }
        Ok(z)
    }

    pub fn embed(&self, z: &DVector<f64>) -> Vec<RandomVariable> {
        let n = self.ws.space.len();
        let mut vals = vec![vec![0.0; n]; self.ws.weights.len()];
        for (q, &(p, b, _)) in self.coords.iter().enumerate() {
            let sigma = &self.ws.sigmas[p / self.ws.n_j];
            for (atom, v) in vals[p].iter_mut().enumerate() {
                if sigma.block_of(atom) == b {
                    *v = z[q];
                }
            }
        }
        vals.into_iter().map(|v| RandomVariable::new(self.ws.space.clone(), v).expect("length")).collect()
    }

    /// `E sqrt(Σ f_{i,j}^2)` as a group norm in block coordinates.
    pub fn primal_norm(&self) -> Result<GroupNorm> {
        let d = self.dim();
        let mu = self.ws.space.weights();
        let groups = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(atom, r)| {
                let rows = r
                    .iter()
                    .map(|&(q, _)| {
                        let mut row = vec![0.0; d];
                        row[q] = 1.0;
                        row
                    })
                    .collect();
                (mu[atom], rows)
            })
            .collect();
        GroupNorm::new(d, groups)
    }

    /// `Φ_ε(z) = E sqrt(Σ (w f)^2 + ε^2)`.
    pub fn phi(&self, z: &DVector<f64>, eps: f64) -> f64 {
        let mu = self.ws.space.weights();
        self.rows
            .iter()
            .zip(mu)
            .map(|(r, m)| m * (r.iter().map(|&(q, w)| (w * z[q]).powi(2)).sum::<f64>() + eps * eps).sqrt())
            .sum()
    }

    /// Gradient of `Φ_ε` in block coordinates.
    pub fn phi_gradient(&self, z: &DVector<f64>, eps: f64) -> DVector<f64> {
        self.phi_derivatives(z, eps, false).0
    }

    fn phi_derivatives(&self, z: &DVector<f64>, eps: f64, hessian: bool) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mu = self.ws.space.weights();
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(if hessian { d } else { 0 }, if hessian { d } else { 0 });
        for (r, m) in self.rows.iter().zip(mu) {
            if r.is_empty() {
                continue;
            }
            let s = (r.iter().map(|&(q, w)| (w * z[q]).powi(2)).sum::<f64>() + eps * eps).sqrt();
            if s == 0.0 {
                continue;
            }
            for &(q, w) in r {
                g[q] += m * w * w * z[q] / s;
            }
            if hessian {
                // The diagonal is w^2 (s^2 - (w z)^2) / s^3, formed without cancellation.
                let s3 = s * s * s;
                for (k, &(q, w)) in r.iter().enumerate() {
                    let rest: f64 = eps * eps
                        + r.iter()
                            .enumerate()
                            .filter(|&(l, _)| l != k)
                            .map(|(_, &(q2, w2))| (w2 * z[q2]).powi(2))
                            .sum::<f64>();
                    h[(q, q)] += m * w * w * rest / s3;
                    let uq = w * w * z[q];
                    for (l, &(q2, w2)) in r.iter().enumerate() {
                        if l != k {
                            h[(q, q2)] -= m * uq * w2 * w2 * z[q2] / s3;
                        }
                    }
                }
            }
        }
        (g, h)
    }

    /// `sup { ⟨f, g⟩ : E sqrt(Σ f^2) ≤ 1 }` over the space, certified to `tol`.
    pub fn dual_norm(&self, g: &DVector<f64>, tol: f64) -> Result<convex::DualNormSolution> {
        let ghat = g.component_mul(&self.masses());
        convex::dual_norm(&ghat, &self.primal_norm()?, &SolverOptions { tol, ..Default::default() })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    /// Minimizer as a field over `I × J`.
    pub minimizer: Vec<RandomVariable>,
    pub coordinates: DVector<f64>,
    pub lambda: f64,
    /// `Φ(f*)` (unsmoothed).
    pub objective: f64,
    /// `‖∇Φ − λ g‖_{L2}` for the projected gradient at the final smoothing level.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_epsilon: f64,
}

/// Solves `[H a; a^T 0] [s; ν] = [-grad; r]` after symmetric diagonal scaling,
/// which keeps the solve accurate when `H` mixes scales near `1/ε` and `1`.
fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>, a: &DVector<f64>, r: f64) -> Option<DVector<f64>> {
    let d = grad.len();
    let mut scale =
        DVector::from_iterator(d + 1, hess.diagonal().iter().map(|h| 1.0 / h.abs().max(1e-300).sqrt()).chain([1.0]));
    let sa = a.component_mul(&scale.rows(0, d));
    scale[d] = 1.0 / sa.norm().max(1e-300);
    let mut kkt = DMatrix::zeros(d + 1, d + 1);
    kkt.view_mut((0, 0), (d, d)).copy_from(hess);
    kkt.view_mut((0, d), (d, 1)).copy_from(a);
    kkt.view_mut((d, 0), (1, d)).copy_from(&a.transpose());
    let kkt = DMatrix::from_fn(d + 1, d + 1, |i, j| scale[i] * kkt[(i, j)] * scale[j]);
    let mut rhs = DVector::zeros(d + 1);
    rhs.rows_mut(0, d).copy_from(&(-grad));
    rhs[d] = r;
    let rhs = rhs.component_mul(&scale);
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // One round of iterative refinement.
    let correction = lu.solve(&(&rhs - &kkt * &sol))?;
    sol += correction;
    let sol = sol.component_mul(&scale);
    sol.iter().all(|v| v.is_finite()).then(|| sol.rows(0, d).into_owned())
}

/// `(λ, ‖G - λ g‖_{L2})` with `G` the L2 representative of `∇Φ_ε` and `λ` its
/// least-squares multiplier.
fn lagrange_residual(
    space: &AdaptedSequenceSpace,
    z: &DVector<f64>,
    eps: f64,
    g: &DVector<f64>,
    masses: &DVector<f64>,
) -> (f64, f64) {
    let gfun = space.phi_gradient(z, eps).component_div(masses);
    let gg: f64 = g.iter().zip(masses.iter()).map(|(x, m)| m * x * x).sum();
    let lambda = gfun.iter().zip(g.iter()).zip(masses.iter()).map(|((u, v), m)| m * u * v).sum::<f64>() / gg;
    let residual = gfun
        .iter()
        .zip(g.iter())
        .zip(masses.iter())
        .map(|((u, v), m)| m * (u - lambda * v).powi(2))
        .sum::<f64>()
        .sqrt();
    (lambda, residual)
}

/// Smoothing levels `1e-2, 1e-3, ..., 1e-10`.
pub const EPSILON_SCHEDULE: [f64; 9] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// Minimizes `Φ` over `{f ∈ space : ⟨f, g⟩ = 1}` by equality-constrained Newton
/// steps on the smoothed objective, with `ε` decreasing along [`EPSILON_SCHEDULE`].
pub fn minimize_phi(space: &AdaptedSequenceSpace, g: &DVector<f64>, tol: f64) -> Result<OptimizationReport> {
    let d = space.dim();
    if g.len() != d {
        return Err(LabError::ShapeMismatch(format!("dual element of length {} in dimension {d}", g.len())));
    }
    let masses = space.masses();
    let a = g.component_mul(&masses);
    let aa = a.norm_squared();
    if aa == 0.0 {
        return Err(LabError::InvalidParameter("dual element vanishes on the constraint space".into()));
    }
    let mut z = &a / aa;
    let mut iterations = 0;
    let stationarity = |z: &DVector<f64>, eps: f64| lagrange_residual(space, z, eps, g, &masses);
    for &eps in &EPSILON_SCHEDULE {
        let mut res = stationarity(&z, eps).1;
        for _ in 0..200 {
            if res <= 1e-3 * tol {
                break;
            }
            iterations += 1;
            let (grad, hess) = space.phi_derivatives(&z, eps, true);
            let step = match newton_step(&hess, &grad, &a, 0.0) {
                Some(step) => step,
                None => break,
            };
            let decrement = -grad.dot(&step);
            let f0 = space.phi(&z, eps);
            // Below roundoff in the objective, progress is judged by stationarity.
            let flat = 1e-13 * f0.abs().max(1e-300);
            let mut t = 1.0;
            let accepted = loop {
                // Feasibility is restored by rescaling, which leaves ε-scale coordinates intact.
                let mut cand = &z + t * &step;
                let level = a.dot(&cand);
                if !(level > 0.0) {
                    t *= 0.5;
                    continue;
                }
                cand /= level;
                let f1 = space.phi(&cand, eps);
                if f1 <= f0 - 0.25 * t * decrement.max(0.0) && f1 < f0 - flat {
                    break Some(cand);
                }
                if (f1 - f0).abs() <= flat {
                    let r1 = stationarity(&cand, eps).1;
                    if r1 < res {
                        break Some(cand);
                    }
                }
                t *= 0.5;
                if t < 1e-12 {
                    break None;
                }
            };
            let Some(next) = accepted else { break };
            z = next;
            res = stationarity(&z, eps).1;
        }
    }
    let eps = *EPSILON_SCHEDULE.last().expect("nonempty");
    let (lambda, residual) = stationarity(&z, eps);
    let objective = space.phi(&z, 0.0);
    let converged = residual <= tol && (lambda - objective).abs() <= 1e-6;
    Ok(OptimizationReport {
        minimizer: space.embed(&z),
        coordinates: z,
        lambda,
        objective,
        residual,
        iterations,
        converged,
        final_epsilon: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{canonical_2p, certified_doob_lower_bound, IndexedFiltration};
    use crate::prob::FiniteProbSpace;
    use crate::random;
    use rand::Rng;

    fn system(seed: u64, kappa: f64) -> (WeightSystem, Vec<RandomVariable>) {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let mut r = random::rng(seed);
        let sigmas: Vec<Partition> = filt.family().into_iter().cloned().collect();
        let nj = 2;
        let weights: Vec<RandomVariable> = (0..sigmas.len() * nj)
            .map(|_| RandomVariable::from_atoms(filt.space().clone(), |_| r.random::<f64>()))
            .collect();
        let field: Vec<RandomVariable> = (0..sigmas.len() * nj)
            .map(|p| sigmas[p / nj].cond_expect(&random::gaussian(filt.space(), &mut r)).unwrap())
            .collect();
        (WeightSystem::new(sigmas, nj, weights, kappa).unwrap(), field)
    }

    #[test]
    fn trivial_weights() {
        let (ws, field) = system(1, 0.25);
        let space = ws.space().clone();
        let ones = WeightSystem::new(ws.sigmas.clone(), 2, vec![RandomVariable::constant(space.clone(), 1.0); 8], 0.5)
            .unwrap();
        let c = verify_lemma1(&ones, &field, 1.0).unwrap();
        assert!(c.holds && (c.rhs - 0.25 * c.lhs).abs() < 1e-12);
        let zeros = WeightSystem::new(ws.sigmas.clone(), 2, vec![RandomVariable::zeros(space); 8], 0.5).unwrap();
        let c = verify_lemma1(&zeros, &field, 1.0).unwrap();
        assert_eq!(c.rhs, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn invalid_systems() {
        let (ws, field) = system(2, 0.25);
        let bad = vec![RandomVariable::constant(ws.space().clone(), 1.5); 8];
        assert!(WeightSystem::new(ws.sigmas.clone(), 2, bad, 0.25).is_err());
        assert!(verify_lemma1(&ws, &field[..3], 1.0).is_err());
        let non_adapted: Vec<RandomVariable> =
            (0..8).map(|_| random::gaussian(ws.space(), &mut random::rng(0))).collect();
        assert!(matches!(verify_lemma1(&ws, &non_adapted, 1.0), Err(LabError::NotAdapted(_))));
    }

    #[test]
    fn holds_on_seeded_instances() {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let delta = certified_doob_lower_bound(&filt, 2.0).unwrap();
        for seed in 0..200 {
            let (ws, field) = system(seed, 0.25);
            assert!(verify_lemma1(&ws, &field, delta).unwrap().holds);
        }
    }

    #[test]
    fn one_atom_euclidean_case() {
        let base = FiniteProbSpace::from_weights(vec![1.0]).unwrap();
        let space = Arc::new(ProductSpace::single(base));
        let sigma = Partition::finest(space.clone());
        let ws = WeightSystem::new(vec![sigma], 3, vec![RandomVariable::constant(space.clone(), 1.0); 3], 0.5).unwrap();
        let asp = AdaptedSequenceSpace::new(&ws);
        let g = DVector::from_vec(vec![0.6, 0.0, -0.8]);
        let rep = minimize_phi(&asp, &g, 1e-6).unwrap();
        assert!(rep.converged, "res {} lam {} obj {} it {}", rep.residual, rep.lambda, rep.objective, rep.iterations);
        assert!((rep.objective - 1.0).abs() < 1e-8 && (rep.lambda - 1.0).abs() < 1e-8);
        assert!((&rep.coordinates - &g).amax() < 1e-6);
        let d = asp.dual_norm(&g, 1e-8).unwrap();
        assert!((d.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn single_entry_closed_form() {
        // With g on one entry the program is the linear fractional problem
        // min Σ_B μ(B) E_B[w] |c_B| s.t. Σ_B μ(B) g_B c_B = 1.
        let (ws, _) = system(7, 0.25);
        let asp = AdaptedSequenceSpace::new(&ws);
        let target = asp.coords.iter().position(|c| c.0 == 6).expect("entry present");
        let mut g = DVector::zeros(asp.dim());
        let mut oracle = f64::INFINITY;
        let mut r = random::rng(3);
        for (q, &(p, b, _)) in asp.coords.iter().enumerate() {
            if p == asp.coords[target].0 {
                g[q] = r.random::<f64>() + 0.1;
                let sigma = ws.sigma(p / ws.n_j());
                let avg = sigma.average(ws.weight(p / ws.n_j(), p % ws.n_j()).values());
                let atom = (0..ws.space().len()).find(|&a| sigma.block_of(a) == b).unwrap();
                oracle = oracle.min(avg[atom] / g[q]);
            }
        }
        let rep = minimize_phi(&asp, &g, 1e-6).unwrap();
        assert!((rep.objective - oracle).abs() < 1e-7, "{} vs {oracle}", rep.objective);
        assert!(rep.converged, "res {} lam {} obj {} it {}", rep.residual, rep.lambda, rep.objective, rep.iterations);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (ws, _) = system(4, 0.25);
        let asp = AdaptedSequenceSpace::new(&ws);
        let mut r = random::rng(5);
        let z =
            DVector::from_iterator(asp.dim(), (0..asp.dim()).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)));
        let grad = asp.phi_gradient(&z, 0.0);
        let h = 1e-6;
        for q in 0..asp.dim() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[q] += h;
            zm[q] -= h;
            let fd = (asp.phi(&zp, 0.0) - asp.phi(&zm, 0.0)) / (2.0 * h);
            assert!((fd - grad[q]).abs() <= 1e-6 * grad[q].abs().max(1e-3), "{q}: {fd} vs {}", grad[q]);
        }
    }

    #[test]
    fn minimizer_is_first_order_optimal_and_lambda_is_large() {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let delta = certified_doob_lower_bound(&filt, 2.0).unwrap();
        for seed in 0..5 {
            let (ws, _) = system(seed + 100, 0.25);
            let asp = AdaptedSequenceSpace::new(&ws);
            if asp.dim() == 0 {
                continue;
            }
            let mut r = random::rng(seed);
            let mut g = DVector::from_iterator(
                asp.dim(),
                (0..asp.dim()).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)),
            );
            let dn = asp.dual_norm(&g, 1e-8).unwrap();
            g /= dn.value;
            let rep = minimize_phi(&asp, &g, 1e-6).unwrap();
            assert!(
                rep.converged,
                "res {} lam {} obj {} it {}",
                rep.residual, rep.lambda, rep.objective, rep.iterations
            );
            assert!(rep.lambda >= 0.25 * 0.25 * delta - 1e-7, "{}", rep.lambda);
            let a = g.component_mul(&asp.masses());
            for _ in 0..100 {
                let mut h = DVector::from_iterator(
                    asp.dim(),
                    (0..asp.dim()).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)),
                );
                h -= &a * (a.dot(&h) / a.norm_squared());
                let moved = asp.phi(&(&rep.coordinates + 1e-4 * &h), 0.0);
                assert!(rep.objective <= moved + 1e-12, "{} > {moved}", rep.objective);
            }
        }
    }
}
