//! Sampled check that a moment inequality and its gradient form agree.
//!
//! Functions live on a finite space with weights `μ`; a sequence `f = (f_k)`
//! takes values in `R^N` pointwise and ranges over `V = ⊕ V_k`. The reference
//! norm is `‖f‖_Y = (E Σ_k f_k^2)^{1/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::random;
use crate::{LabError, Result};

/// Largest dimension of `V` handled by sampling.
pub const MAX_SAMPLED_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointwiseNorm {
    /// `ℓ_r` on `R^N`, `1 ≤ r ≤ ∞`.
    Lp(f64),
}

impl PointwiseNorm {
    pub fn value(&self, v: &[f64]) -> f64 {
        match *self {
            PointwiseNorm::Lp(r) if r.is_infinite() => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            PointwiseNorm::Lp(r) => v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r),
        }
    }

    /// Gradient away from zero; `0` at the origin.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let norm = self.value(v);
        if norm == 0.0 {
            return vec![0.0; v.len()];
        }
        match *self {
            PointwiseNorm::Lp(r) if r.is_infinite() => {
                let k = (0..v.len()).fold(0, |b, k| if v[k].abs() > v[b].abs() { k } else { b });
                (0..v.len()).map(|l| if l == k { v[k].signum() } else { 0.0 }).collect()
            }
            PointwiseNorm::Lp(r) => v.iter().map(|x| x.signum() * (x.abs() / norm).powf(r - 1.0)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PointwiseNorm::Lp(r) if r >= 1.0 => Ok(()),
            PointwiseNorm::Lp(r) => Err(LabError::InvalidParameter(format!("l_{r} is not a norm"))),
        }
    }

    /// One-sided difference quotients at nonzero probe points; a kink shows up
    /// as a jump between them.
    pub fn check_differentiable(&self, n: usize) -> Result<()> {
        let mut probes: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|l| (k == l) as u8 as f64).collect()).collect();
        probes.push(vec![1.0; n]);
        if n >= 2 {
            probes.push((0..n).map(|l| [1.0, -1.0, 0.0][l % 3]).collect());
        }
        let mut r = random::rng(0);
        probes.extend((0..4).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()));
        let h = 1e-6;
        for v in &probes {
            let base = self.value(v);
            for l in 0..n {
                let mut up = v.clone();
                let mut down = v.clone();
                up[l] += h;
                down[l] -= h;
                let plus = (self.value(&up) - base) / h;
                let minus = (base - self.value(&down)) / h;
                if (plus - minus).abs() > 1e-3 {
                    return Err(LabError::NonDifferentiable(format!(
                        "{self:?} at {v:?} along coordinate {l}: one-sided derivatives {plus} and {minus}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GradLemmaInstance {
    /// Atom weights `μ`.
    pub weights: Vec<f64>,
    /// Basis of each `V_k` as columns of function values.
    pub components: Vec<DMatrix<f64>>,
    pub x: PointwiseNorm,
    pub q: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GradLemmaOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for GradLemmaOptions {
    fn default() -> Self {
        GradLemmaOptions { samples: 2000, seed: 0, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradLemmaReport {
    pub dim: usize,
    pub samples: usize,
    /// `min E‖f‖_X^q / ‖f‖_Y^q`
    pub min_ratio_moment: f64,
    /// `min ‖P_V(‖f‖_X^{q-1} ∇‖·‖_X(f))‖_{Y*} / ‖f‖_Y^{q-1}`
    pub min_ratio_gradient: f64,
    pub holds_moment: bool,
    pub holds_gradient: bool,
    pub equivalent: bool,
    /// Support-restricted gradient condition, evaluated when `q = 1`.
    pub support_condition: Option<SupportCondition>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportCondition {
    /// `min ‖P_{V∩F} ∇‖·‖_X(f)‖_{Y*} / ‖P_{V∩F}‖` over samples with `V ∩ F ≠ 0`.
    pub min_ratio: f64,
    pub holds: bool,
    /// The condition holding forces the `q = 1` moment inequality.
    pub implication_holds: bool,
}

struct Prepared<'a> {
    inst: &'a GradLemmaInstance,
    n: usize,
    sqrt_mu: Vec<f64>,
    /// Orthonormal basis of `V` in coordinates `sqrt(μ_ω) f_k(ω)`, index `k n + ω`.
    basis: DMatrix<f64>,
}

impl Prepared<'_> {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Pointwise vectors `f(ω) ∈ R^N`.
    fn values(&self, z: &DVector<f64>) -> Vec<Vec<f64>> {
        let u = &self.basis * z;
        let big_n = self.inst.components.len();
        (0..self.n).map(|w| (0..big_n).map(|k| u[k * self.n + w] / self.sqrt_mu[w]).collect()).collect()
    }

    fn moment_ratio(&self, z: &DVector<f64>) -> f64 {
        let vals = self.values(z);
        let m: f64 =
            vals.iter().zip(&self.inst.weights).map(|(v, mu)| mu * self.inst.x.value(v).powf(self.inst.q)).sum();
        m / z.norm().powf(self.inst.q)
    }

    /// Scaled coordinates of `‖f‖_X^{q-1} ∇‖·‖_X(f)`.
    fn gradient_field(&self, vals: &[Vec<f64>]) -> DVector<f64> {
        let big_n = self.inst.components.len();
        let mut u = DVector::zeros(big_n * self.n);
        for (w, v) in vals.iter().enumerate() {
            let norm = self.inst.x.value(v);
            if norm == 0.0 {
                continue;
            }
            let scale = if self.inst.q == 1.0 { 1.0 } else { norm.powf(self.inst.q - 1.0) };
            for (k, d) in self.inst.x.gradient(v).into_iter().enumerate() {
                u[k * self.n + w] = self.sqrt_mu[w] * scale * d;
            }
        }
        u
    }

    fn gradient_ratio(&self, z: &DVector<f64>) -> f64 {
        let u = self.gradient_field(&self.values(z));
        self.basis.tr_mul(&u).norm() / z.norm().powf(self.inst.q - 1.0)
    }

    /// `‖P_{V∩F} ∇‖·‖_X(f)‖` with `F` the sequences supported where `f` is; `None` if `V ∩ F = 0`.
    fn support_ratio(&self, z: &DVector<f64>) -> Option<f64> {
        let u = &self.basis * z;
        let cutoff = 1e-12 * u.amax();
        let outside: Vec<usize> = (0..u.len()).filter(|&r| u[r].abs() <= cutoff).collect();
        let d = self.dim();
        let null = if outside.is_empty() {
            DMatrix::identity(d, d)
        } else {
            let rows = self.basis.select_rows(&outside);
            let eig = SymmetricEigen::new(rows.tr_mul(&rows));
            let keep: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k].abs() <= 1e-20).collect();
            if keep.is_empty() {
                return None;
            }
            eig.eigenvectors.select_columns(&keep)
        };
        let grad = self.gradient_field(&self.values(z));
        Some(null.tr_mul(&self.basis.tr_mul(&grad)).norm())
    }
}

fn prepare(inst: &GradLemmaInstance) -> Result<Prepared<'_>> {
    inst.x.validate()?;
    if !(inst.q >= 1.0) || !(inst.c >= 0.0) {
        return Err(LabError::InvalidParameter(format!("q = {}, C = {}", inst.q, inst.c)));
    }
    let n = inst.weights.len();
    if n == 0 || inst.components.is_empty() {
        return Err(LabError::Empty("space or components".into()));
    }
    if inst.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(LabError::InvalidParameter("atom weights must be positive".into()));
    }
    inst.x.check_differentiable(inst.components.len())?;
    let sqrt_mu: Vec<f64> = inst.weights.iter().map(|w| w.sqrt()).collect();
    let big_n = inst.components.len();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (k, v) in inst.components.iter().enumerate() {
        if v.nrows() != n {
            return Err(LabError::ShapeMismatch(format!("component {k} has {} rows for {n} atoms", v.nrows())));
        }
        if v.ncols() == 0 {
            continue;
        }
        let scaled = DMatrix::from_fn(n, v.ncols(), |w, c| sqrt_mu[w] * v[(w, c)]);
        let svd = scaled.svd(true, false);
        let u = svd.u.expect("requested");
        let top = svd.singular_values.max();
        for (c, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-10 * top {
                let mut col = DVector::zeros(big_n * n);
                col.rows_mut(k * n, n).copy_from(&u.column(c));
                cols.push(col);
            }
        }
    }
    if cols.is_empty() {
        return Err(LabError::Empty("V is the zero space".into()));
    }
    if cols.len() > MAX_SAMPLED_DIM {
        return Err(LabError::SearchTooLarge(format!("dim V = {} > {MAX_SAMPLED_DIM}", cols.len())));
    }
    Ok(Prepared { inst, n, sqrt_mu, basis: DMatrix::from_columns(&cols) })
}

/// Points on the unit sphere of `R^d`, up to sign.
fn sphere_points(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let count = count.max(1);
    match d {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let t = golden * k as f64;
                    DVector::from_vec(vec![r * t.cos(), y, r * t.sin()])
                })
                .collect()
        }
        _ => {
            let mut r = random::rng(seed);
            (0..count)
                .map(|_| {
                    let v = DVector::from_iterator(d, (0..d).map(|_| r.sample::<f64, _>(StandardNormal)));
                    let n = v.norm();
                    v / n
                })
                .collect()
        }
    }
}

/// Compass search on the sphere starting from `z`.
fn refine(z: &DVector<f64>, f: impl Fn(&DVector<f64>) -> f64) -> (DVector<f64>, f64) {
    let d = z.len();
    let mut best = z.normalize();
    let mut value = f(&best);
    let mut step = 0.05;
    while step > 1e-10 && d > 1 {
        let mut improved = false;
        for k in 0..d {
            for s in [step, -step] {
                let mut cand = best.clone();
                cand[k] += s;
                let cand = cand.normalize();
                let v = f(&cand);
                if v < value {
                    best = cand;
                    value = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, value)
}

fn minimize(points: &[DVector<f64>], f: impl Fn(&DVector<f64>) -> f64) -> (f64, Vec<DVector<f64>>) {
    let mut scored: Vec<(f64, usize)> = points.iter().enumerate().map(|(k, z)| (f(z), k)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = scored.first().map_or(f64::INFINITY, |s| s.0);
    let mut refined = Vec::new();
    for &(_, k) in scored.iter().take(5) {
        let (z, v) = refine(&points[k], &f);
        best = best.min(v);
        refined.push(z);
    }
    (best, refined)
}

/// Minimal ratios of both conditions over a sampled, locally refined sphere of `V`.
pub fn check_gradlemma(inst: &GradLemmaInstance, opts: &GradLemmaOptions) -> Result<GradLemmaReport> {
    let prep = prepare(inst)?;
    let mut points = sphere_points(prep.dim(), opts.samples, opts.seed);
    let (moment, extra_m) = minimize(&points, |z| prep.moment_ratio(z));
    let (gradient, extra_g) = minimize(&points, |z| prep.gradient_ratio(z));
    points.extend(extra_m);
    points.extend(extra_g);
    let holds_moment = moment >= inst.c - opts.tol;
    let holds_gradient = gradient >= inst.c - opts.tol;
    let support_condition = (inst.q == 1.0).then(|| {
        let min_ratio = points.iter().filter_map(|z| prep.support_ratio(z)).fold(f64::INFINITY, f64::min);
        let holds = min_ratio >= inst.c - opts.tol;
        SupportCondition { min_ratio, holds, implication_holds: !holds || holds_moment }
    });
    Ok(GradLemmaReport {
        dim: prep.dim(),
        samples: points.len(),
        min_ratio_moment: moment,
        min_ratio_gradient: gradient,
        holds_moment,
        holds_gradient,
        equivalent: holds_moment == holds_gradient,
        support_condition,
    })
}

/// Random instance: 2 to 4 atoms, up to 3 components, total dimension `1..=max_dim`.
pub fn random_instance(seed: u64, max_dim: usize, x: PointwiseNorm, q: f64, c: f64) -> GradLemmaInstance {
    let mut r = random::rng(seed);
    let n = r.random_range(2..=4usize);
    let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 0.1).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let dim = r.random_range(1..=max_dim.clamp(1, MAX_SAMPLED_DIM));
    let big_n = r.random_range(1..=dim.min(3));
    let mut dims = vec![1usize; big_n];
    for _ in big_n..dim {
        let open: Vec<usize> = (0..big_n).filter(|&k| dims[k] < n).collect();
        if let Some(&k) = open.get(r.random_range(0..open.len().max(1))) {
            dims[k] += 1;
        }
    }
    let components = dims.iter().map(|&d| DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal))).collect();
    GradLemmaInstance { weights, components, x, q, c }
}
