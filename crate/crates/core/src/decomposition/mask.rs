//! Four-summand masks on decoupled slices.
//!
//! For fixed prefixes `(x_{<N}, y_{<M})` the decoupled entries are functions
//! `g_{i,j}(ξ, υ) = f_{i,j}((x_{<i}, ξ), (y_{<j}, υ))`. A mask assigns each
//! point `(i, j, ξ, υ)` one of four labels, and the slice functional is
//!
//! ```text
//! A = Σ_{i,j} ∫∫ |a g|
//! B = (Σ_{i,j} ∫∫ |b g|^2)^{1/2}
//! C = Σ_i ∫ dξ (Σ_j ∫ dυ |c g|^2)^{1/2}
//! D = Σ_j ∫ dυ (Σ_i ∫ dξ |d g|^2)^{1/2}
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoupling::DecoupledField;
use crate::exec::{map_indexed, trial_seed, Execution};
use crate::grid::Grid;
use crate::prob::{FiniteProbSpace, RandomVariable};
use crate::random;
use crate::{LabError, Result};

/// Largest support handled by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 12;

pub const LABEL_A: u8 = 0;
pub const LABEL_B: u8 = 1;
pub const LABEL_C: u8 = 2;
pub const LABEL_D: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub mode: MaskMode,
    pub restarts: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl SearchOptions {
    pub fn exhaustive() -> Self {
        SearchOptions { mode: MaskMode::Exhaustive, restarts: 32, seed: 0, exec: Execution::default() }
    }

    pub fn greedy(seed: u64) -> Self {
        SearchOptions { mode: MaskMode::Greedy, restarts: 32, seed, exec: Execution::default() }
    }
}

/// One decoupled slice: `values[((i * cols + j) * k + ξ) * k + υ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProblem {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

impl SliceProblem {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if rows == 0 || cols == 0 || k == 0 {
            return Err(LabError::Empty("slice problem".into()));
        }
        if values.len() != rows * cols * k * k {
            return Err(LabError::ShapeMismatch(format!(
                "{} values for {rows}x{cols} entries on {k} atoms",
                values.len()
            )));
        }
        Ok(SliceProblem { rows, cols, weights, values })
    }

    fn k(&self) -> usize {
        self.weights.len()
    }

    fn point(&self, p: usize) -> (usize, usize, usize, usize) {
        let k = self.k();
        let (rest, u) = (p / k, p % k);
        let (rest, x) = (rest / k, rest % k);
        (rest / self.cols, rest % self.cols, x, u)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&p| self.values[p] != 0.0).collect()
    }

    /// `E sqrt(Σ g_{i,j}(η_i, θ_j)^2)` over independent `η ∈ Ω^rows`, `θ ∈ Ω^cols`.
    pub fn lhs(&self) -> f64 {
        let k = self.k();
        let n = self.rows + self.cols;
        let mut digits = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let w: f64 = digits.iter().map(|&d| self.weights[d]).product();
            let mut s = 0.0;
            for i in 0..self.rows {
                for j in 0..self.cols {
                    let v = self.values[((i * self.cols + j) * k + digits[i]) * k + digits[self.rows + j]];
                    s += v * v;
                }
            }
            total += w * s.sqrt();
            let mut pos = n;
            loop {
                if pos == 0 {
                    return total;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < k {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// The four summands `[A, B, C, D]` for a full label vector.
    pub fn terms(&self, labels: &[u8]) -> [f64; 4] {
        let mut acc = Accumulator::new(self);
        for (p, &l) in labels.iter().enumerate() {
            if self.values[p] != 0.0 {
                acc.add(self, p, l);
            }
        }
        acc.terms(self)
    }

    pub fn rhs(&self, labels: &[u8]) -> f64 {
        self.terms(labels).iter().sum()
    }
}

/// Running sums from which the functional is read off.
#[derive(Clone)]
struct Accumulator {
    a: f64,
    b: f64,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Accumulator {
    fn new(pb: &SliceProblem) -> Self {
        Accumulator { a: 0.0, b: 0.0, c: vec![0.0; pb.rows * pb.k()], d: vec![0.0; pb.cols * pb.k()] }
    }

    /// Increase of the functional if point `p` were given `label`.
    fn marginal(&self, pb: &SliceProblem, p: usize, label: u8) -> f64 {
        let (i, j, x, u) = pb.point(p);
        let (wx, wu) = (pb.weights[x], pb.weights[u]);
        let g = pb.values[p];
        let k = pb.k();
        match label {
            LABEL_A => wx * wu * g.abs(),
            LABEL_B => (self.b + wx * wu * g * g).sqrt() - self.b.sqrt(),
            LABEL_C => {
                let s = self.c[i * k + x];
                wx * ((s + wu * g * g).sqrt() - s.sqrt())
            }
            _ => {
                let s = self.d[j * k + u];
                wu * ((s + wx * g * g).sqrt() - s.sqrt())
            }
        }
    }

    /// The running sum touched by `label` at `p`, and the amount added to it.
    fn slot(&mut self, pb: &SliceProblem, p: usize, label: u8) -> (&mut f64, f64) {
        let (i, j, x, u) = pb.point(p);
        let (wx, wu) = (pb.weights[x], pb.weights[u]);
        let g = pb.values[p];
        let k = pb.k();
        match label {
            LABEL_A => (&mut self.a, wx * wu * g.abs()),
            LABEL_B => (&mut self.b, wx * wu * g * g),
            LABEL_C => (&mut self.c[i * k + x], wu * g * g),
            _ => (&mut self.d[j * k + u], wx * g * g),
        }
    }

    fn add(&mut self, pb: &SliceProblem, p: usize, label: u8) {
        let (s, v) = self.slot(pb, p, label);
        *s += v;
    }

    fn terms(&self, pb: &SliceProblem) -> [f64; 4] {
        let k = pb.k();
        let c = self.c.iter().enumerate().map(|(r, s)| pb.weights[r % k] * s.max(0.0).sqrt()).sum();
        let d = self.d.iter().enumerate().map(|(r, s)| pb.weights[r % k] * s.max(0.0).sqrt()).sum();
        [self.a, self.b.max(0.0).sqrt(), c, d]
    }
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-13 * old.abs()
}

/// Coordinate descent from `start` until no single relabeling lowers the functional.
fn descend(pb: &SliceProblem, support: &[usize], mut labels: Vec<u8>) -> (Vec<u8>, f64) {
    let mut value = pb.rhs(&labels);
    loop {
        let mut moved = false;
        for &p in support {
            let current = labels[p];
            let mut best = (current, value);
            for l in 0..4u8 {
                if l == current {
                    continue;
                }
                labels[p] = l;
                let v = pb.rhs(&labels);
                if improves(v, best.1) {
                    best = (l, v);
                }
            }
            labels[p] = best.0;
            if best.0 != current {
                value = best.1;
                moved = true;
            }
        }
        if !moved {
            return (labels, value);
        }
    }
}

/// Best of `restarts` descents; restart 0 starts from the all-`a` mask.
pub fn greedy_slice(pb: &SliceProblem, restarts: usize, seed: u64) -> (Vec<u8>, f64) {
    let support = pb.support();
    let n = pb.values.len();
    let mut best: Option<(Vec<u8>, f64)> = None;
    for r in 0..restarts.max(1) {
        let start = if r == 0 {
            vec![LABEL_A; n]
        } else {
            let mut rng = random::rng(trial_seed(seed, r));
            (0..n).map(|p| if pb.values[p] != 0.0 { rng.random_range(0..4u8) } else { LABEL_A }).collect()
        };
        let cand = descend(pb, &support, start);
        if best.as_ref().is_none_or(|b| improves(cand.1, b.1)) {
            best = Some(cand);
        }
    }
    best.expect("at least one restart")
}

/// Exact minimizer over all `4^support` labelings (ties resolved in label order `a, b, c, d`).
pub fn exhaustive_slice(pb: &SliceProblem) -> Result<(Vec<u8>, f64)> {
    let mut support = pb.support();
    if support.len() > EXHAUSTIVE_LIMIT {
        return Err(LabError::SearchTooLarge(format!(
            "support of {} points exceeds {EXHAUSTIVE_LIMIT}",
            support.len()
        )));
    }
    support.sort_by(|&p, &q| pb.values[q].abs().total_cmp(&pb.values[p].abs()).then(p.cmp(&q)));
    let (seed_labels, _) = greedy_slice(pb, 1, 0);
    let mut best_labels = vec![LABEL_A; pb.values.len()];
    let mut best_value = f64::INFINITY;
    let mut labels = vec![LABEL_A; pb.values.len()];
    let mut acc = Accumulator::new(pb);

    struct Dfs<'a> {
        pb: &'a SliceProblem,
        order: &'a [usize],
        labels: &'a mut [u8],
        best_labels: &'a mut Vec<u8>,
        best_value: &'a mut f64,
        bound: f64,
    }

    fn go(s: &mut Dfs, acc: &mut Accumulator, depth: usize, value: f64) {
        if value >= s.bound || value >= *s.best_value {
            return;
        }
        if depth == s.order.len() {
            *s.best_value = value;
            s.best_labels.copy_from_slice(s.labels);
            return;
        }
        let p = s.order[depth];
        for l in 0..4u8 {
            let inc = acc.marginal(s.pb, p, l);
            let saved = {
                let (slot, v) = acc.slot(s.pb, p, l);
                let old = *slot;
                *slot += v;
                old
            };
            s.labels[p] = l;
            go(s, acc, depth + 1, value + inc);
            *acc.slot(s.pb, p, l).0 = saved;
        }
        s.labels[p] = LABEL_A;
    }

    // The greedy value (slightly relaxed) bounds the search; the exact optimum is never above it.
    let bound = pb.rhs(&seed_labels) * (1.0 + 1e-9) + 1e-300;
    let mut s = Dfs {
        pb,
        order: &support,
        labels: &mut labels,
        best_labels: &mut best_labels,
        best_value: &mut best_value,
        bound,
    };
    go(&mut s, &mut acc, 0, 0.0);
    if !best_value.is_finite() {
        best_labels = seed_labels;
    }
    let value = pb.rhs(&best_labels);
    Ok((best_labels, value))
}

/// Labels for every slice of a decoupled two-parameter field.
#[derive(Debug, Clone)]
pub struct FourSummandMask {
    base: FiniteProbSpace,
    rows: usize,
    cols: usize,
    /// `labels[slice][point]`, slices indexed by `(x_{<N}, y_{<M})` with the last coordinate fastest.
    labels: Vec<Vec<u8>>,
    pub mode: MaskMode,
    /// Weighted sums over slices of `[A, B, C, D]`.
    pub terms: [f64; 4],
    /// The decoupled `L1(l2)` norm.
    pub lhs: f64,
}

impl FourSummandMask {
    pub fn rhs(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn base(&self) -> &FiniteProbSpace {
        &self.base
    }

    pub fn n_slices(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, slice: usize, i: usize, j: usize, xi: usize, upsilon: usize) -> u8 {
        let k = self.base.len();
        self.labels[slice][((i * self.cols + j) * k + xi) * k + upsilon]
    }

    /// Slice of prefixes `x_{<N}`, `y_{<M}`.
    pub fn slice_index(&self, xs: &[usize], ys: &[usize]) -> usize {
        let k = self.base.len();
        xs[..self.rows - 1].iter().chain(&ys[..self.cols - 1]).fold(0, |acc, &d| acc * k + d)
    }

    /// The masks `a, b, c, d` as `{0, 1}`-valued variables on the enlarged space
    /// of `field`, one grid per label.
    pub fn indicator_grids(&self, field: &DecoupledField) -> Option<[Grid<RandomVariable>; 4]> {
        let space = field.decoupled_space()?.clone();
        let (r, c) = (self.rows, self.cols);
        let make = |label: u8| {
            Grid::from_fn(r, c, |i, j| {
                RandomVariable::from_coords(space.clone(), |cs| {
                    let (xs, rest) = cs.split_at(r);
                    let (ys, rest) = rest.split_at(c);
                    let (eta, theta) = rest.split_at(r);
                    (self.label(self.slice_index(xs, ys), i, j, eta[i], theta[j]) == label) as u8 as f64
                })
            })
        };
        Some([make(LABEL_A), make(LABEL_B), make(LABEL_C), make(LABEL_D)])
    }
}

/// The slice problems of a decoupled two-parameter field, with their weights.
pub fn slice_problems(field: &DecoupledField) -> Result<Vec<(f64, SliceProblem)>> {
    if !field.is_two_parameter() {
        return Err(LabError::InvalidParameter("four-summand masks need a two-parameter field".into()));
    }
    let (n, m) = field.dims();
    let base = field.base();
    let k = base.len();
    let w = base.weights();
    let (rows, cols) = (n + 1, m + 1);
    let n_slices = k.pow((n + m) as u32);
    let mut out = Vec::with_capacity(n_slices);
    let mut coords = vec![0usize; 2 * (rows + cols)];
    for s in 0..n_slices {
        let mut rest = s;
        let mut prefix = vec![0usize; n + m];
        for d in prefix.iter_mut().rev() {
            *d = rest % k;
            rest /= k;
        }
        coords.iter_mut().for_each(|c| *c = 0);
        coords[..n].copy_from_slice(&prefix[..n]);
        coords[rows..rows + m].copy_from_slice(&prefix[n..]);
        let weight: f64 = prefix.iter().map(|&d| w[d]).product();
        let mut values = vec![0.0; rows * cols * k * k];
        for i in 0..rows {
            for j in 0..cols {
                for x in 0..k {
                    for u in 0..k {
                        coords[rows + cols + i] = x;
                        coords[2 * rows + cols + j] = u;
                        values[((i * cols + j) * k + x) * k + u] = field.value_at(i, j, &coords);
                        coords[rows + cols + i] = 0;
                        coords[2 * rows + cols + j] = 0;
                    }
                }
            }
        }
        out.push((weight, SliceProblem::new(rows, cols, w.to_vec(), values)?));
    }
    Ok(out)
}

/// Searches a mask for every slice and aggregates the four summands.
pub fn four_summand_partition(field: &DecoupledField, opts: &SearchOptions) -> Result<FourSummandMask> {
    let problems = slice_problems(field)?;
    let solved = map_indexed(problems.len(), opts.exec, |s| {
        let pb = &problems[s].1;
        match opts.mode {
            MaskMode::Exhaustive => exhaustive_slice(pb),
            MaskMode::Greedy => Ok(greedy_slice(pb, opts.restarts, trial_seed(opts.seed, s * opts.restarts.max(1)))),
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut terms = [0.0; 4];
    let mut lhs = 0.0;
    for ((w, pb), (labels, _)) in problems.iter().zip(&solved) {
        for (t, v) in terms.iter_mut().zip(pb.terms(labels)) {
            *t += w * v;
        }
        lhs += w * pb.lhs();
    }
    let (n, m) = field.dims();
    Ok(FourSummandMask {
        base: field.base().clone(),
        rows: n + 1,
        cols: m + 1,
        labels: solved.into_iter().map(|(l, _)| l).collect(),
        mode: opts.mode,
        terms,
        lhs,
    })
}

/// A mask with the same label at every point.
pub fn constant_mask(field: &DecoupledField, label: u8) -> Result<FourSummandMask> {
    let problems = slice_problems(field)?;
    let mut terms = [0.0; 4];
    let mut lhs = 0.0;
    let labels: Vec<Vec<u8>> = problems.iter().map(|(_, pb)| vec![label; pb.values.len()]).collect();
    for ((w, pb), l) in problems.iter().zip(&labels) {
        for (t, v) in terms.iter_mut().zip(pb.terms(l)) {
            *t += w * v;
        }
        lhs += w * pb.lhs();
    }
    let (n, m) = field.dims();
    Ok(FourSummandMask {
        base: field.base().clone(),
        rows: n + 1,
        cols: m + 1,
        labels,
        mode: MaskMode::Greedy,
        terms,
        lhs,
    })
}
