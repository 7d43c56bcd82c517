//! Decoupled fields: the last coordinate of each adapted entry is replaced by
//! a fresh independent copy.
//!
//! One parameter: `f_k(x_0..x_{k-1}, η_k)`. Two parameters:
//! `f_{i,j}((x_{<i}, η_i), (y_{<j}, θ_j))`. The enlarged space orders its
//! coordinates `x, η` (one parameter) or `x, y, η, θ` (two parameters).

use std::sync::Arc;

use rand::Rng;

use crate::exec::{map_indexed, trial_seed, Execution};
use crate::filtration::{canonical_1p, canonical_2p, Filtration1, IndexedFiltration};
use crate::grid::Grid;
use crate::operators::{field_square_function, AdaptedField};
use crate::prob::{FiniteProbSpace, Partition, ProductSpace, RandomVariable};
use crate::random;
use crate::report::{fmt_f64, write_csv};
use crate::{LabError, Result};

/// Largest enlarged space that is built atom by atom.
pub const MATERIALIZE_LIMIT: usize = 1 << 20;

const ADAPTED_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DecoupledField {
    base: FiniteProbSpace,
    /// `(N, M)`; `None` for one parameter.
    n: usize,
    m: Option<usize>,
    original_space: Arc<ProductSpace>,
    original: Grid<RandomVariable>,
    decoupled_space: Option<Arc<ProductSpace>>,
    entries: Option<Grid<RandomVariable>>,
}

/// Odometer over `len` coordinates of `base`, yielding digit vectors and weights.
fn for_each_point(base: &FiniteProbSpace, len: usize, mut f: impl FnMut(&[usize], f64)) {
    let k = base.len();
    let w = base.weights();
    let mut digits = vec![0usize; len];
    loop {
        let weight: f64 = digits.iter().map(|&d| w[d]).product();
        f(&digits, weight);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
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

impl DecoupledField {
    fn rows(&self) -> usize {
        self.n + 1
    }

    fn cols(&self) -> usize {
        self.m.map_or(1, |m| m + 1)
    }

    /// Atom of the original space holding `f_{i,j}` at prefix `xs` / `ys` with
    /// fresh last coordinates `eta` / `theta`.
    fn source_atom(&self, i: usize, j: usize, xs: &[usize], ys: &[usize], eta: usize, theta: usize) -> usize {
        let mut coords = vec![0usize; self.original_space.n_coords()];
        coords[..i].copy_from_slice(&xs[..i]);
        coords[i] = eta;
        if self.m.is_some() {
            let off = self.n + 1;
            coords[off..off + j].copy_from_slice(&ys[..j]);
            coords[off + j] = theta;
        }
        self.original_space.encode(&coords)
    }

    fn decoupled_value(&self, i: usize, j: usize, xs: &[usize], ys: &[usize], eta: &[usize], theta: &[usize]) -> f64 {
        let th = if self.m.is_some() { theta[j] } else { 0 };
        self.original[(i, j)].value(self.source_atom(i, j, xs, ys, eta[i], th))
    }

    fn build(
        base: FiniteProbSpace,
        n: usize,
        m: Option<usize>,
        original_space: Arc<ProductSpace>,
        original: Grid<RandomVariable>,
    ) -> Result<Self> {
        let mut out = DecoupledField { base, n, m, original_space, original, decoupled_space: None, entries: None };
        let coords = 2 * (out.rows() + m.map_or(0, |m| m + 1));
        let atoms = (out.base.len() as f64).powi(coords as i32);
        if atoms <= MATERIALIZE_LIMIT as f64 {
            let lengths: Vec<usize> = match m {
                None => vec![n + 1, n + 1],
                Some(m) => vec![n + 1, m + 1, n + 1, m + 1],
            };
            let space = Arc::new(ProductSpace::power(&out.base, &lengths)?);
            let (r, c) = (out.rows(), out.cols());
            let entries = Grid::from_fn(r, c, |i, j| {
                RandomVariable::from_coords(space.clone(), |cs| {
                    let (xs, ys, eta, theta) = out.split(cs);
                    out.decoupled_value(i, j, xs, ys, eta, theta)
                })
            });
            out.decoupled_space = Some(space);
            out.entries = Some(entries);
        }
        Ok(out)
    }

    /// Splits enlarged coordinates into `(x, y, η, θ)`.
    fn split<'a>(&self, cs: &'a [usize]) -> (&'a [usize], &'a [usize], &'a [usize], &'a [usize]) {
        let n1 = self.n + 1;
        match self.m {
            None => (&cs[..n1], &[], &cs[n1..], &[]),
            Some(m) => {
                let m1 = m + 1;
                (&cs[..n1], &cs[n1..n1 + m1], &cs[n1 + m1..2 * n1 + m1], &cs[2 * n1 + m1..])
            }
        }
    }

    pub fn original(&self) -> &Grid<RandomVariable> {
        &self.original
    }

    pub fn original_space(&self) -> &Arc<ProductSpace> {
        &self.original_space
    }

    pub fn base(&self) -> &FiniteProbSpace {
        &self.base
    }

    /// `(N, M)`, with `M = 0` for one parameter.
    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m.unwrap_or(0))
    }

    pub fn is_two_parameter(&self) -> bool {
        self.m.is_some()
    }

    pub fn decoupled_space(&self) -> Option<&Arc<ProductSpace>> {
        self.decoupled_space.as_ref()
    }

    /// Entries on the enlarged space, when it is small enough to build.
    pub fn entries(&self) -> Option<&Grid<RandomVariable>> {
        self.entries.as_ref()
    }

    /// Value of decoupled entry `(i, j)` at an enlarged-space coordinate vector.
    pub fn value_at(&self, i: usize, j: usize, coords: &[usize]) -> f64 {
        let (xs, ys, eta, theta) = self.split(coords);
        self.decoupled_value(i, j, xs, ys, eta, theta)
    }

    /// Substitutes `η := x`, `θ := y` and returns the resulting field on the original space.
    pub fn diagonal(&self) -> Grid<RandomVariable> {
        let (r, c) = (self.rows(), self.cols());
        Grid::from_fn(r, c, |i, j| {
            RandomVariable::from_coords(self.original_space.clone(), |cs| {
                let n1 = self.n + 1;
                let (xs, ys) = if self.m.is_some() { (&cs[..n1], &cs[n1..]) } else { (cs, &[][..]) };
                let th = if self.m.is_some() { ys[j] } else { 0 };
                self.original[(i, j)].value(self.source_atom(i, j, xs, ys, xs[i], th))
            })
        })
    }

    /// The sigma-algebra each decoupled entry must be measurable for.
    pub fn entry_sigma(&self, i: usize, j: usize) -> Option<Partition> {
        let space = self.decoupled_space.as_ref()?;
        let n1 = self.n + 1;
        let coords: Vec<usize> = match self.m {
            None => (0..i).chain([n1 + i]).collect(),
            Some(m) => {
                let m1 = m + 1;
                (0..i).chain(n1..n1 + j).chain([n1 + m1 + i, 2 * n1 + m1 + j]).collect()
            }
        };
        Some(Partition::generated_by_coords(space.clone(), &coords))
    }

    /// Checks every materialized entry against [`Self::entry_sigma`].
    pub fn entries_have_expected_dependence(&self) -> Option<bool> {
        let entries = self.entries.as_ref()?;
        Some(entries.iter().all(|((i, j), f)| f.is_measurable(&self.entry_sigma(i, j).expect("materialized"), 0.0)))
    }

    /// `E sqrt(Σ |f_{i,j}|^2)` of the original field.
    pub fn original_norm(&self) -> f64 {
        let n = self.original_space.len();
        let mut acc = vec![0.0; n];
        for (_, f) in self.original.iter() {
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += v * v;
            }
        }
        acc.iter().zip(self.original_space.weights()).map(|(a, w)| w * a.sqrt()).sum()
    }

    /// `E sqrt(Σ |f_{i,j}((x_{<i}, η_i), (y_{<j}, θ_j))|^2)` over the enlarged space.
    ///
    /// Only `x_{<N}`, `y_{<M}`, `η` and `θ` are integrated; `x_N` and `y_M`
    /// never enter a decoupled entry.
    pub fn decoupled_norm(&self) -> f64 {
        let (r, c) = (self.rows(), self.cols());
        let (nx, ny) = (self.n, self.m.unwrap_or(0));
        let (ne, nt) = (r, if self.m.is_some() { c } else { 0 });
        let mut total = 0.0;
        let mut xs = vec![0usize; nx + 1];
        let mut ys = vec![0usize; ny + 1];
        for_each_point(&self.base, nx + ny + ne + nt, |d, w| {
            xs[..nx].copy_from_slice(&d[..nx]);
            ys[..ny].copy_from_slice(&d[nx..nx + ny]);
            let eta = &d[nx + ny..nx + ny + ne];
            let theta = &d[nx + ny + ne..];
            let mut s = 0.0;
            for i in 0..r {
                for j in 0..c {
                    let v = self.decoupled_value(i, j, &xs, &ys, eta, theta);
                    s += v * v;
                }
            }
            total += w * s.sqrt();
        });
        total
    }
}

/// Decouples `f_0, ..., f_N` adapted to the canonical one-parameter filtration.
pub fn decouple_1p(fs: &[RandomVariable], filt: &Filtration1, base: &FiniteProbSpace) -> Result<DecoupledField> {
    if fs.is_empty() {
        return Err(LabError::Empty("decoupling input".into()));
    }
    let n = filt.last_index();
    if fs.len() != n + 1 {
        return Err(LabError::ShapeMismatch(format!("{} entries for N = {n}", fs.len())));
    }
    if filt.space().n_coords() != n + 1 || filt.space().factors().iter().any(|f| f != base) {
        return Err(LabError::InvalidFiltration("decoupling needs the canonical product filtration".into()));
    }
    for (k, f) in fs.iter().enumerate() {
        if !crate::prob::same_space(f.space(), filt.space()) {
            return Err(LabError::SpaceMismatch);
        }
        if !f.is_measurable(filt.sigma(k, 0), ADAPTED_TOL) {
            return Err(LabError::NotAdapted(format!("entry {k}")));
        }
    }
    let original = Grid::from_vec(n + 1, 1, fs.to_vec());
    DecoupledField::build(base.clone(), n, None, filt.space().clone(), original)
}

/// Decouples a field adapted to `canonical_2p(base, N, M)`.
pub fn decouple_2p(field: &AdaptedField, base: &FiniteProbSpace) -> Result<DecoupledField> {
    let filt = field.filtration();
    let (r, c) = filt.shape();
    let (n, m) = (r - 1, c - 1);
    let space = filt.space();
    if !filt.is_product_type() || space.axes() != [n + 1, m + 1] || space.factors().iter().any(|f| f != base) {
        return Err(LabError::InvalidFiltration("decoupling needs the canonical product filtration".into()));
    }
    DecoupledField::build(base.clone(), n, Some(m), space.clone(), field.entries().clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Constant entries with random values.
    Constant,
    /// Entry `(i, j)` depends only on `x_i` (and `y_j`).
    CoordinateOnly,
    /// `E_{i,j}` of independent Gaussians.
    RandomAdapted,
}

#[derive(Debug, Clone)]
pub struct DecouplingFamily {
    pub base: FiniteProbSpace,
    pub n: usize,
    /// `None` for one parameter.
    pub m: Option<usize>,
    pub kind: FamilyKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplingSample {
    pub trial: usize,
    /// Original `L1(l2)` norm.
    pub lhs: f64,
    /// Decoupled `L1(l2)` norm.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DecouplingEnvelope {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub samples: Vec<DecouplingSample>,
}

impl DecouplingEnvelope {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_csv(
            out,
            &["trial", "lhs", "rhs", "ratio"],
            self.samples.iter().map(|s| vec![s.trial.to_string(), fmt_f64(s.lhs), fmt_f64(s.rhs), fmt_f64(s.ratio)]),
        )
    }
}

fn sample_entries(
    family: &DecouplingFamily,
    space: &Arc<ProductSpace>,
    sigmas: &Grid<&Partition>,
    rng: &mut impl Rng,
) -> Grid<RandomVariable> {
    let k = family.base.len();
    let n1 = family.n + 1;
    sigmas.map(|(i, j), sigma| match family.kind {
        FamilyKind::Constant => RandomVariable::constant(space.clone(), rng.sample(rand_distr::StandardNormal)),
        FamilyKind::CoordinateOnly => {
            let table: Vec<f64> = (0..k * k).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            RandomVariable::from_coords(space.clone(), |cs| {
                let y = if family.m.is_some() { cs[n1 + j] } else { 0 };
                table[cs[i] * k + y]
            })
        }
        FamilyKind::RandomAdapted => sigma.cond_expect(&random::gaussian(space, rng)).expect("same space"),
    })
}

fn decouple_sample(family: &DecouplingFamily, seed: u64) -> Result<DecoupledField> {
    let mut rng = random::rng(seed);
    match family.m {
        None => {
            let filt = canonical_1p(&family.base, family.n)?;
            let sigmas = Grid::from_fn(family.n + 1, 1, |i, _| filt.sigma(i, 0));
            let entries = sample_entries(family, filt.space(), &sigmas, &mut rng);
            decouple_1p(&entries.into_values(), &filt, &family.base)
        }
        Some(m) => {
            let filt = Arc::new(canonical_2p(&family.base, family.n, m)?);
            let sigmas = Grid::from_fn(family.n + 1, m + 1, |i, j| filt.sigma(i, j));
            let entries = sample_entries(family, filt.space(), &sigmas, &mut rng);
            decouple_2p(&AdaptedField::new(filt.clone(), entries)?, &family.base)
        }
    }
}

/// Min and max of decoupled / original `L1(l2)` ratios over seeded trials.
///
/// Trial `t` draws from the stream seeded with `seed + t`.
pub fn estimate_decoupling_constants(
    family: &DecouplingFamily,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<DecouplingEnvelope> {
    if trials == 0 {
        return Err(LabError::Empty("decoupling family (zero trials)".into()));
    }
    let samples = map_indexed(trials, exec, |t| -> Result<DecouplingSample> {
        let d = decouple_sample(family, trial_seed(seed, t))?;
        let (lhs, rhs) = (d.original_norm(), d.decoupled_norm());
        let ratio = if lhs == 0.0 && rhs == 0.0 { 1.0 } else { rhs / lhs };
        Ok(DecouplingSample { trial: t, lhs, rhs, ratio })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(DecouplingEnvelope { min_ratio, max_ratio, samples })
}

/// Original `L1(l2)` norm of an adapted field, `E sqrt(Σ |f_{i,j}|^2)`.
pub fn field_l1l2(field: &AdaptedField) -> f64 {
    field_square_function(field).expectation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng;

    fn coin() -> FiniteProbSpace {
        FiniteProbSpace::coin()
    }

    #[test]
    fn one_parameter_diagonal_and_dependence() {
        let filt = canonical_1p(&coin(), 2).unwrap();
        let mut r = rng(1);
        let fs: Vec<RandomVariable> =
            (0..3).map(|k| filt.sigma(k, 0).cond_expect(&random::gaussian(filt.space(), &mut r)).unwrap()).collect();
        let d = decouple_1p(&fs, &filt, &coin()).unwrap();
        for (k, f) in d.diagonal().values().iter().enumerate() {
            assert_eq!(f.values(), fs[k].values());
        }
        assert_eq!(d.entries_have_expected_dependence(), Some(true));
        let direct: f64 = {
            let space = d.decoupled_space().unwrap();
            let e = d.entries().unwrap();
            (0..space.len())
                .map(|a| space.weight(a) * e.values().iter().map(|f| f.value(a).powi(2)).sum::<f64>().sqrt())
                .sum()
        };
        assert!((direct - d.decoupled_norm()).abs() < 1e-12);
        let ratio = d.decoupled_norm() / d.original_norm();
        assert!(ratio.is_finite() && ratio > 0.0);
    }

    #[test]
    fn constants_are_unchanged() {
        let filt = canonical_1p(&coin(), 1).unwrap();
        let fs = vec![
            RandomVariable::constant(filt.space().clone(), 2.0),
            RandomVariable::constant(filt.space().clone(), -1.0),
        ];
        let d = decouple_1p(&fs, &filt, &coin()).unwrap();
        for (k, e) in d.entries().unwrap().values().iter().enumerate() {
            assert!(e.values().iter().all(|v| *v == fs[k].value(0)));
        }
    }

    #[test]
    fn non_adapted_input_is_rejected() {
        let filt = canonical_1p(&coin(), 1).unwrap();
        let bad = RandomVariable::from_coords(filt.space().clone(), |c| c[1] as f64);
        let fs = vec![bad.clone(), bad];
        assert!(matches!(decouple_1p(&fs, &filt, &coin()), Err(LabError::NotAdapted(_))));
    }

    #[test]
    fn two_parameter_coin_materializes_256_atoms() {
        let filt = Arc::new(canonical_2p(&coin(), 1, 1).unwrap());
        let field = random::adapted_field(&filt, &mut rng(9)).unwrap();
        let d = decouple_2p(&field, &coin()).unwrap();
        assert_eq!(d.decoupled_space().unwrap().len(), 256);
        assert_eq!(d.entries_have_expected_dependence(), Some(true));
        for ((i, j), f) in d.diagonal().iter() {
            assert_eq!(f.values(), field.entry(i, j).values());
        }
        assert!((d.original_norm() - field_l1l2(&field)).abs() < 1e-12);
        let space = d.decoupled_space().unwrap();
        let e = d.entries().unwrap();
        let direct: f64 = (0..space.len())
            .map(|a| space.weight(a) * e.values().iter().map(|f| f.value(a).powi(2)).sum::<f64>().sqrt())
            .sum();
        assert!((direct - d.decoupled_norm()).abs() < 1e-12);
    }

    #[test]
    fn corner_entry_only_decouples_exactly() {
        let filt = Arc::new(canonical_2p(&coin(), 1, 1).unwrap());
        let space = filt.space().clone();
        let field = AdaptedField::from_fn(filt.clone(), |i, j| {
            if (i, j) == (0, 0) {
                RandomVariable::from_coords(space.clone(), |c| [1.0, -3.0, 0.5, 2.0][2 * c[0] + c[2]])
            } else {
                RandomVariable::zeros(space.clone())
            }
        })
        .unwrap();
        let d = decouple_2p(&field, &coin()).unwrap();
        assert!((d.decoupled_norm() - d.original_norm()).abs() < 1e-12);
    }

    #[test]
    fn envelopes() {
        for m in [None, Some(1)] {
            for kind in [FamilyKind::Constant, FamilyKind::CoordinateOnly] {
                let fam = DecouplingFamily { base: coin(), n: if m.is_some() { 1 } else { 2 }, m, kind };
                let env = estimate_decoupling_constants(&fam, 20, 3, Execution::Parallel).unwrap();
                assert!((env.min_ratio - 1.0).abs() < 1e-12 && (env.max_ratio - 1.0).abs() < 1e-12, "{kind:?} {env:?}");
            }
        }
        let fam = DecouplingFamily { base: coin(), n: 2, m: None, kind: FamilyKind::RandomAdapted };
        let a = estimate_decoupling_constants(&fam, 50, 11, Execution::Parallel).unwrap();
        let b = estimate_decoupling_constants(&fam, 50, 11, Execution::Sequential).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.min_ratio > 0.0 && a.max_ratio.is_finite());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("trial,lhs,rhs,ratio\n0,"));
        assert!(estimate_decoupling_constants(&fam, 0, 0, Execution::Parallel).is_err());
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let filt = Arc::new(canonical_2p(&coin(), 1, 1).unwrap());
        let field = random::adapted_field(&filt, &mut rng(2)).unwrap();
        let scaled = field.try_map(|_, f| f * -7.5).unwrap();
        let (a, b) = (decouple_2p(&field, &coin()).unwrap(), decouple_2p(&scaled, &coin()).unwrap());
        let ra = a.decoupled_norm() / a.original_norm();
        let rb = b.decoupled_norm() / b.original_norm();
        assert!((ra - rb).abs() < 1e-12);
    }
}
