//! The two-parameter Davis–Garsia construction.
//!
//! A [`FourSummandMask`] found on the decoupled slices is averaged back to
//! the original space: `W_k(i, j) = E^{(x,y)}_{i-1,j-1} k_{i,j}` evaluated at
//! `ξ = x_i`, `υ = y_j`, where the average runs over `x_{≥i}` and `y_{≥j}`.
//! The four parts are `1{W_k ≥ 1/4} f_{i,j}`; since the four weights sum to
//! one, at least one indicator fires at every point.

mod mask;
mod universal;

pub use mask::{
    constant_mask, exhaustive_slice, four_summand_partition, greedy_slice, slice_problems, FourSummandMask, MaskMode,
    SearchOptions, SliceProblem, EXHAUSTIVE_LIMIT, LABEL_A, LABEL_B, LABEL_C, LABEL_D,
};
pub use universal::davis_garsia_universal;

use serde::{Deserialize, Serialize};

use crate::filtration::IndexedFiltration;
use crate::operators::{delta, field_square_function, AdaptedField};
use crate::prob::RandomVariable;
use crate::{LabError, Result};

/// Threshold of the construction; ties count as above.
pub const THRESHOLD: f64 = 0.25;

/// Slack allowed on the factor-4 bound for the difference projection.
pub const PROJECTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RhsTerms {
    #[serde(rename = "tA")]
    pub t_a: f64,
    #[serde(rename = "tB")]
    pub t_b: f64,
    #[serde(rename = "tC")]
    pub t_c: f64,
    #[serde(rename = "tD")]
    pub t_d: f64,
}

impl RhsTerms {
    pub fn sum(&self) -> f64 {
        self.t_a + self.t_b + self.t_c + self.t_d
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t_a, self.t_b, self.t_c, self.t_d]
    }
}

#[derive(Debug, Clone)]
pub struct DGDecomposition {
    /// `1{W_k ≥ 1/4} f` for `k = a, b, c, d`.
    pub thresholded: [AdaptedField; 4],
    /// Thresholded parts divided by the number of indicators that fire; they sum to `f`.
    pub parts: [AdaptedField; 4],
    /// Terms of the thresholded parts.
    pub terms: RhsTerms,
    /// Terms of the normalized parts.
    pub part_terms: RhsTerms,
    /// `E sqrt(Σ |f_{i,j}|^2)`.
    pub lhs: f64,
    /// `terms.sum() / lhs`, or 0 for `f = 0`.
    pub achieved_ratio: f64,
    pub mask_mode: MaskMode,
    pub original: AdaptedField,
}

impl DGDecomposition {
    fn assemble(
        original: AdaptedField,
        thresholded: [AdaptedField; 4],
        parts: [AdaptedField; 4],
        mode: MaskMode,
    ) -> Result<Self> {
        let terms = evaluate_rhs(&thresholded)?;
        let part_terms = evaluate_rhs(&parts)?;
        let lhs = field_square_function(&original).expectation();
        let achieved_ratio = if lhs == 0.0 { 0.0 } else { terms.sum() / lhs };
        Ok(DGDecomposition { thresholded, parts, terms, part_terms, lhs, achieved_ratio, mask_mode: mode, original })
    }

    /// `|α + β + γ + δ| ≥ |f|` at every atom and index, for the thresholded parts.
    pub fn lattice_holds(&self) -> bool {
        let (r, c) = self.original.shape();
        (0..r).all(|i| {
            (0..c).all(|j| {
                let f = self.original.entry(i, j).values();
                (0..f.len()).all(|a| {
                    let s: f64 = self.thresholded.iter().map(|p| p.entry(i, j).value(a)).sum();
                    s.abs() >= f[a].abs()
                })
            })
        })
    }

    /// Largest `|Σ parts - f|` over atoms and indices.
    pub fn reconstruction_error(&self) -> f64 {
        let (r, c) = self.original.shape();
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..c {
                let f = self.original.entry(i, j);
                for a in 0..f.len() {
                    let s: f64 = self.parts.iter().map(|p| p.entry(i, j).value(a)).sum();
                    worst = worst.max((s - f.value(a)).abs());
                }
            }
        }
        worst
    }

    pub fn report(&self) -> DecompositionReport {
        DecompositionReport { terms: self.terms, ratio: self.achieved_ratio, mask_mode: self.mask_mode }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    #[serde(flatten)]
    pub terms: RhsTerms,
    pub ratio: f64,
    pub mask_mode: MaskMode,
}

fn cond_square(field: &AdaptedField, i: usize, j: usize, si: isize, sj: isize) -> Vec<f64> {
    let filt = field.filtration();
    let sq: Vec<f64> = field.entry(i, j).values().iter().map(|v| v * v).collect();
    filt.sigma_clamped(si, sj).average(&sq)
}

/// The four summands, with `E_{i,j} = E_{i ∨ 0, j ∨ 0}` and `∞` read as the last index.
pub fn evaluate_rhs(parts: &[AdaptedField; 4]) -> Result<RhsTerms> {
    let filt = parts[0].filtration();
    for p in &parts[1..] {
        if p.shape() != parts[0].shape() || !crate::prob::same_space(p.filtration().space(), filt.space()) {
            return Err(LabError::ShapeMismatch("parts live on different grids".into()));
        }
    }
    let (r, c) = filt.shape();
    let (n, m) = (r as isize - 1, c as isize - 1);
    let w = filt.space().weights();
    let expect = |v: &[f64]| -> f64 { v.iter().zip(w).map(|(x, w)| x * w).sum() };
    let len = w.len();

    let t_a = parts[0].entries().values().iter().map(|f| f.abs().expectation()).sum();

    let mut acc = vec![0.0; len];
    for i in 0..r {
        for j in 0..c {
            for (a, v) in acc.iter_mut().zip(cond_square(&parts[1], i, j, i as isize - 1, j as isize - 1)) {
                *a += v;
            }
        }
    }
    let t_b = expect(&acc.iter().map(|v| v.sqrt()).collect::<Vec<_>>());

    let mut t_c = 0.0;
    for i in 0..r {
        let mut acc = vec![0.0; len];
        for j in 0..c {
            for (a, v) in acc.iter_mut().zip(cond_square(&parts[2], i, j, n, j as isize - 1)) {
                *a += v;
            }
        }
        t_c += expect(&acc.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    }

    let mut t_d = 0.0;
    for j in 0..c {
        let mut acc = vec![0.0; len];
        for i in 0..r {
            for (a, v) in acc.iter_mut().zip(cond_square(&parts[3], i, j, i as isize - 1, m)) {
                *a += v;
            }
        }
        t_d += expect(&acc.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    }
    Ok(RhsTerms { t_a, t_b, t_c, t_d })
}

/// Builds thresholded and normalized parts from per-entry weights `W_k` (one value per atom).
pub(crate) fn threshold_parts(
    field: &AdaptedField,
    weights: impl Fn(usize, usize) -> [Vec<f64>; 4],
) -> Result<([AdaptedField; 4], [AdaptedField; 4])> {
    let (r, c) = field.shape();
    let space = field.filtration().space().clone();
    let mut thr: [Vec<RandomVariable>; 4] = Default::default();
    let mut norm: [Vec<RandomVariable>; 4] = Default::default();
    for i in 0..r {
        for j in 0..c {
            let w = weights(i, j);
            let f = field.entry(i, j).values();
            let fires: Vec<[bool; 4]> = (0..f.len()).map(|a| [0, 1, 2, 3].map(|k| w[k][a] >= THRESHOLD)).collect();
            for k in 0..4 {
                let t: Vec<f64> = (0..f.len()).map(|a| if fires[a][k] { f[a] } else { 0.0 }).collect();
                let nv: Vec<f64> = (0..f.len())
                    .map(|a| {
                        let count = fires[a].iter().filter(|b| **b).count();
                        if fires[a][k] {
                            f[a] / count as f64
                        } else {
                            0.0
                        }
                    })
                    .collect();
                thr[k].push(RandomVariable::new(space.clone(), t)?);
                norm[k].push(RandomVariable::new(space.clone(), nv)?);
            }
        }
    }
    let build =
        |vs: Vec<RandomVariable>| AdaptedField::new(field.filtration().clone(), crate::Grid::from_vec(r, c, vs));
    let [t0, t1, t2, t3] = thr;
    let [n0, n1, n2, n3] = norm;
    Ok(([build(t0)?, build(t1)?, build(t2)?, build(t3)?], [build(n0)?, build(n1)?, build(n2)?, build(n3)?]))
}

/// The thresholded decomposition of `field` (adapted to `canonical_2p(base, N, M)`) for `mask`.
pub fn davis_garsia_2p(field: &AdaptedField, mask: &FourSummandMask) -> Result<DGDecomposition> {
    let filt = field.filtration();
    let (r, c) = field.shape();
    if mask.shape() != (r, c) {
        return Err(LabError::ShapeMismatch(format!("mask {:?} for field {:?}", mask.shape(), (r, c))));
    }
    let space = filt.space();
    let base = mask.base();
    if !filt.is_product_type() || space.axes() != [r, c] || space.factors().iter().any(|f| f != base) {
        return Err(LabError::InvalidFiltration("mask and field live on different product spaces".into()));
    }
    let k = base.len();
    let bw = base.weights();
    let (n, m) = (r - 1, c - 1);
    let weights = |i: usize, j: usize| -> [Vec<f64>; 4] {
        let mut out: [Vec<f64>; 4] = Default::default();
        for o in out.iter_mut() {
            o.resize(space.len(), 0.0);
        }
        // Averaged coordinates: x_i..x_{N-1} and y_j..y_{M-1}.
        let (ax, ay) = (n.saturating_sub(i), m.saturating_sub(j));
        #[allow(clippy::needless_range_loop)]
        for atom in 0..space.len() {
            let cs = space.coords(atom);
            let (x, y) = cs.split_at(r);
            let mut xs = x[..n].to_vec();
            let mut ys = y[..m].to_vec();
            let mut digits = vec![0usize; ax + ay];
            loop {
                xs[i.min(n)..].copy_from_slice(&digits[..ax]);
                ys[j.min(m)..].copy_from_slice(&digits[ax..]);
                let w: f64 = digits.iter().map(|&d| bw[d]).product();
                let label = mask.label(mask.slice_index(&xs, &ys), i, j, x[i], y[j]);
                out[label as usize][atom] += w;
                let mut pos = digits.len();
                let done = loop {
                    if pos == 0 {
                        break true;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < k {
                        break false;
                    }
                    digits[pos] = 0;
                };
                if done {
                    break;
                }
            }
        }
        out
    };
    let (thresholded, parts) = threshold_parts(field, weights)?;
    DGDecomposition::assemble(field.clone(), thresholded, parts, mask.mode)
}

/// Replaces every part entry by `Δ_{i,j}` of itself.
pub fn project_martingale_differences(dec: &DGDecomposition) -> Result<DGDecomposition> {
    let project = |p: &AdaptedField| -> Result<AdaptedField> {
        let filt = p.filtration().clone();
        let mut err = None;
        let out = p.try_map(|(i, j), v| match delta(v, filt.as_ref(), i, j) {
            Ok(d) => d,
            Err(e) => {
                err = Some(e);
                v.clone()
            }
        });
        match err {
            Some(e) => Err(e),
            None => out,
        }
    };
    let thresholded = [0, 1, 2, 3].map(|k| project(&dec.thresholded[k]));
    let parts = [0, 1, 2, 3].map(|k| project(&dec.parts[k]));
    let [t0, t1, t2, t3] = thresholded;
    let [p0, p1, p2, p3] = parts;
    let original = project(&dec.original)?;
    DGDecomposition::assemble(original, [t0?, t1?, t2?, t3?], [p0?, p1?, p2?, p3?], dec.mask_mode)
}

/// Per-term `after / before` (0 when both vanish).
pub fn term_inflation(before: &RhsTerms, after: &RhsTerms) -> [f64; 4] {
    let (b, a) = (before.as_array(), after.as_array());
    [0, 1, 2, 3].map(|k| {
        if b[k] == 0.0 {
            if a[k] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            a[k] / b[k]
        }
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::decoupling::decouple_2p;
    use crate::filtration::{canonical_2p, Filtration1, Filtration2};
    use crate::operators::hardy_norms;
    use crate::prob::FiniteProbSpace;
    use crate::random;

    fn coin_filt(n: usize, m: usize) -> Arc<Filtration2> {
        Arc::new(canonical_2p(&FiniteProbSpace::coin(), n, m).unwrap())
    }

    #[test]
    fn all_a_mask_gives_alpha_equal_f() {
        let filt = coin_filt(1, 1);
        let field = random::adapted_field(&filt, &mut random::rng(5)).unwrap();
        let dec_field = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let mask = constant_mask(&dec_field, LABEL_A).unwrap();
        let dec = davis_garsia_2p(&field, &mask).unwrap();
        for ((i, j), f) in field.entries().iter() {
            assert_eq!(dec.thresholded[0].entry(i, j).values(), f.values());
            for k in 1..4 {
                assert_eq!(dec.thresholded[k].entry(i, j).max_abs(), 0.0);
            }
        }
        assert!(dec.lattice_holds());
        assert_eq!(dec.reconstruction_error(), 0.0);
    }

    #[test]
    fn zero_field() {
        let filt = coin_filt(1, 1);
        let field = AdaptedField::zeros(filt.clone());
        let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let mask = four_summand_partition(&d, &SearchOptions::exhaustive()).unwrap();
        assert_eq!(mask.rhs(), 0.0);
        let dec = davis_garsia_2p(&field, &mask).unwrap();
        assert_eq!(dec.terms, RhsTerms::default());
        assert_eq!(dec.achieved_ratio, 0.0);
        let json = serde_json::to_value(dec.report()).unwrap();
        assert_eq!(json["tA"], 0.0);
        assert_eq!(json["mask_mode"], "exhaustive");
    }

    #[test]
    fn random_pipeline_lattice_projection_and_ratio() {
        let filt = coin_filt(1, 1);
        for seed in 0..10 {
            let field = random::difference_field(&filt, &mut random::rng(seed)).unwrap();
            let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
            let mask = four_summand_partition(&d, &SearchOptions::greedy(seed)).unwrap();
            assert!((mask.lhs - d.decoupled_norm()).abs() < 1e-12);
            let grids = mask.indicator_grids(&d).unwrap();
            let space = d.decoupled_space().unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..space.len() {
                        let s: f64 = grids.iter().map(|g| g[(i, j)].value(a)).sum();
                        assert_eq!(s, 1.0);
                    }
                }
            }
            let dec = davis_garsia_2p(&field, &mask).unwrap();
            assert!(dec.lattice_holds());
            assert!(dec.reconstruction_error() < 1e-15);
            assert!(dec.achieved_ratio.is_finite() && dec.achieved_ratio > 0.0);
            let proj = project_martingale_differences(&dec).unwrap();
            for r in term_inflation(&dec.part_terms, &proj.part_terms) {
                assert!(r <= 4.0 + PROJECTION_SLACK, "{r}");
            }
            for k in 0..4 {
                assert!(proj.parts[k].is_martingale_difference(1e-10).unwrap());
            }
            // Already martingale differences: the projection does not change f.
            assert!(proj.reconstruction_error() < 1e-12);
            assert!(proj
                .original
                .entries()
                .values()
                .iter()
                .zip(field.entries().values())
                .all(|(a, b)| a.max_abs_diff(b) < 1e-12));
        }
    }

    #[test]
    fn projection_kills_constants_and_fixes_differences() {
        let filt = coin_filt(1, 1);
        let space = filt.space().clone();
        let field = AdaptedField::from_fn(filt.clone(), |i, j| {
            if (i, j) == (1, 1) {
                RandomVariable::constant(space.clone(), 2.0)
            } else {
                RandomVariable::zeros(space.clone())
            }
        })
        .unwrap();
        let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let dec = davis_garsia_2p(&field, &constant_mask(&d, LABEL_B).unwrap()).unwrap();
        let proj = project_martingale_differences(&dec).unwrap();
        assert_eq!(proj.parts[1].entry(1, 1).max_abs(), 0.0);
        let md = random::difference_field(&filt, &mut random::rng(1)).unwrap();
        let d = decouple_2p(&md, &FiniteProbSpace::coin()).unwrap();
        let dec = davis_garsia_2p(&md, &constant_mask(&d, LABEL_C).unwrap()).unwrap();
        let proj = project_martingale_differences(&dec).unwrap();
        for (a, b) in dec.parts[2].entries().values().iter().zip(proj.parts[2].entries().values()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn beta_with_deterministic_differences() {
        // β = Δ of a ±1 product martingale: |β_{i,j}| is predictable, so t_B = E S_2.
        let filt = coin_filt(1, 1);
        let space = filt.space().clone();
        let sign = |b: usize| if b == 0 { -1.0 } else { 1.0 };
        let beta = AdaptedField::from_fn(filt.clone(), |i, j| {
            RandomVariable::from_coords(space.clone(), |cs| {
                let x = if i == 0 { 1.0 } else { sign(cs[1]) };
                let y = if j == 0 { 1.0 } else { sign(cs[3]) };
                x * y * (1 + i + 2 * j) as f64
            })
        })
        .unwrap();
        let zero = AdaptedField::zeros(filt.clone());
        let t = evaluate_rhs(&[zero.clone(), beta.clone(), zero.clone(), zero]).unwrap();
        let s = field_square_function(&beta).expectation();
        assert!((t.t_b - s).abs() < 1e-12);
        assert_eq!((t.t_a, t.t_c, t.t_d), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gamma_on_last_row_is_a_row_conditional_hardy_norm() {
        let filt = coin_filt(1, 2);
        let n = 1;
        let g = random::gaussian(filt.space(), &mut random::rng(8));
        let row: Vec<_> = (0..3).map(|j| filt.sigma(n, j).clone()).collect();
        let row_filt = Filtration1::new(filt.space().clone(), row).unwrap();
        let expect_h = hardy_norms(&g, &row_filt).unwrap().h1_small_s;
        let space = filt.space().clone();
        let gamma = AdaptedField::from_fn(filt.clone(), |i, j| {
            if i == n {
                crate::operators::delta(&g, &row_filt, j, 0).unwrap()
            } else {
                RandomVariable::zeros(space.clone())
            }
        })
        .unwrap();
        let zero = AdaptedField::zeros(filt.clone());
        let t = evaluate_rhs(&[zero.clone(), zero.clone(), gamma, zero]).unwrap();
        assert!((t.t_c - expect_h).abs() < 1e-12, "{} vs {}", t.t_c, expect_h);
    }

    #[test]
    fn shape_mismatch() {
        let f11 = coin_filt(1, 1);
        let f12 = coin_filt(1, 2);
        let field = AdaptedField::zeros(f12);
        let d = decouple_2p(&AdaptedField::zeros(f11), &FiniteProbSpace::coin()).unwrap();
        let mask = constant_mask(&d, LABEL_A).unwrap();
        assert!(matches!(davis_garsia_2p(&field, &mask), Err(LabError::ShapeMismatch(_))));
    }
}
