//! Doob-constant estimation for finite families of sigma-algebras.
//!
//! The empirical constant is `1 / max_f ‖sup_k |E_k f|‖_p / ‖f‖_p`, maximized
//! by gradient ascent on the log-ratio from random starts. A certified lower
//! bound is reported separately and never depends on the search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::IndexedFiltration;
use crate::exec::{map_indexed, trial_seed, Execution};
use crate::prob::Partition;
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy)]
pub struct DoobOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stationarity tolerance on the log-ratio.
    pub tol: f64,
    pub exec: Execution,
}

impl Default for DoobOptions {
    fn default() -> Self {
        DoobOptions { restarts: 64, seed: 0, max_iter: 500, tol: 1e-8, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone)]
pub struct DoobEstimate {
    pub p: f64,
    /// `(1 - 1/p)^d` from iterating the one-parameter Doob inequality, or
    /// `None` when the family has no known structure.
    pub certified: Option<f64>,
    /// `1 / (largest ratio found)`.
    pub empirical: f64,
    /// Largest `‖Mf‖_p / ‖f‖_p` found, one entry per restart.
    pub restart_ratios: Vec<f64>,
    /// Maximizing function (atom values).
    pub witness: Vec<f64>,
}

/// `(1 - 1/p)` per filtration direction: exponent 0 for a single distinct
/// sigma-algebra, 1 for a chain, 2 for a two-parameter grid with (F4).
pub fn certified_doob_lower_bound(filt: &impl IndexedFiltration, p: f64) -> Option<f64> {
    let family = distinct(filt.family());
    let base = 1.0 - 1.0 / p;
    if family.len() == 1 {
        return Some(1.0);
    }
    if is_chain(&family) {
        return Some(base);
    }
    (filt.known_f4() && filt.directions() == 2).then_some(base * base)
}

pub fn doob_constant(filt: &impl IndexedFiltration, p: f64, opts: &DoobOptions) -> Result<DoobEstimate> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(LabError::InvalidParameter(format!("Doob exponent p = {p} must exceed 1")));
    }
    if opts.restarts == 0 {
        return Err(LabError::InvalidParameter("at least one restart".into()));
    }
    let family = distinct(filt.family());
    let weights = filt.space().weights();
    let runs = map_indexed(opts.restarts, opts.exec, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(opts.seed, r));
        let n = weights.len();
        let start: Vec<f64> = match r % 3 {
            0 => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            1 => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
            _ => {
                let hot = rng.random_range(0..n);
                (0..n).map(|a| if a == hot { 1.0 } else { 0.05 * rng.sample::<f64, _>(StandardNormal) }).collect()
            }
        };
        ascend(&family, weights, start, p, opts.max_iter, opts.tol)
    });
    let (best_idx, _) = runs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, (r, _))| if *r > bv { (i, *r) } else { (bi, bv) });
    let best = runs[best_idx].0.max(1.0);
    Ok(DoobEstimate {
        p,
        certified: certified_doob_lower_bound(filt, p),
        empirical: 1.0 / best,
        restart_ratios: runs.iter().map(|(r, _)| *r).collect(),
        witness: runs[best_idx].1.clone(),
    })
}

/// `‖sup_k |E_k f|‖_p / ‖f‖_p` for a family of partitions on a common space.
pub fn maximal_ratio(family: &[&Partition], f: &[f64], p: f64) -> f64 {
    let weights = family[0].space().weights();
    let (m, _) = maximal(family, f);
    lp(&m, weights, p) / lp(f, weights, p)
}

fn distinct(family: Vec<&Partition>) -> Vec<&Partition> {
    let mut out: Vec<&Partition> = Vec::new();
    for p in family {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn is_chain(family: &[&Partition]) -> bool {
    let mut sorted = family.to_vec();
    sorted.sort_by_key(|p| p.n_blocks());
    sorted.windows(2).all(|w| w[1].refines(w[0]))
}

fn lp(v: &[f64], w: &[f64], p: f64) -> f64 {
    v.iter().zip(w).map(|(x, w)| w * x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Pointwise `sup_k |E_k f|`, signed value at the maximizer, and the argmax index.
fn maximal(family: &[&Partition], f: &[f64]) -> (Vec<f64>, Vec<(usize, f64)>) {
    let n = f.len();
    let mut best = vec![(0usize, 0.0f64); n];
    let mut m = vec![-1.0f64; n];
    for (k, sigma) in family.iter().enumerate() {
        let e = sigma.average(f);
        for a in 0..n {
            if e[a].abs() > m[a] {
                m[a] = e[a].abs();
                best[a] = (k, e[a]);
            }
        }
    }
    (m, best)
}

fn log_ratio(family: &[&Partition], w: &[f64], f: &[f64], p: f64) -> f64 {
    let (m, _) = maximal(family, f);
    lp(&m, w, p).ln() - lp(f, w, p).ln()
}

fn ascend(family: &[&Partition], w: &[f64], mut f: Vec<f64>, p: f64, max_iter: usize, tol: f64) -> (f64, Vec<f64>) {
    let n = f.len();
    let normalize = |f: &mut Vec<f64>| {
        let s = lp(f, w, p);
        if s > 0.0 {
            f.iter_mut().for_each(|x| *x /= s);
        }
    };
    if lp(&f, w, p) == 0.0 {
        f = vec![1.0; n];
    }
    normalize(&mut f);
    let mut value = log_ratio(family, w, &f, p);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let (m, arg) = maximal(family, &f);
        let mp: f64 = m.iter().zip(w).map(|(x, w)| w * x.powf(p)).sum();
        let fp: f64 = f.iter().zip(w).map(|(x, w)| w * x.abs().powf(p)).sum();
        let mut grad = vec![0.0; n];
        for (k, sigma) in family.iter().enumerate() {
            let g: Vec<f64> = (0..n)
                .map(|a| {
                    let (kk, v) = arg[a];
                    if kk == k && v != 0.0 {
                        v.signum() * v.abs().powf(p - 1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            if g.iter().all(|x| *x == 0.0) {
                continue;
            }
            for (gr, e) in grad.iter_mut().zip(sigma.average(&g)) {
                *gr += e / mp;
            }
        }
        for (gr, x) in grad.iter_mut().zip(&f) {
            *gr -= x.signum() * x.abs().powf(p - 1.0) / fp;
        }
        let gnorm = grad.iter().zip(w).map(|(g, w)| w * g * g).sum::<f64>().sqrt();
        if gnorm < tol {
            break;
        }
        step *= 2.0;
        let mut improved = None;
        while step > 1e-12 {
            let mut cand: Vec<f64> = f.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            normalize(&mut cand);
            let v = log_ratio(family, w, &cand, p);
            if v > value {
                improved = Some((cand, v));
                break;
            }
            step *= 0.5;
        }
        match improved {
            Some((cand, v)) => {
                let gain = v - value;
                f = cand;
                value = v;
                if gain < tol * 1e-2 {
                    break;
                }
            }
            None => break,
        }
    }
    (value.exp(), f)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::filtration::{canonical_1p, canonical_2p, Filtration1};
    use crate::prob::{FiniteProbSpace, ProductSpace};

    #[test]
    fn single_sigma_algebra_has_constant_one() {
        let s = Arc::new(ProductSpace::power(&FiniteProbSpace::coin(), &[2]).unwrap());
        let f = Filtration1::new(s.clone(), vec![Partition::generated_by_coords(s, &[0])]).unwrap();
        let est = doob_constant(&f, 2.0, &DoobOptions { restarts: 8, ..Default::default() }).unwrap();
        assert_eq!(est.certified, Some(1.0));
        assert!((est.empirical - 1.0).abs() < 1e-9, "{}", est.empirical);
    }

    #[test]
    fn one_parameter_bound_matches_sign_pattern_scan() {
        // Oracle: maximize the ratio over all ±1/0 patterns on the 4-atom space.
        let filt = canonical_1p(&FiniteProbSpace::coin(), 1).unwrap();
        let family = filt.family();
        let mut best: f64 = 0.0;
        for code in 1..3usize.pow(4) {
            let f: Vec<f64> = (0..4).map(|k| ((code / 3usize.pow(k)) % 3) as f64 - 1.0).collect();
            best = best.max(maximal_ratio(&family, &f, 2.0));
        }
        let est = doob_constant(&filt, 2.0, &DoobOptions::default()).unwrap();
        assert_eq!(est.certified, Some(0.5));
        assert!(1.0 / best >= 0.5);
        // The continuous search can only do at least as well as the lattice scan.
        assert!(est.empirical <= 1.0 / best + 1e-9);
        assert!(est.empirical >= 0.5 - 1e-9);
    }

    #[test]
    fn two_parameter_certified_bound() {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let est = doob_constant(&filt, 2.0, &DoobOptions { restarts: 16, ..Default::default() }).unwrap();
        assert_eq!(est.certified, Some(0.25));
        assert!(est.empirical >= 0.25 - 1e-9);
    }

    #[test]
    fn rejects_p_at_most_one() {
        let filt = canonical_1p(&FiniteProbSpace::coin(), 1).unwrap();
        assert!(doob_constant(&filt, 1.0, &DoobOptions::default()).is_err());
    }

    #[test]
    fn non_f4_grid_has_no_certificate() {
        let filt = crate::filtration::tests::correlated_filtration();
        assert_eq!(certified_doob_lower_bound(&filt, 2.0), None);
    }
}
