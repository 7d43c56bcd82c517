//! Probe of the `ℓ_p`-valued martingale inequality and its gradient form.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::exec::{map_indexed, trial_seed, Execution};
use crate::filtration::{canonical_2p, Filtration2, IndexedFiltration};
use crate::operators::{conditional_expectations, delta, hardy_norms};
use crate::prob::{same_space, FiniteProbSpace, RandomVariable};
use crate::random;
use crate::report::{fmt_f64, write_csv};
use crate::{LabError, Result};

use super::dual::hardy_s_dual_norm;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeValues {
    /// `E (Σ_n |E_n F|^p)^{1/p}`
    pub lhs: f64,
    pub h1_big_s: f64,
    pub h1_big_s_dual: f64,
    pub primal_ratio_h1s: f64,
    pub primal_ratio_dual: f64,
    /// `‖Σ_k Δ_k(Σ_{n ≥ k} sgn f_n |f_n|^{p-1} / (Σ_j |f_j|^p)^{(p-1)/p})‖_{(H_1^S)^*}`
    pub dual_value: f64,
}

/// Both readings of the primal ratio and the gradient expression for `F`.
pub fn gradient_probe(big_f: &RandomVariable, filt: &impl IndexedFiltration, p: f64, tol: f64) -> Result<ProbeValues> {
    if !(p > 1.0) {
        return Err(LabError::InvalidParameter(format!("p = {p}")));
    }
    if !same_space(big_f.space(), filt.space()) {
        return Err(LabError::SpaceMismatch);
    }
    if big_f.max_abs() == 0.0 {
        return Err(LabError::InvalidParameter("F = 0".into()));
    }
    let (rows, cols) = filt.shape();
    let fs = conditional_expectations(big_f, filt)?;
    let n_atoms = big_f.len();
    let mut total = vec![0.0; n_atoms];
    for (_, f) in fs.iter() {
        for (t, v) in total.iter_mut().zip(f.values()) {
            *t += v.abs().powf(p);
        }
    }
    let lhs = total.iter().zip(big_f.space().weights()).map(|(t, w)| w * t.powf(1.0 / p)).sum::<f64>();
    let denom: Vec<f64> = total.iter().map(|t| t.powf((p - 1.0) / p)).collect();
    let u = fs.map(|_, f| {
        RandomVariable::from_atoms(big_f.space().clone(), |a| {
            if denom[a] == 0.0 {
                0.0
            } else {
                let v = f.value(a);
                v.signum() * v.abs().powf(p - 1.0) / denom[a]
            }
        })
    });
    let mut g = vec![0.0; n_atoms];
    for i in 0..rows {
        for j in 0..cols {
            let mut tail = vec![0.0; n_atoms];
            for a in i..rows {
                for b in j..cols {
                    for (t, v) in tail.iter_mut().zip(u.get(a, b).expect("in grid").values()) {
                        *t += v;
                    }
                }
            }
            let d = delta(&RandomVariable::new(big_f.space().clone(), tail)?, filt, i, j)?;
            for (x, v) in g.iter_mut().zip(d.values()) {
                *x += v;
            }
        }
    }
    let g = RandomVariable::new(big_f.space().clone(), g)?;
    let dual_value = hardy_s_dual_norm(&g, filt, tol)?.value;
    let h1_big_s = hardy_norms(big_f, filt)?.h1_big_s;
    let h1_big_s_dual = hardy_s_dual_norm(big_f, filt, tol)?.value;
    Ok(ProbeValues {
        lhs,
        h1_big_s,
        h1_big_s_dual,
        primal_ratio_h1s: lhs / h1_big_s,
        primal_ratio_dual: lhs / h1_big_s_dual,
        dual_value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub seed: u64,
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub values: ProbeValues,
}

#[derive(Debug, Clone)]
pub struct ProbeSweep {
    pub base: FiniteProbSpace,
    pub n: usize,
    pub m: usize,
    pub ps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

/// Random terminal values `F` on the canonical grid, one row per `(p, trial)`,
/// sorted by `p` then seed.
pub fn probe_sweep(sweep: &ProbeSweep, exec: Execution) -> Result<Vec<ProbeRow>> {
    let filt = Arc::new(canonical_2p(&sweep.base, sweep.n, sweep.m)?);
    let jobs: Vec<(f64, usize)> = sweep.ps.iter().flat_map(|&p| (0..sweep.trials).map(move |t| (p, t))).collect();
    let rows = map_indexed(jobs.len(), exec, |k| {
        let (p, t) = jobs[k];
        let seed = trial_seed(sweep.seed, t);
        probe_row(&filt, seed, p, sweep)
    });
    rows.into_iter().collect()
}

fn probe_row(filt: &Filtration2, seed: u64, p: f64, sweep: &ProbeSweep) -> Result<ProbeRow> {
    let big_f = random::martingale(filt, &mut random::rng(seed));
    Ok(ProbeRow { seed, p, n: sweep.n, m: sweep.m, values: gradient_probe(&big_f, filt, p, sweep.tol)? })
}

pub const PROBE_HEADER: [&str; 7] = ["seed", "p", "N", "M", "primal_ratio_h1S", "primal_ratio_dual", "dual_value"];

pub fn write_probe_csv<W: Write>(out: W, rows: &[ProbeRow]) -> Result<()> {
    write_csv(
        out,
        &PROBE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                fmt_f64(r.p),
                r.n.to_string(),
                r.m.to_string(),
                fmt_f64(r.values.primal_ratio_h1s),
                fmt_f64(r.values.primal_ratio_dual),
                fmt_f64(r.values.dual_value),
            ]
        }),
    )
}
