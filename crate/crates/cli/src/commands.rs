//! The five experiment commands. Each returns an [`Outcome`]; rows are already
//! in canonical (trial-index) order.

use std::sync::Arc;

use mhl_core::decomposition::{
    davis_garsia_2p, davis_garsia_universal, four_summand_partition, project_martingale_differences, term_inflation,
    DGDecomposition, SearchOptions,
};
use mhl_core::decoupling::{decouple_2p, estimate_decoupling_constants, DecouplingFamily, FamilyKind};
use mhl_core::exec::{map_indexed, trial_seed, Execution};
use mhl_core::filtration::{
    check_f4, doob_constant, regularity_constant, DoobOptions, Filtration2, FiltrationConfig, IndexedFiltration,
};
use mhl_core::operators::{hardy_norms, martingale_differences, AdaptedField};
use mhl_core::optimization::{check_gradlemma, gradient_probe, random_instance, GradLemmaOptions, PointwiseNorm};
use mhl_core::prob::RandomVariable;
use mhl_core::report::fmt_f64;
use mhl_core::{random, Grid, LabError};
use serde_json::{json, Value};

use crate::config::{FieldSpec, Resolved};

/// Tolerance for the exact operator identities.
const IDENTITY_TOL: f64 = 1e-12;
const CROSS_TOL: f64 = 1e-10;
const PROJECTION_SLACK: f64 = 1e-9;
const GRADIENT_AGREEMENT: f64 = 1e-3;

pub struct Outcome {
    pub summary: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub pass: bool,
    /// Rows produced by runs that stopped early or whose solver did not converge.
    pub errors: Vec<String>,
    pub non_convergence: bool,
}

impl Outcome {
    fn new(header: Vec<&'static str>) -> Self {
        Outcome {
            summary: Value::Null,
            header,
            rows: Vec::new(),
            pass: true,
            errors: Vec::new(),
            non_convergence: false,
        }
    }

    fn record_error(&mut self, context: String, err: &LabError) {
        self.non_convergence |= matches!(err, LabError::NotConverged { .. });
        self.pass = false;
        self.errors.push(format!("{context}: {err}"));
    }
}

/// Failure before any trial ran: the configuration cannot be executed.
pub type Setup<T> = std::result::Result<T, String>;

fn setup<T>(r: mhl_core::Result<T>) -> Setup<T> {
    r.map_err(|e| e.to_string())
}

pub fn describe(filt: &FiltrationConfig) -> String {
    match filt {
        FiltrationConfig::Canonical { base_weights, n, m, .. } => {
            format!("canonical |base|={} N={n} M={m}", base_weights.len())
        }
        FiltrationConfig::Universal { .. } => {
            let (n, m) = filt.dims();
            format!("universal N={n} M={m}")
        }
    }
}

fn ok(b: bool) -> String {
    b.to_string()
}

/// Deterministic test function number `t`.
fn test_function(filt: &Filtration2, t: usize, phase: f64) -> RandomVariable {
    RandomVariable::from_atoms(filt.space().clone(), |a| ((a as f64 + 1.0) * (t as f64 + phase) * 1.7).sin())
}

pub fn identities(cfg: &Resolved) -> Setup<Outcome> {
    let filt = Arc::new(setup(cfg.filtration.build_2p())?);
    let mut out = Outcome::new(vec!["check", "trial", "value", "tol", "pass"]);
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();
    let mut push = |out: &mut Outcome, name: &'static str, trial: usize, value: f64, tol: f64| {
        let pass = value <= tol;
        out.rows.push(vec![name.into(), trial.to_string(), fmt_f64(value), fmt_f64(tol), ok(pass)]);
        match checks.iter_mut().find(|c| c.0 == name) {
            Some(c) => c.1 = c.1.max(value),
            None => checks.push((name, value, tol)),
        }
    };
    let base = setup(cfg.filtration.base())?;
    for t in 0..cfg.trials {
        let f = test_function(&filt, t, 0.3);
        let g = test_function(&filt, t, 0.9);
        let df = setup(martingale_differences(&f, filt.as_ref()))?;
        let dg = setup(martingale_differences(&g, filt.as_ref()))?;
        let mut sum = vec![0.0; f.len()];
        for (_, d) in df.iter() {
            sum.iter_mut().zip(d.values()).for_each(|(s, v)| *s += v);
        }
        let rec = sum.iter().zip(f.values()).map(|(s, v)| (s - v).abs()).fold(0.0, f64::max);
        push(&mut out, "reconstruction", t, rec, IDENTITY_TOL);
        let mut cross: f64 = 0.0;
        for (a, da) in df.iter() {
            for (b, db) in dg.iter() {
                if a != b {
                    cross = cross.max(setup(da.inner(db))?.abs());
                }
            }
        }
        push(&mut out, "orthogonality", t, cross, CROSS_TOL);
        let field = setup(AdaptedField::differences_of(filt.clone(), &f))?;
        let md = setup(field.is_martingale_difference(IDENTITY_TOL))?;
        push(&mut out, "martingale_difference", t, if md { 0.0 } else { 1.0 }, 0.0);
        if let Some(base) = &base {
            let d = setup(decouple_2p(&field, base))?;
            let diag = d.diagonal();
            let worst =
                diag.iter().zip(field.entries().iter()).map(|((_, a), (_, b))| a.max_abs_diff(b)).fold(0.0, f64::max);
            push(&mut out, "decoupling_diagonal", t, worst, 0.0);
        }
    }
    let f4 = setup(check_f4(&filt))?;
    let f4_violation = f4.probabilistic_violation.max(f4.operator_violation);
    push(&mut out, "f4", 0, f4_violation, CROSS_TOL);
    if let Some(base) = &base {
        let target = 1.0 / base.min_weight();
        let rel = ((regularity_constant(filt.as_ref()) - target) / target).abs();
        push(&mut out, "regularity", 0, rel, IDENTITY_TOL);
    }
    out.pass = checks.iter().all(|(_, v, tol)| v <= tol);
    out.summary = json!({
        "instance": describe(&cfg.filtration),
        "checks": checks
            .iter()
            .map(|(name, worst, tol)| json!({"check": name, "worst": worst, "tol": tol, "pass": worst <= tol}))
            .collect::<Vec<_>>(),
    });
    Ok(out)
}

pub fn constants(cfg: &Resolved, exec: Execution) -> Setup<Outcome> {
    let seed = cfg.seed()?;
    let filt = Arc::new(setup(cfg.filtration.build_2p())?);
    let instance = describe(&cfg.filtration);
    let mut out = Outcome::new(vec!["quantity", "value", "instance", "seed"]);
    let mut quantities: Vec<(String, f64, String)> = Vec::new();

    quantities.push(("regularity_constant".into(), regularity_constant(filt.as_ref()), instance.clone()));

    let ratios = map_indexed(cfg.trials, exec, |t| {
        let big_f = random::martingale(filt.as_ref(), &mut random::rng(trial_seed(seed, t)));
        hardy_norms(&big_f, filt.as_ref())
    });
    let mut envelope = |name: &str, f: &dyn Fn(&mhl_core::operators::HardyReport) -> Option<f64>, out: &mut Outcome| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (t, r) in ratios.iter().enumerate() {
            match r {
                Ok(h) => {
                    if let Some(v) = f(h) {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                Err(e) => out.record_error(format!("{name} trial {t}"), e),
            }
        }
        let inst = format!("{instance}, {} random martingales", cfg.trials);
        quantities.push((format!("{name}_min"), lo, inst.clone()));
        quantities.push((format!("{name}_max"), hi, inst));
    };
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    envelope("davis_h1S_over_h1star", &|h| ratio(h.h1_big_s, h.h1_star), &mut out);
    envelope("weisz_h1s_over_h1S", &|h| ratio(h.h1_small_s, h.h1_big_s), &mut out);
    envelope("weisz_h1s_over_h1star", &|h| ratio(h.h1_small_s, h.h1_star), &mut out);

    if let FiltrationConfig::Canonical { n, .. } = &cfg.filtration {
        if *n > 0 {
            let one = setup(cfg.filtration.build_1p())?;
            let ratios = map_indexed(cfg.trials, exec, |t| {
                let f = random::martingale(&one, &mut random::rng(trial_seed(seed, t)));
                hardy_norms(&f, &one)
            });
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (t, r) in ratios.iter().enumerate() {
                match r {
                    Ok(h) if h.h1_star > 0.0 => {
                        lo = lo.min(h.h1_big_s / h.h1_star);
                        hi = hi.max(h.h1_big_s / h.h1_star);
                    }
                    Ok(_) => {}
                    Err(e) => out.record_error(format!("one-parameter davis trial {t}"), e),
                }
            }
            let inst = format!("one-parameter N={n}, {} random martingales", cfg.trials);
            quantities.push(("davis_1p_h1S_over_h1star_min".into(), lo, inst.clone()));
            quantities.push(("davis_1p_h1S_over_h1star_max".into(), hi, inst));
        }
    }

    for &p in &cfg.p_values {
        let opts = DoobOptions { restarts: cfg.restarts, seed, tol: cfg.tol, exec, ..Default::default() };
        match doob_constant(filt.as_ref(), p, &opts) {
            Ok(est) => {
                let inst = format!("{instance}, p={p}, {} restarts", cfg.restarts);
                quantities.push((format!("doob_delta_empirical_p{p}"), est.empirical, inst.clone()));
                if let Some(c) = est.certified {
                    quantities.push((format!("doob_delta_certified_p{p}"), c, inst));
                    if est.empirical < c - PROJECTION_SLACK {
                        out.pass = false;
                        out.errors.push(format!("doob p={p}: empirical {} below certified {c}", est.empirical));
                    }
                }
            }
            Err(e) => out.record_error(format!("doob p={p}"), &e),
        }
    }

    if let (Some(base), FiltrationConfig::Canonical { n, m, .. }) = (setup(cfg.filtration.base())?, &cfg.filtration) {
        for (label, mm) in [("1p", None), ("2p", Some(*m))] {
            if *n == 0 {
                continue;
            }
            let fam = DecouplingFamily { base: base.clone(), n: *n, m: mm, kind: FamilyKind::RandomAdapted };
            match estimate_decoupling_constants(&fam, cfg.trials, seed, exec) {
                Ok(env) => {
                    let inst =
                        format!("{label} random adapted family N={n} M={}, {} trials", mm.unwrap_or(0), cfg.trials);
                    quantities.push((format!("decoupling_{label}_min"), env.min_ratio, inst.clone()));
                    quantities.push((format!("decoupling_{label}_max"), env.max_ratio, inst));
                }
                Err(e) => out.record_error(format!("decoupling {label}"), &e),
            }
        }
    }

    for (q, v, inst) in &quantities {
        if !v.is_finite() {
            out.pass = false;
            out.errors.push(format!("{q} is not finite"));
        }
        out.rows.push(vec![q.clone(), fmt_f64(*v), inst.clone(), seed.to_string()]);
    }
    out.summary = Value::Object(quantities.iter().map(|(q, v, _)| (q.clone(), json!(v))).collect());
    Ok(out)
}

fn explicit_field(filt: &Arc<Filtration2>, spec: &FieldSpec) -> Setup<AdaptedField> {
    match spec {
        FieldSpec::Zero { zero: true } => Ok(AdaptedField::zeros(filt.clone())),
        FieldSpec::Zero { zero: false } => {
            Err("field {\"zero\": false} is not a field; omit it for random fields".into())
        }
        FieldSpec::Values { values } => {
            let (rows, cols) = filt.shape();
            if values.len() != rows || values.iter().any(|r| r.len() != cols) {
                return Err(format!("field must be a {rows}x{cols} grid of atom-value lists"));
            }
            let entries = values
                .iter()
                .flatten()
                .map(|v| setup(RandomVariable::new(filt.space().clone(), v.clone())))
                .collect::<Setup<Vec<_>>>()?;
            setup(AdaptedField::new(filt.clone(), Grid::from_vec(rows, cols, entries)))
        }
    }
}

struct DecomposeRow {
    dec: DGDecomposition,
    inflation: [f64; 4],
}

pub fn decompose(cfg: &Resolved, exec: Execution) -> Setup<Outcome> {
    let filt = Arc::new(setup(cfg.filtration.build_2p())?);
    let (fields, seed) = match &cfg.field {
        Some(spec) => (vec![explicit_field(&filt, spec)?], cfg.seed.unwrap_or(0)),
        None => {
            let seed = cfg.seed()?;
            let fields = (0..cfg.trials)
                .map(|t| setup(random::difference_field(&filt, &mut random::rng(trial_seed(seed, t)))))
                .collect::<Setup<Vec<_>>>()?;
            (fields, seed)
        }
    };
    let base = setup(cfg.filtration.base())?;
    let results = map_indexed(fields.len(), exec, |t| -> mhl_core::Result<DecomposeRow> {
        let field = &fields[t];
        let s = trial_seed(seed, t);
        let dec = match &base {
            Some(base) => {
                let d = decouple_2p(field, base)?;
                let opts =
                    SearchOptions { mode: cfg.mask_mode, restarts: cfg.restarts, seed: s, exec: Execution::Sequential };
                davis_garsia_2p(field, &four_summand_partition(&d, &opts)?)?
            }
            None => davis_garsia_universal(field, cfg.restarts, s)?,
        };
        let proj = project_martingale_differences(&dec)?;
        let inflation = term_inflation(&dec.part_terms, &proj.part_terms);
        Ok(DecomposeRow { dec, inflation })
    });
    let mut out = Outcome::new(vec![
        "trial",
        "seed",
        "lhs",
        "t_A",
        "t_B",
        "t_C",
        "t_D",
        "ratio",
        "reconstruction_error",
        "lattice",
        "max_inflation",
        "pass",
    ]);
    let mut c_hat = f64::INFINITY;
    let mut worst_inflation: f64 = 0.0;
    let mut worst_rec: f64 = 0.0;
    for (t, r) in results.into_iter().enumerate() {
        let s = trial_seed(seed, t);
        match r {
            Ok(DecomposeRow { dec, inflation }) => {
                let rec = dec.reconstruction_error();
                let lattice = dec.lattice_holds();
                let infl = inflation.iter().copied().fold(0.0, f64::max);
                let pass = rec <= IDENTITY_TOL && lattice && infl <= 4.0 + PROJECTION_SLACK;
                let sum = dec.terms.sum();
                if sum > 0.0 {
                    c_hat = c_hat.min(dec.lhs / sum);
                }
                worst_inflation = worst_inflation.max(infl);
                worst_rec = worst_rec.max(rec);
                out.pass &= pass;
                let [a, b, c, d] = dec.terms.as_array();
                out.rows.push(vec![
                    t.to_string(),
                    s.to_string(),
                    fmt_f64(dec.lhs),
                    fmt_f64(a),
                    fmt_f64(b),
                    fmt_f64(c),
                    fmt_f64(d),
                    fmt_f64(dec.achieved_ratio),
                    fmt_f64(rec),
                    ok(lattice),
                    fmt_f64(infl),
                    ok(pass),
                ]);
            }
            Err(e) => out.record_error(format!("trial {t} (seed {s})"), &e),
        }
    }
    out.summary = json!({
        "instance": describe(&cfg.filtration),
        "fields": fields.len(),
        "c_hat": c_hat.is_finite().then_some(c_hat),
        "worst_inflation": worst_inflation,
        "worst_reconstruction_error": worst_rec,
    });
    Ok(out)
}

pub fn probe(cfg: &Resolved, exec: Execution) -> Setup<Outcome> {
    let seed = cfg.seed()?;
    let filt = setup(cfg.filtration.build_2p())?;
    let (n, m) = cfg.filtration.dims();
    let jobs: Vec<(f64, usize)> = cfg.p_values.iter().flat_map(|&p| (0..cfg.trials).map(move |t| (p, t))).collect();
    let results = map_indexed(jobs.len(), exec, |k| {
        let (p, t) = jobs[k];
        let big_f = random::martingale(&filt, &mut random::rng(trial_seed(seed, t)));
        gradient_probe(&big_f, &filt, p, cfg.tol)
    });
    let mut out = Outcome::new(vec![
        "seed",
        "p",
        "N",
        "M",
        "lhs",
        "h1_S",
        "h1_S_dual",
        "primal_ratio_h1S",
        "primal_ratio_dual",
        "dual_value",
        "status",
    ]);
    for ((p, t), r) in jobs.iter().zip(results) {
        let s = trial_seed(seed, *t);
        let mut row = vec![s.to_string(), fmt_f64(*p), n.to_string(), m.to_string()];
        match r {
            Ok(v) => {
                let vals = [v.lhs, v.h1_big_s, v.h1_big_s_dual, v.primal_ratio_h1s, v.primal_ratio_dual, v.dual_value];
                if vals.iter().any(|x| !x.is_finite()) {
                    out.pass = false;
                }
                row.extend(vals.iter().map(|x| fmt_f64(*x)));
                row.push("ok".into());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(if matches!(e, LabError::NotConverged { .. }) { "not_converged" } else { "error" }.into());
                out.record_error(format!("p={p} seed {s}"), &e);
            }
        }
        out.rows.push(row);
    }
    out.summary = json!({ "instance": describe(&cfg.filtration), "jobs": jobs.len() });
    Ok(out)
}

pub fn gradcheck(cfg: &Resolved, exec: Execution) -> Setup<Outcome> {
    let seed = cfg.seed()?;
    let norms = cfg
        .x_norms
        .iter()
        .map(|&r| {
            let x = PointwiseNorm::Lp(r);
            setup(x.check_differentiable(2)).map(|_| (r, x))
        })
        .collect::<Setup<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..norms.len()).flat_map(|k| (0..cfg.trials).map(move |t| (k, t))).collect();
    let results = map_indexed(jobs.len(), exec, |j| {
        let (k, t) = jobs[j];
        let s = trial_seed(seed, t);
        let inst = random_instance(s, cfg.max_dim, norms[k].1, cfg.q, cfg.c);
        check_gradlemma(&inst, &GradLemmaOptions { seed: s, tol: cfg.tol, ..Default::default() })
    });
    let mut out = Outcome::new(vec![
        "x_norm",
        "trial",
        "seed",
        "dim",
        "min_ratio_moment",
        "min_ratio_gradient",
        "equivalent",
        "agreement",
        "pass",
    ]);
    let mut worst_gap: f64 = 0.0;
    for ((k, t), r) in jobs.iter().zip(results) {
        let s = trial_seed(seed, *t);
        match r {
            Ok(rep) => {
                let gap = (rep.min_ratio_moment - rep.min_ratio_gradient).abs();
                worst_gap = worst_gap.max(gap);
                let pass = gap <= GRADIENT_AGREEMENT && rep.equivalent;
                out.pass &= pass;
                out.rows.push(vec![
                    fmt_f64(norms[*k].0),
                    t.to_string(),
                    s.to_string(),
                    rep.dim.to_string(),
                    fmt_f64(rep.min_ratio_moment),
                    fmt_f64(rep.min_ratio_gradient),
                    ok(rep.equivalent),
                    fmt_f64(gap),
                    ok(pass),
                ]);
            }
            Err(e) => out.record_error(format!("l{} trial {t} (seed {s})", norms[*k].0), &e),
        }
    }
    out.summary = json!({ "instances": jobs.len(), "worst_agreement_gap": worst_gap, "q": cfg.q, "c": cfg.c });
    Ok(out)
}
