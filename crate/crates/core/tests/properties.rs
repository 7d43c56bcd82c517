use std::sync::Arc;

use mhl_core::decomposition::{davis_garsia_2p, four_summand_partition, SearchOptions};
use mhl_core::decoupling::decouple_2p;
use mhl_core::exec::Execution;
use mhl_core::filtration::{
    canonical_1p, canonical_2p, certified_doob_lower_bound, doob_constant, regularity_constant, universal_2p,
    DoobOptions, IndexedFiltration, UniversalFiltrationSpec,
};
use mhl_core::operators::{delta, AdaptedField};
use mhl_core::optimization::{gradient_probe, hardy_s_dual_norm};
use mhl_core::prob::{check_cond_independence, FiniteProbSpace, Partition, ProductSpace, RandomVariable};
use mhl_core::random;
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn base_space() -> impl Strategy<Value = FiniteProbSpace> {
    (2usize..=3).prop_flat_map(weights).prop_map(|w| FiniteProbSpace::from_weights(w).unwrap())
}

fn flat_space(n: usize, w: Vec<f64>) -> Arc<ProductSpace> {
    assert_eq!(w.len(), n);
    Arc::new(ProductSpace::single(FiniteProbSpace::from_weights(w).unwrap()))
}

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditional_expectation_tower_mean_and_positivity(
        w in weights(8),
        fine in labels(8, 6),
        f in proptest::collection::vec(-5.0f64..5.0, 8),
    ) {
        let space = flat_space(8, w);
        let coarse: Vec<usize> = fine.iter().map(|l| l % 2).collect();
        let s2 = Partition::from_labels(space.clone(), &fine).unwrap();
        let s1 = Partition::from_labels(space.clone(), &coarse).unwrap();
        let f = RandomVariable::new(space.clone(), f).unwrap();
        let tower = s1.cond_expect(&s2.cond_expect(&f).unwrap()).unwrap();
        prop_assert!(tower.max_abs_diff(&s1.cond_expect(&f).unwrap()) <= 1e-12);
        prop_assert!((s2.cond_expect(&f).unwrap().expectation() - f.expectation()).abs() <= 1e-12);
        let pos = s2.cond_expect(&f.abs()).unwrap();
        prop_assert!(pos.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn conditional_independence_is_symmetric(
        w in weights(8),
        a in labels(8, 3),
        b in labels(8, 3),
        c in labels(8, 2),
    ) {
        let space = flat_space(8, w);
        let p = |l: &[usize]| Partition::from_labels(space.clone(), l).unwrap();
        let (a, b, c) = (p(&a), p(&b), p(&c));
        let ab = check_cond_independence(&a, &b, &c).unwrap();
        let ba = check_cond_independence(&b, &a, &c).unwrap();
        prop_assert_eq!(ab.holds, ba.holds);
        prop_assert!((ab.max_violation - ba.max_violation).abs() <= 1e-15);
    }

    #[test]
    fn canonical_grids_are_monotone_and_match_universal(base in base_space(), n in 0usize..=2, m in 0usize..=2) {
        let filt = canonical_2p(&base, n, m).unwrap();
        let (rows, cols) = filt.shape();
        for i in 0..rows {
            for j in 0..cols {
                if i + 1 < rows {
                    prop_assert!(filt.sigma(i + 1, j).refines(filt.sigma(i, j)));
                }
                if j + 1 < cols {
                    prop_assert!(filt.sigma(i, j + 1).refines(filt.sigma(i, j)));
                }
            }
        }
        let uni = universal_2p(&UniversalFiltrationSpec::canonical_embedding(&base, n, m).unwrap(), n, m).unwrap();
        prop_assert_eq!(uni.shape(), filt.shape());
        for i in 0..rows {
            for j in 0..cols {
                let sorted = |p: &Partition| {
                    let mut w = p.block_weights();
                    w.sort_by(f64::total_cmp);
                    w
                };
                let (a, b) = (sorted(uni.sigma(i, j)), sorted(filt.sigma(i, j)));
                prop_assert_eq!(a.len(), b.len());
                prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-14));
            }
        }
        if n + m > 0 {
            let target = 1.0 / base.min_weight();
            prop_assert!(((regularity_constant(&filt) - target) / target).abs() <= 1e-12);
        }
    }

    #[test]
    fn doob_empirical_never_below_certified(base in base_space(), n in 1usize..=2, m in 0usize..=1, seed in 0u64..1000) {
        let filt = canonical_2p(&base, n, m).unwrap();
        for p in [2.0, 4.0] {
            let opts = DoobOptions { restarts: 4, seed, exec: Execution::Sequential, ..Default::default() };
            let est = doob_constant(&filt, p, &opts).unwrap();
            let cert = certified_doob_lower_bound(&filt, p).unwrap();
            prop_assert!(est.empirical >= cert - 1e-9, "p {p}: {} < {cert}", est.empirical);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decoupling_ratio_is_scale_invariant(seed in 0u64..10_000, c in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0]) {
        let filt = Arc::new(canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap());
        let field = random::adapted_field(&filt, &mut random::rng(seed)).unwrap();
        let scaled = field.try_map(|_, v| v.map(|x| c * x)).unwrap();
        let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let ds = decouple_2p(&scaled, &FiniteProbSpace::coin()).unwrap();
        let r = d.decoupled_norm() / d.original_norm();
        let rs = ds.decoupled_norm() / ds.original_norm();
        prop_assert!((r - rs).abs() <= 1e-12 * r.abs().max(1.0));
    }

    #[test]
    fn decomposition_masks_and_lattice(seed in 0u64..10_000) {
        let filt = Arc::new(canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap());
        let field = random::difference_field(&filt, &mut random::rng(seed)).unwrap();
        let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let mask = four_summand_partition(&d, &SearchOptions::greedy(seed)).unwrap();
        let grids = mask.indicator_grids(&d).unwrap();
        let space = d.decoupled_space().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..space.len() {
                    prop_assert_eq!(grids.iter().map(|g| g[(i, j)].value(a)).sum::<f64>(), 1.0);
                }
            }
        }
        let dec = davis_garsia_2p(&field, &mask).unwrap();
        prop_assert!(dec.lattice_holds());
        prop_assert_eq!(dec.reconstruction_error(), 0.0);
    }

    #[test]
    fn zero_field_decomposes_to_zero(seed in 0u64..100) {
        let filt = Arc::new(canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap());
        let field = AdaptedField::zeros(filt);
        let d = decouple_2p(&field, &FiniteProbSpace::coin()).unwrap();
        let dec = davis_garsia_2p(&field, &four_summand_partition(&d, &SearchOptions::greedy(seed)).unwrap()).unwrap();
        prop_assert_eq!(dec.terms.sum(), 0.0);
    }

    #[test]
    fn dual_norm_brackets_are_ordered(seed in 0u64..10_000) {
        let filt = canonical_1p(&FiniteProbSpace::coin(), 1).unwrap();
        let g = random::gaussian(filt.space(), &mut random::rng(seed));
        let g = if seed % 2 == 0 { g } else { delta(&g, &filt, 1, 0).unwrap() };
        let tol = 1e-6;
        let r = hardy_s_dual_norm(&g, &filt, tol).unwrap();
        prop_assert!(r.lower <= r.value && r.value <= r.upper);
        prop_assert!(r.upper - r.lower <= tol);
    }

    #[test]
    fn gradient_probe_is_zero_homogeneous(seed in 0u64..10_000, c in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0]) {
        let filt = canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap();
        let big_f = random::martingale(&filt, &mut random::rng(seed));
        let a = gradient_probe(&big_f, &filt, 2.0, 1e-8).unwrap();
        let b = gradient_probe(&big_f.map(|x| c * x), &filt, 2.0, 1e-8).unwrap();
        for (x, y) in [
            (a.primal_ratio_h1s, b.primal_ratio_h1s),
            (a.primal_ratio_dual, b.primal_ratio_dual),
            (a.dual_value, b.dual_value),
        ] {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}
