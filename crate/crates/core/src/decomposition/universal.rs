//! Experimental: the threshold construction on arbitrary (F4) grids.
//!
//! Without a product structure there are no fresh coordinates to decouple,
//! so labels are chosen per `(i, j)` and per block of `F_{i,j}` by greedy
//! descent on the four-term functional of the masked field, and the weights
//! are `W_k = E_{i-1,j-1} 1{label = k}`.

use rand::Rng;

use super::{evaluate_rhs, threshold_parts, DGDecomposition, MaskMode};
use crate::exec::trial_seed;
use crate::filtration::IndexedFiltration;
use crate::grid::Grid;
use crate::operators::AdaptedField;
use crate::prob::RandomVariable;
use crate::random;
use crate::Result;

fn masked_parts(field: &AdaptedField, labels: &Grid<Vec<u8>>) -> [AdaptedField; 4] {
    let filt = field.filtration();
    let space = filt.space().clone();
    [0u8, 1, 2, 3].map(|k| {
        let entries = field.entries().map(|(i, j), f| {
            let sigma = filt.sigma(i, j);
            RandomVariable::from_atoms(space.clone(), |a| {
                if labels[(i, j)][sigma.block_of(a)] == k {
                    f.value(a)
                } else {
                    0.0
                }
            })
        });
        AdaptedField::new(filt.clone(), entries).expect("masking by blocks keeps adaptedness")
    })
}

fn objective(field: &AdaptedField, labels: &Grid<Vec<u8>>) -> f64 {
    evaluate_rhs(&masked_parts(field, labels)).map(|t| t.sum()).unwrap_or(f64::INFINITY)
}

/// Greedy labels (restart 0 from all-`a`), then the `1/4` threshold.
pub fn davis_garsia_universal(field: &AdaptedField, restarts: usize, seed: u64) -> Result<DGDecomposition> {
    let filt = field.filtration().clone();
    let (r, c) = field.shape();
    let blocks = Grid::from_fn(r, c, |i, j| filt.sigma(i, j).n_blocks());
    let mut best: Option<(Grid<Vec<u8>>, f64)> = None;
    for rs in 0..restarts.max(1) {
        let mut rng = random::rng(trial_seed(seed, rs));
        let mut labels = blocks
            .map(|_, &nb| (0..nb).map(|_| if rs == 0 { 0 } else { rng.random_range(0..4u8) }).collect::<Vec<u8>>());
        let mut value = objective(field, &labels);
        loop {
            let mut moved = false;
            for i in 0..r {
                for j in 0..c {
                    for b in 0..blocks[(i, j)] {
                        let cur = labels[(i, j)][b];
                        for l in 0..4u8 {
                            if l == cur {
                                continue;
                            }
                            labels[(i, j)][b] = l;
                            let v = objective(field, &labels);
                            if v < value - 1e-13 * value.abs() {
                                value = v;
                                moved = true;
                                break;
                            }
                            labels[(i, j)][b] = cur;
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, bv)| value < *bv - 1e-13 * bv.abs()) {
            best = Some((labels, value));
        }
    }
    let (labels, _) = best.expect("at least one restart");
    let weights = |i: usize, j: usize| -> [Vec<f64>; 4] {
        let sigma = filt.sigma(i, j);
        let prev = filt.sigma_clamped(i as isize - 1, j as isize - 1);
        [0u8, 1, 2, 3].map(|k| {
            let ind: Vec<f64> =
                (0..filt.space().len()).map(|a| (labels[(i, j)][sigma.block_of(a)] == k) as u8 as f64).collect();
            prev.average(&ind)
        })
    };
    let (thresholded, parts) = threshold_parts(field, weights)?;
    DGDecomposition::assemble(field.clone(), thresholded, parts, MaskMode::Greedy)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::filtration::{universal_2p, UniversalFiltrationSpec};
    use crate::prob::FiniteProbSpace;

    #[test]
    fn universal_grid_construction_is_a_valid_decomposition() {
        let spec = UniversalFiltrationSpec::uniform_grid(&FiniteProbSpace::coin(), 2, 2);
        let filt = Arc::new(universal_2p(&spec, 1, 1).unwrap());
        let field = random::difference_field(&filt, &mut random::rng(2)).unwrap();
        let dec = davis_garsia_universal(&field, 3, 0).unwrap();
        assert!(dec.lattice_holds());
        assert!(dec.reconstruction_error() < 1e-15);
        assert!(dec.achieved_ratio > 0.0 && dec.achieved_ratio.is_finite());
    }
}
