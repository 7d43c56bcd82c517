//! Seeded random variables, martingales and adapted fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::filtration::{Filtration2, IndexedFiltration};
use crate::operators::AdaptedField;
use crate::prob::{ProductSpace, RandomVariable};
use crate::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(space: &Arc<ProductSpace>, rng: &mut impl Rng) -> RandomVariable {
    RandomVariable::from_atoms(space.clone(), |_| rng.sample(StandardNormal))
}

/// Terminal value of a random martingale: `E_{N,M}` of a Gaussian variable.
pub fn martingale(filt: &impl IndexedFiltration, rng: &mut impl Rng) -> RandomVariable {
    let g = gaussian(filt.space(), rng);
    let (r, c) = filt.shape();
    filt.sigma(r - 1, c - 1).cond_expect(&g).expect("same space")
}

/// `f_{i,j} = E_{i,j} g_{i,j}` with independent Gaussian `g_{i,j}`.
pub fn adapted_field(filt: &Arc<Filtration2>, rng: &mut impl Rng) -> Result<AdaptedField> {
    let space = filt.space().clone();
    AdaptedField::from_fn(filt.clone(), |i, j| {
        filt.sigma(i, j).cond_expect(&gaussian(&space, rng)).expect("same space")
    })
}

/// `f_{i,j} = Δ_{i,j} g_{i,j}` with independent Gaussian `g_{i,j}`.
pub fn difference_field(filt: &Arc<Filtration2>, rng: &mut impl Rng) -> Result<AdaptedField> {
    let space = filt.space().clone();
    let mut err = None;
    let field = AdaptedField::from_fn(filt.clone(), |i, j| {
        match crate::operators::delta(&gaussian(&space, rng), filt.as_ref(), i, j) {
            Ok(d) => d,
            Err(e) => {
                err = Some(e);
                RandomVariable::zeros(space.clone())
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => field,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::canonical_2p;
    use crate::prob::FiniteProbSpace;

    #[test]
    fn seeded_draws_are_reproducible_and_adapted() {
        let filt = Arc::new(canonical_2p(&FiniteProbSpace::coin(), 1, 1).unwrap());
        let a = adapted_field(&filt, &mut rng(3)).unwrap();
        let b = adapted_field(&filt, &mut rng(3)).unwrap();
        assert_eq!(a.entry(1, 1).values(), b.entry(1, 1).values());
        assert!(difference_field(&filt, &mut rng(4)).unwrap().is_martingale_difference(1e-12).unwrap());
        let f = martingale(filt.as_ref(), &mut rng(5));
        assert_eq!(f.len(), 16);
    }
}
