//! Exact rational conditional expectation on uniform spaces.
//!
//! On a uniform space every atom has the same weight, so block averages are
//! plain arithmetic means and stay in the rationals.

use num_rational::Ratio;

use super::Partition;
use crate::{LabError, Result};

pub type ExactValue = Ratio<i64>;

pub fn cond_expect_exact(values: &[ExactValue], sigma: &Partition) -> Result<Vec<ExactValue>> {
    let space = sigma.space();
    if values.len() != space.len() {
        return Err(LabError::ShapeMismatch(format!("{} values for {} atoms", values.len(), space.len())));
    }
    if !space.factors().iter().all(|f| f.is_uniform()) {
        return Err(LabError::InvalidParameter("exact mode needs a uniform space".into()));
    }
    let mut sums = vec![ExactValue::from_integer(0); sigma.n_blocks()];
    let mut counts = vec![0i64; sigma.n_blocks()];
    for (atom, v) in values.iter().enumerate() {
        let b = sigma.block_of(atom);
        sums[b] += v;
        counts[b] += 1;
    }
    let means: Vec<ExactValue> = sums.into_iter().zip(counts).map(|(s, c)| s / ExactValue::from_integer(c)).collect();
    Ok((0..values.len()).map(|a| means[sigma.block_of(a)]).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::prob::{FiniteProbSpace, ProductSpace, RandomVariable};

    #[test]
    fn agrees_with_floating_point_on_dyadic_data() {
        let s = Arc::new(ProductSpace::power(&FiniteProbSpace::coin(), &[3]).unwrap());
        let ints: Vec<i64> = vec![3, -1, 4, 1, -5, 9, 2, -6];
        let exact: Vec<ExactValue> = ints.iter().map(|&v| ExactValue::from_integer(v)).collect();
        let f = RandomVariable::new(s.clone(), ints.iter().map(|&v| v as f64).collect()).unwrap();
        for coords in [vec![], vec![0], vec![0, 1], vec![2]] {
            let sigma = Partition::generated_by_coords(s.clone(), &coords);
            let e = cond_expect_exact(&exact, &sigma).unwrap();
            let fl = sigma.cond_expect(&f).unwrap();
            for (x, y) in e.iter().zip(fl.values()) {
                assert_eq!(*x.numer() as f64 / *x.denom() as f64, *y);
            }
        }
    }

    #[test]
    fn rejects_non_uniform_spaces() {
        let b = FiniteProbSpace::from_weights(vec![0.75, 0.25]).unwrap();
        let s = Arc::new(ProductSpace::single(b));
        let v = vec![ExactValue::from_integer(1); 2];
        assert!(cond_expect_exact(&v, &Partition::trivial(s)).is_err());
    }
}
