//! Finite probability spaces, random variables and sigma-algebras as partitions.

mod exact;
mod partition;
mod space;
mod variable;

pub use exact::{cond_expect_exact, ExactValue};
pub use partition::{check_cond_independence, IndependenceReport, LatticeOp, Partition};
pub use space::{FiniteProbSpace, ProductSpace, WEIGHT_SUM_TOL};
pub use variable::RandomVariable;

use std::sync::Arc;

/// Two spaces are the same when they are the same allocation or structurally equal.
pub fn same_space(a: &Arc<ProductSpace>, b: &Arc<ProductSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Conditional expectation of `f` given the sigma-algebra generated by `sigma`.
pub fn cond_expect(f: &RandomVariable, sigma: &Partition) -> crate::Result<RandomVariable> {
    sigma.cond_expect(f)
}

/// Join (coarsest common refinement) or meet (finest common coarsening).
pub fn partition_lattice(a: &Partition, b: &Partition, op: LatticeOp) -> crate::Result<Partition> {
    match op {
        LatticeOp::Join => a.join(b),
        LatticeOp::Meet => a.meet(b),
    }
}
