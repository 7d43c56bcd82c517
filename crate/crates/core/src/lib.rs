//! Finite-space laboratory for one- and two-parameter martingale Hardy spaces.
//!
//! Everything lives on finite probability spaces: sigma-algebras are
//! partitions, conditional expectations are weighted block averages, and
//! every norm or inequality can be evaluated exactly (or bracketed by a
//! certified convex solver where an infimum or supremum is involved).
//!
//! Module map:
//!
//! - [`prob`]: spaces, random variables, partitions, conditional expectation.
//! - [`filtration`]: canonical and universal filtrations, (F4), regularity, Doob constants.
//! - [`operators`]: martingale differences, square and maximal functions, Hardy norms, sum norms.
//! - [`decoupling`]: one- and two-parameter decoupled fields and their L1(l2) envelopes.
//! - [`decomposition`]: four-summand masks and the two-parameter Davis–Garsia construction.
//! - [`optimization`]: the weighted convex program, dual norms, the gradient equivalence, the gradient probe.
//! - [`convex`]: group-norm programs solved by primal–dual splitting with duality-gap certificates.
//! - [`exec`]: parallel/sequential trial execution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod decomposition;
pub mod decoupling;
pub mod error;
pub mod exec;
pub mod filtration;
pub mod grid;
pub mod operators;
pub mod optimization;
pub mod prob;
pub mod random;
pub mod report;

pub use error::{LabError, Result};
pub use grid::Grid;
