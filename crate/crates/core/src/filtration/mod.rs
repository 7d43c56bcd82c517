//! One- and two-parameter filtrations on finite product spaces.

mod config;
mod doob;

pub use config::{FactorSpec, FiltrationConfig};
pub use doob::{certified_doob_lower_bound, doob_constant, maximal_ratio, DoobEstimate, DoobOptions};

use std::sync::Arc;

use crate::grid::Grid;
use crate::prob::{check_cond_independence, FiniteProbSpace, Partition, ProductSpace};
use crate::{LabError, Result};

/// (F4) counts as satisfied when both violations are at most this.
pub const F4_TOL: f64 = 1e-10;
/// The two (F4) checks must not disagree beyond this.
pub const F4_CONSISTENCY_TOL: f64 = 1e-9;

/// Common view of one- and two-parameter filtrations as an index grid.
///
/// A one-parameter filtration `F_0, ..., F_N` is the `(N + 1) x 1` grid
/// `F_{i,0} = F_i`; with this embedding the two-parameter difference and
/// square-function formulas reduce to the one-parameter ones.
pub trait IndexedFiltration: Sync {
    fn space(&self) -> &Arc<ProductSpace>;

    /// `(rows, cols)` = `(N + 1, M + 1)`.
    fn shape(&self) -> (usize, usize);

    fn sigma(&self, i: usize, j: usize) -> &Partition;

    /// `E_{i,j} = E_{i ∨ 0, j ∨ 0}`.
    fn sigma_clamped(&self, i: isize, j: isize) -> &Partition {
        self.sigma(i.max(0) as usize, j.max(0) as usize)
    }

    /// All members of the family in row-major order.
    fn family(&self) -> Vec<&Partition> {
        let (r, c) = self.shape();
        (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| self.sigma(i, j)).collect()
    }

    /// Number of independent filtration directions (1 or 2).
    fn directions(&self) -> usize;

    /// True when (F4) is known to hold (product type or a verified check).
    fn known_f4(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtration1 {
    space: Arc<ProductSpace>,
    partitions: Vec<Partition>,
}

impl Filtration1 {
    pub fn new(space: Arc<ProductSpace>, partitions: Vec<Partition>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(LabError::InvalidFiltration("no sigma-algebras".into()));
        }
        for (i, p) in partitions.iter().enumerate() {
            if !crate::prob::same_space(p.space(), &space) {
                return Err(LabError::SpaceMismatch);
            }
            if i > 0 && !p.refines(&partitions[i - 1]) {
                return Err(LabError::InvalidFiltration(format!("F_{} does not refine F_{}", i, i - 1)));
            }
        }
        Ok(Filtration1 { space, partitions })
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    /// Largest index `N`.
    pub fn last_index(&self) -> usize {
        self.partitions.len() - 1
    }
}

impl IndexedFiltration for Filtration1 {
    fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    fn shape(&self) -> (usize, usize) {
        (self.partitions.len(), 1)
    }

    fn sigma(&self, i: usize, j: usize) -> &Partition {
        assert_eq!(j, 0, "one-parameter filtration has a single column");
        &self.partitions[i]
    }

    fn directions(&self) -> usize {
        1
    }

    fn known_f4(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F4Report {
    pub holds: bool,
    /// Worst `|P(A ∩ B | C) - P(A | C) P(B | C)|` over all grid points.
    pub probabilistic_violation: f64,
    /// Worst `|E_{i,M} E_{N,j} g - E_{i,j} g|` over indicator test functions.
    pub operator_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtration2 {
    space: Arc<ProductSpace>,
    grid: Grid<Partition>,
    product_type: bool,
    f4: Option<F4Report>,
}

impl Filtration2 {
    /// Validates shape, common space and monotonicity in both indices.
    pub fn from_grid(space: Arc<ProductSpace>, grid: Grid<Partition>) -> Result<Self> {
        if grid.rows() == 0 || grid.cols() == 0 {
            return Err(LabError::InvalidFiltration("empty grid".into()));
        }
        for ((i, j), p) in grid.iter() {
            if !crate::prob::same_space(p.space(), &space) {
                return Err(LabError::SpaceMismatch);
            }
            if i > 0 && !p.refines(&grid[(i - 1, j)]) {
                return Err(LabError::InvalidFiltration(format!("F_{{{i},{j}}} does not refine F_{{{},{j}}}", i - 1)));
            }
            if j > 0 && !p.refines(&grid[(i, j - 1)]) {
                return Err(LabError::InvalidFiltration(format!("F_{{{i},{j}}} does not refine F_{{{i},{}}}", j - 1)));
            }
        }
        Ok(Filtration2 { space, grid, product_type: false, f4: None })
    }

    pub fn grid(&self) -> &Grid<Partition> {
        &self.grid
    }

    /// `(N, M)`: the largest row and column index.
    pub fn last_index(&self) -> (usize, usize) {
        (self.grid.rows() - 1, self.grid.cols() - 1)
    }

    pub fn is_product_type(&self) -> bool {
        self.product_type
    }

    /// Cached (F4) result from construction, if one was computed.
    pub fn cached_f4(&self) -> Option<F4Report> {
        self.f4
    }

    /// Runs [`check_f4`] and caches the result.
    pub fn with_f4_checked(mut self) -> Result<Self> {
        self.f4 = Some(check_f4(&self)?);
        Ok(self)
    }

    /// Diagnostic: `F_{i-1,j} ∨ F_{i,j-1} = F_{i,j}` for all `i, j ≥ 1`.
    ///
    /// This characterizes the canonical product model; it is independent of
    /// (F4) and not used by any inequality check.
    pub fn satisfies_join_property(&self) -> bool {
        let (n, m) = self.last_index();
        (1..=n).all(|i| {
            (1..=m).all(|j| {
                self.grid[(i - 1, j)].join(&self.grid[(i, j - 1)]).map(|p| p == self.grid[(i, j)]).unwrap_or(false)
            })
        })
    }
}

impl IndexedFiltration for Filtration2 {
    fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }

    fn sigma(&self, i: usize, j: usize) -> &Partition {
        &self.grid[(i, j)]
    }

    fn directions(&self) -> usize {
        if self.grid.rows() == 1 || self.grid.cols() == 1 {
            1
        } else {
            2
        }
    }

    fn known_f4(&self) -> bool {
        self.product_type || self.f4.is_some_and(|r| r.holds)
    }
}

/// `F_i = σ(x_0, ..., x_i)` on `Ω^(N+1)`.
pub fn canonical_1p(base: &FiniteProbSpace, n: usize) -> Result<Filtration1> {
    let space = Arc::new(ProductSpace::power(base, &[n + 1])?);
    let partitions =
        (0..=n).map(|i| Partition::generated_by_coords(space.clone(), &(0..=i).collect::<Vec<_>>())).collect();
    Filtration1::new(space, partitions)
}

/// `F_{i,j} = σ(x_0..x_i, y_0..y_j)` on `Ω^(N+1) × Ω^(M+1)`.
///
/// Coordinates are ordered `x_0, ..., x_N, y_0, ..., y_M`.
pub fn canonical_2p(base: &FiniteProbSpace, n: usize, m: usize) -> Result<Filtration2> {
    let space = Arc::new(ProductSpace::power(base, &[n + 1, m + 1])?);
    let grid = Grid::from_fn(n + 1, m + 1, |i, j| {
        let coords: Vec<usize> = (0..=i).chain((0..=j).map(|l| n + 1 + l)).collect();
        Partition::generated_by_coords(space.clone(), &coords)
    });
    let mut filt = Filtration2::from_grid(space, grid)?;
    filt.product_type = true;
    filt.with_f4_checked()
}

/// Factor spaces `Ω_{k,l}` of the universal tensor model.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalFiltrationSpec {
    pub factors: Grid<FiniteProbSpace>,
}

impl UniversalFiltrationSpec {
    /// Every factor equal to `base`.
    pub fn uniform_grid(base: &FiniteProbSpace, rows: usize, cols: usize) -> Self {
        UniversalFiltrationSpec { factors: Grid::from_fn(rows, cols, |_, _| base.clone()) }
    }

    /// Factors that reproduce the canonical product model: `Ω_{0,0} = Ω × Ω`,
    /// `Ω_{k,0} = Ω_{0,l} = Ω`, and one-atom factors elsewhere.
    pub fn canonical_embedding(base: &FiniteProbSpace, n: usize, m: usize) -> Result<Self> {
        let point = FiniteProbSpace::from_weights(vec![1.0])?;
        let pair = {
            let w: Vec<f64> = base.weights().iter().flat_map(|a| base.weights().iter().map(move |b| a * b)).collect();
            FiniteProbSpace::from_weights(w)?
        };
        Ok(UniversalFiltrationSpec {
            factors: Grid::from_fn(n + 1, m + 1, |k, l| match (k, l) {
                (0, 0) => pair.clone(),
                (0, _) | (_, 0) => base.clone(),
                _ => point.clone(),
            }),
        })
    }
}

/// `F_{i,j} = σ(x_{k,l} : k ≤ i, l ≤ j)` on `⊗ Ω_{k,l}`, coordinates row-major in `(k, l)`.
pub fn universal_2p(spec: &UniversalFiltrationSpec, n: usize, m: usize) -> Result<Filtration2> {
    let (rows, cols) = spec.factors.shape();
    if (rows, cols) != (n + 1, m + 1) {
        return Err(LabError::ShapeMismatch(format!("factor grid is {rows}x{cols}, expected {}x{}", n + 1, m + 1)));
    }
    let space = Arc::new(ProductSpace::new(spec.factors.values().to_vec())?);
    let grid = Grid::from_fn(rows, cols, |i, j| {
        let coords: Vec<usize> = (0..=i).flat_map(|k| (0..=j).map(move |l| k * cols + l)).collect();
        Partition::generated_by_coords(space.clone(), &coords)
    });
    Filtration2::from_grid(space, grid)?.with_f4_checked()
}

/// Checks (F4) two ways: conditional independence of `F_{i,M}` and `F_{N,j}`
/// given `F_{i,j}`, and the commutation `E_{i,M} E_{N,j} = E_{i,j}`.
///
/// The commutation is tested on indicators of `F_{N,j}` blocks, which
/// suffices because `E_{i,j} = E_{i,j} E_{N,j}`.
pub fn check_f4(filt: &Filtration2) -> Result<F4Report> {
    let (n, m) = filt.last_index();
    let mut prob_worst: f64 = 0.0;
    let mut op_worst: f64 = 0.0;
    let atoms = filt.space.len();
    for i in 0..=n {
        for j in 0..=m {
            let row_margin = filt.sigma(i, m);
            let col_margin = filt.sigma(n, j);
            let base = filt.sigma(i, j);
            let r = check_cond_independence(row_margin, col_margin, base)?;
            prob_worst = prob_worst.max(r.max_violation);

            let ids = col_margin.block_ids();
            for b in 0..col_margin.n_blocks() {
                let indicator: Vec<f64> = (0..atoms).map(|a| (ids[a] == b) as u8 as f64).collect();
                let lhs = row_margin.average(&indicator);
                let rhs = base.average(&indicator);
                let d = lhs.iter().zip(&rhs).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
                op_worst = op_worst.max(d);
            }
        }
    }
    let prob_ok = prob_worst <= F4_TOL;
    let op_ok = op_worst <= F4_TOL;
    if prob_ok != op_ok && prob_worst.max(op_worst) > F4_CONSISTENCY_TOL {
        return Err(LabError::InconsistentF4 { probabilistic: prob_worst, operator: op_worst });
    }
    Ok(F4Report { holds: prob_ok && op_ok, probabilistic_violation: prob_worst, operator_violation: op_worst })
}

/// Smallest `c` with `E_next f ≤ c E_cur f` for all positive `f`, over every
/// one-step refinement of the grid: the largest `μ(C) / μ(B)` for blocks
/// `B ⊂ C` with `B` in the finer and `C` in the coarser sigma-algebra.
pub fn regularity_constant(filt: &impl IndexedFiltration) -> f64 {
    let (rows, cols) = filt.shape();
    let mut worst: f64 = 1.0;
    let mut step = |cur: &Partition, next: &Partition| {
        let (wc, wn) = (cur.block_weights(), next.block_weights());
        for atom in 0..cur.space().len() {
            worst = worst.max(wc[cur.block_of(atom)] / wn[next.block_of(atom)]);
        }
    };
    for i in 0..rows {
        for j in 0..cols {
            if i + 1 < rows {
                step(filt.sigma(i, j), filt.sigma(i + 1, j));
            }
            if j + 1 < cols {
                step(filt.sigma(i, j), filt.sigma(i, j + 1));
            }
        }
    }
    worst
}
