use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use super::{same_space, ProductSpace, RandomVariable};
use crate::{LabError, Result};

/// Tolerance under which conditional independence is considered exact.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeOp {
    Join,
    Meet,
}

/// A sigma-algebra on a finite space, stored as its atom partition.
///
/// Block ids are canonical: they are numbered in order of the first atom of
/// each block, so two partitions are equal exactly when their `block_of`
/// maps are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    space: Arc<ProductSpace>,
    block_of: Vec<usize>,
    n_blocks: usize,
}

impl Partition {
    /// Atoms with equal keys share a block.
    pub fn from_keys<K: Hash + Eq>(space: Arc<ProductSpace>, key: impl Fn(usize) -> K) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let block_of = (0..space.len())
            .map(|atom| {
                let next = ids.len();
                *ids.entry(key(atom)).or_insert(next)
            })
            .collect();
        let n_blocks = ids.len();
        Partition { space, block_of, n_blocks }
    }

    /// Accepts arbitrary labels per atom and canonicalizes them.
    pub fn from_labels(space: Arc<ProductSpace>, labels: &[usize]) -> Result<Self> {
        if labels.len() != space.len() {
            return Err(LabError::InvalidPartition(format!("{} labels for {} atoms", labels.len(), space.len())));
        }
        Ok(Self::from_keys(space, |a| labels[a]))
    }

    pub fn finest(space: Arc<ProductSpace>) -> Self {
        let n = space.len();
        Partition { space, block_of: (0..n).collect(), n_blocks: n }
    }

    pub fn trivial(space: Arc<ProductSpace>) -> Self {
        let n = space.len();
        Partition { space, block_of: vec![0; n], n_blocks: 1 }
    }

    /// The sigma-algebra generated by the listed coordinate projections.
    pub fn generated_by_coords(space: Arc<ProductSpace>, coords: &[usize]) -> Self {
        let sp = space.clone();
        Self::from_keys(space, move |atom| coords.iter().map(|&c| sp.coord(atom, c)).collect::<Vec<_>>())
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_of(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn block_ids(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_blocks];
        for (atom, &b) in self.block_of.iter().enumerate() {
            w[b] += self.space.weight(atom);
        }
        w
    }

    /// Atoms of each block, in increasing order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (atom, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(atom);
        }
        blocks
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if !same_space(&self.space, &coarser.space) {
            return false;
        }
        let mut image = vec![usize::MAX; self.n_blocks];
        self.block_of.iter().zip(&coarser.block_of).all(|(&b, &c)| {
            if image[b] == usize::MAX {
                image[b] = c;
            }
            image[b] == c
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.n_blocks == 1
    }

    pub fn is_finest(&self) -> bool {
        self.n_blocks == self.space.len()
    }

    /// Weighted block average of `f`.
    pub fn cond_expect(&self, f: &RandomVariable) -> Result<RandomVariable> {
        self.check_space(f.space())?;
        let out = self.average(f.values());
        RandomVariable::new(self.space.clone(), out)
    }

    /// Block average of raw atom values; `values.len()` must equal the atom count.
    pub(crate) fn average(&self, values: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_blocks];
        let mut mass = vec![0.0; self.n_blocks];
        for (atom, (&b, v)) in self.block_of.iter().zip(values).enumerate() {
            let w = self.space.weight(atom);
            sums[b] += w * v;
            mass[b] += w;
        }
        for (s, m) in sums.iter_mut().zip(&mass) {
            *s /= m;
        }
        self.block_of.iter().map(|&b| sums[b]).collect()
    }

    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.check_space(&other.space)?;
        Ok(Self::from_keys(self.space.clone(), |a| (self.block_of[a], other.block_of[a])))
    }

    pub fn meet(&self, other: &Partition) -> Result<Partition> {
        self.check_space(&other.space)?;
        // Union-find over atoms, linking atoms that share a block in either partition.
        let n = self.space.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for p in [self, other] {
            let mut rep = vec![usize::MAX; p.n_blocks];
            for atom in 0..n {
                let b = p.block_of[atom];
                if rep[b] == usize::MAX {
                    rep[b] = atom;
                } else {
                    let (ra, rb) = (find(&mut parent, atom), find(&mut parent, rep[b]));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                }
            }
        }
        let roots: Vec<usize> = (0..n).map(|a| find(&mut parent, a)).collect();
        Ok(Self::from_keys(self.space.clone(), |a| roots[a]))
    }

    fn check_space(&self, space: &Arc<ProductSpace>) -> Result<()> {
        if same_space(&self.space, space) {
            Ok(())
        } else {
            Err(LabError::SpaceMismatch)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceReport {
    pub holds: bool,
    pub max_violation: f64,
}

/// Checks `P(A ∩ B | C) = P(A | C) P(B | C)` for all blocks `A ∈ a`, `B ∈ b`, `C ∈ c`.
pub fn check_cond_independence(a: &Partition, b: &Partition, c: &Partition) -> Result<IndependenceReport> {
    a.check_space(&b.space)?;
    a.check_space(&c.space)?;
    let space = &a.space;
    let mut members = vec![Vec::new(); c.n_blocks];
    for atom in 0..space.len() {
        members[c.block_of[atom]].push(atom);
    }
    let mut worst: f64 = 0.0;
    for atoms in &members {
        let mass: f64 = atoms.iter().map(|&x| space.weight(x)).sum();
        let mut pa: HashMap<usize, f64> = HashMap::new();
        let mut pb: HashMap<usize, f64> = HashMap::new();
        let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
        for &x in atoms {
            let w = space.weight(x) / mass;
            *pa.entry(a.block_of[x]).or_default() += w;
            *pb.entry(b.block_of[x]).or_default() += w;
            *joint.entry((a.block_of[x], b.block_of[x])).or_default() += w;
        }
        for (&ka, &va) in &pa {
            for (&kb, &vb) in &pb {
                let j = joint.get(&(ka, kb)).copied().unwrap_or(0.0);
                worst = worst.max((j - va * vb).abs());
            }
        }
    }
    Ok(IndependenceReport { holds: worst <= INDEPENDENCE_TOL, max_violation: worst })
}
