//! JSON filtration documents.
//!
//! ```json
//! {"base_atoms": [0, 1], "base_weights": [0.5, 0.5], "N": 2, "M": 2}
//! {"universal_grid": [[{"atoms": ["a", "b"], "weights": [0.5, 0.5]}, ...], ...]}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{canonical_1p, canonical_2p, universal_2p, Filtration1, Filtration2, UniversalFiltrationSpec};
use crate::grid::Grid;
use crate::prob::FiniteProbSpace;
use crate::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub atoms: Vec<Value>,
    pub weights: Vec<f64>,
}

impl FactorSpec {
    pub fn to_space(&self) -> Result<FiniteProbSpace> {
        FiniteProbSpace::new(self.atoms.iter().map(label).collect(), self.weights.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FiltrationConfig {
    Canonical {
        base_atoms: Vec<Value>,
        base_weights: Vec<f64>,
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "M", default)]
        m: usize,
    },
    Universal {
        universal_grid: Vec<Vec<FactorSpec>>,
    },
}

impl FiltrationConfig {
    pub fn coin(n: usize, m: usize) -> Self {
        FiltrationConfig::Canonical {
            base_atoms: vec![Value::from(0), Value::from(1)],
            base_weights: vec![0.5, 0.5],
            n,
            m,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn base(&self) -> Result<Option<FiniteProbSpace>> {
        match self {
            FiltrationConfig::Canonical { base_atoms, base_weights, .. } => {
                Ok(Some(FiniteProbSpace::new(base_atoms.iter().map(label).collect(), base_weights.clone())?))
            }
            FiltrationConfig::Universal { .. } => Ok(None),
        }
    }

    /// `(N, M)`.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            FiltrationConfig::Canonical { n, m, .. } => (*n, *m),
            FiltrationConfig::Universal { universal_grid } => (
                universal_grid.len().saturating_sub(1),
                universal_grid.first().map_or(0, |r| r.len().saturating_sub(1)),
            ),
        }
    }

    pub fn build_2p(&self) -> Result<Filtration2> {
        match self {
            FiltrationConfig::Canonical { n, m, .. } => {
                canonical_2p(&self.base()?.expect("canonical has a base"), *n, *m)
            }
            FiltrationConfig::Universal { universal_grid } => {
                let rows = universal_grid.len();
                let cols = universal_grid.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 || universal_grid.iter().any(|r| r.len() != cols) {
                    return Err(LabError::ShapeMismatch("ragged or empty universal grid".into()));
                }
                let mut factors = Vec::with_capacity(rows * cols);
                for row in universal_grid {
                    for f in row {
                        factors.push(f.to_space()?);
                    }
                }
                let spec = UniversalFiltrationSpec { factors: Grid::from_vec(rows, cols, factors) };
                universal_2p(&spec, rows - 1, cols - 1)
            }
        }
    }

    /// The one-parameter canonical filtration of length `N + 1`.
    pub fn build_1p(&self) -> Result<Filtration1> {
        match self {
            FiltrationConfig::Canonical { n, .. } => canonical_1p(&self.base()?.expect("canonical has a base"), *n),
            FiltrationConfig::Universal { .. } => {
                Err(LabError::InvalidParameter("a universal grid has no one-parameter form".into()))
            }
        }
    }
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::IndexedFiltration;

    #[test]
    fn parses_both_forms() {
        let c = FiltrationConfig::from_json(r#"{"base_atoms":[0,1],"base_weights":[0.5,0.5],"N":1,"M":2}"#).unwrap();
        assert_eq!(c.dims(), (1, 2));
        let f = c.build_2p().unwrap();
        assert_eq!(f.shape(), (2, 3));

        let u = FiltrationConfig::from_json(
            r#"{"universal_grid":[[{"atoms":["a","b"],"weights":[0.5,0.5]},{"atoms":["c"],"weights":[1.0]}]]}"#,
        )
        .unwrap();
        assert_eq!(u.dims(), (0, 1));
        let f = u.build_2p().unwrap();
        assert_eq!(f.space().len(), 2);
        assert!(u.build_1p().is_err());
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(FiltrationConfig::from_json(r#"{"N":1}"#).is_err());
        let bad = FiltrationConfig::from_json(r#"{"base_atoms":[0,1],"base_weights":[0.7,0.7],"N":1}"#).unwrap();
        assert!(bad.build_2p().is_err());
    }
}
