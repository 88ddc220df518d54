use serde::{Deserialize, Serialize};

use super::space::{same_space, SpaceRef};
use crate::error::{LabError, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// `1[i != j]`
    #[default]
    Discrete,
    /// L1 distance between the symbol vectors.
    L1,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Discrete => "discrete",
            MetricKind::L1 => "l1",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "discrete" => Ok(MetricKind::Discrete),
            "l1" => Ok(MetricKind::L1),
            other => Err(format!("unknown metric kind `{other}` (expected discrete or l1)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Discrete,
    L1,
    Custom,
}

/// Ground cost between two symbol spaces, stored row-major.
#[derive(Debug, Clone)]
pub struct CostMatrix<T = f64> {
    rows: SpaceRef,
    cols: SpaceRef,
    costs: Vec<T>,
    kind: CostKind,
}

/// Distance between two symbols under a built-in metric.
pub fn symbol_distance(kind: MetricKind, a: &[u32], b: &[u32]) -> u64 {
    match kind {
        MetricKind::Discrete => u64::from(a != b),
        MetricKind::L1 => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| u64::from(x.abs_diff(y)))
            .sum(),
    }
}

/// Built-in metric on a space.
pub fn ground_metric<T: Real>(space: &SpaceRef, kind: MetricKind) -> CostMatrix<T> {
    let c = cross_metric(space, space, kind);
    debug_assert!(space.len() > 64 || c.check_metric_axioms().is_ok());
    c
}

/// Built-in metric evaluated between the symbols of two spaces of equal
/// dimension.
pub fn cross_metric<T: Real>(rows: &SpaceRef, cols: &SpaceRef, kind: MetricKind) -> CostMatrix<T> {
    let mut costs = Vec::with_capacity(rows.len() * cols.len());
    for a in rows.symbols() {
        for b in cols.symbols() {
            costs.push(T::of(symbol_distance(kind, a, b) as f64));
        }
    }
    CostMatrix {
        rows: rows.clone(),
        cols: cols.clone(),
        costs,
        kind: match kind {
            MetricKind::Discrete => CostKind::Discrete,
            MetricKind::L1 => CostKind::L1,
        },
    }
}

impl<T: Real> CostMatrix<T> {
    /// Arbitrary nonnegative cost. When both sides are the same space the
    /// metric axioms are checked.
    pub fn custom(rows: SpaceRef, cols: SpaceRef, costs: Vec<T>) -> Result<Self> {
        if costs.len() != rows.len() * cols.len() {
            return Err(LabError::LengthMismatch {
                expected: rows.len() * cols.len(),
                got: costs.len(),
            });
        }
        if let Some(i) = costs.iter().position(|&c| !c.is_finite() || c < T::zero()) {
            return Err(LabError::InvalidCost(format!("entry {i} is negative or non-finite")));
        }
        let m = CostMatrix {
            rows,
            cols,
            costs,
            kind: CostKind::Custom,
        };
        if same_space(&m.rows, &m.cols) {
            m.check_metric_axioms()?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> &SpaceRef {
        &self.rows
    }

    pub fn cols(&self) -> &SpaceRef {
        &self.cols
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.costs[i * self.cols.len() + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.costs
    }

    pub fn max_cost(&self) -> T {
        self.costs.iter().copied().fold(T::zero(), T::max)
    }

    /// Zero diagonal, symmetry and triangle inequality. Only meaningful for a
    /// square matrix over one space; cubic in the space size.
    pub fn check_metric_axioms(&self) -> Result<()> {
        let n = self.rows.len();
        if n != self.cols.len() {
            return Err(LabError::InvalidCost("metric axioms need a square matrix".into()));
        }
        let tol = T::feasibility_tol();
        for i in 0..n {
            if self.get(i, i) != T::zero() {
                return Err(LabError::InvalidCost(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return Err(LabError::InvalidCost(format!("asymmetric at ({i},{j})")));
                }
                for k in 0..n {
                    if self.get(i, k) > self.get(i, j) + self.get(j, k) + tol {
                        return Err(LabError::InvalidCost(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::finitedist::SymbolSpace;

    #[test]
    fn discrete_two_point() {
        let s = Arc::new(SymbolSpace::range(2).unwrap());
        let c = ground_metric::<f64>(&s, MetricKind::Discrete);
        assert_eq!(c.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn l1_scalars() {
        let s = Arc::new(SymbolSpace::scalars(&[0, 2]).unwrap());
        let c = ground_metric::<f64>(&s, MetricKind::L1);
        assert_eq!(c.as_slice(), &[0.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn custom_rejects_non_metric() {
        let s = Arc::new(SymbolSpace::range(3).unwrap());
        let bad = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(CostMatrix::custom(s.clone(), s.clone(), bad).is_err());
        let neg = vec![0.0, -1.0, 1.0, -1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        assert!(CostMatrix::custom(s.clone(), s, neg).is_err());
    }
}
