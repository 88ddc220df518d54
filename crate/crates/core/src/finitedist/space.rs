use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A symbol: one point of a finite integer grid, flattened row-major.
pub type Symbol = Vec<u32>;

/// Ordered finite set of equal-length integer vectors.
///
/// The index of a symbol is its position in `symbols`; that ordering is part of
/// every serialized artifact and never changes after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct SymbolSpace {
    dim: usize,
    value_cap: u32,
    symbols: Vec<Symbol>,
    labels: Option<Vec<String>>,
    index: HashMap<Symbol, usize>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    dim: usize,
    value_cap: u32,
    symbols: Vec<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<SpaceRepr> for SymbolSpace {
    type Error = LabError;

    fn try_from(r: SpaceRepr) -> Result<Self> {
        let space = SymbolSpace::new(r.dim, r.value_cap, r.symbols)?;
        match r.labels {
            Some(labels) => space.with_labels(labels),
            None => Ok(space),
        }
    }
}

impl From<SymbolSpace> for SpaceRepr {
    fn from(s: SymbolSpace) -> Self {
        SpaceRepr {
            dim: s.dim,
            value_cap: s.value_cap,
            symbols: s.symbols,
            labels: s.labels,
        }
    }
}

impl PartialEq for SymbolSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.value_cap == other.value_cap && self.symbols == other.symbols
    }
}

impl Eq for SymbolSpace {}

impl SymbolSpace {
    pub fn new(dim: usize, value_cap: u32, symbols: Vec<Symbol>) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidSpace("dimension must be at least 1".into()));
        }
        if symbols.is_empty() {
            return Err(LabError::InvalidSpace("space has no symbols".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.len() != dim {
                return Err(LabError::InvalidSpace(format!(
                    "symbol {i} has {} entries, expected {dim}",
                    s.len()
                )));
            }
            if let Some(v) = s.iter().find(|&&v| v > value_cap) {
                return Err(LabError::InvalidSpace(format!(
                    "symbol {i} has value {v} above cap {value_cap}"
                )));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(LabError::InvalidSpace(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(SymbolSpace {
            dim,
            value_cap,
            symbols,
            labels: None,
            index,
        })
    }

    /// Scalar symbols `0..n`.
    pub fn range(n: usize) -> Result<Self> {
        let cap = n.saturating_sub(1) as u32;
        SymbolSpace::new(1, cap, (0..n as u32).map(|v| vec![v]).collect())
    }

    /// Scalar symbols with the given values, in the given order.
    pub fn scalars(values: &[u32]) -> Result<Self> {
        let cap = values.iter().copied().max().unwrap_or(0);
        SymbolSpace::new(1, cap, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.symbols.len() {
            return Err(LabError::LengthMismatch {
                expected: self.symbols.len(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Product space: symbols are concatenations, first factor major.
    pub fn product(a: &SymbolSpace, b: &SymbolSpace) -> SymbolSpace {
        let mut symbols = Vec::with_capacity(a.len() * b.len());
        for sa in &a.symbols {
            for sb in &b.symbols {
                let mut s = sa.clone();
                s.extend_from_slice(sb);
                symbols.push(s);
            }
        }
        SymbolSpace::new(a.dim + b.dim, a.value_cap.max(b.value_cap), symbols)
            .expect("product of valid spaces is valid")
    }

    /// Ordered union: symbols of `a` followed by symbols of `b` not in `a`.
    /// Fails if the dimensions differ.
    pub fn union(a: &SymbolSpace, b: &SymbolSpace) -> Result<SymbolSpace> {
        if a.dim != b.dim {
            return Err(LabError::SpaceMismatch(format!(
                "union of dimension {} and {}",
                a.dim, b.dim
            )));
        }
        let mut symbols = a.symbols.clone();
        symbols.extend(b.symbols.iter().filter(|s| !a.contains(s)).cloned());
        SymbolSpace::new(a.dim, a.value_cap.max(b.value_cap), symbols)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value_cap(&self) -> u32 {
        self.value_cap
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &[u32] {
        &self.symbols[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display label for symbol `i`, falling back to the raw vector.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format_symbol(&self.symbols[i]),
        }
    }

    pub fn index_of(&self, s: &[u32]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &[u32]) -> bool {
        self.index.contains_key(s)
    }

    pub fn require_index(&self, s: &[u32]) -> Result<usize> {
        self.index_of(s)
            .ok_or_else(|| LabError::SymbolNotInSpace(s.to_vec()))
    }
}

pub(crate) fn format_symbol(s: &[u32]) -> String {
    let parts: Vec<String> = s.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Shared handle to a space. Distributions and maps refer to spaces through it.
pub type SpaceRef = Arc<SymbolSpace>;

pub fn same_space(a: &SpaceRef, b: &SpaceRef) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same(a: &SpaceRef, b: &SpaceRef, what: &str) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(LabError::SpaceMismatch(what.to_string()))
    }
}
