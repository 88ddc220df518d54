use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::space::{ensure_same, SpaceRef, Symbol, SymbolSpace};
use crate::error::{LabError, Result};
use crate::num::{ordered_sum, Real};

/// Probability vector over an explicit finite symbol space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T = f64> {
    space: SpaceRef,
    probs: Vec<T>,
}

impl<T: Real> FiniteDistribution<T> {
    /// Normalizes nonnegative weights.
    pub fn new(space: SpaceRef, weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(LabError::LengthMismatch {
                expected: space.len(),
                got: weights.len(),
            });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(LabError::NonFiniteValue { index });
            }
            if w < T::zero() {
                return Err(LabError::NegativeWeight {
                    index,
                    value: w.as_f64(),
                });
            }
        }
        let total = ordered_sum(weights.iter().copied());
        if total <= T::zero() {
            return Err(LabError::ZeroTotalMass);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(FiniteDistribution { space, probs })
    }

    /// Accepts an already-normalized vector as is. Rounding drift within the
    /// normalization tolerance is kept rather than renormalized, so a law read
    /// back from its own serialization is bit-identical.
    pub fn from_probs(space: SpaceRef, probs: Vec<T>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(LabError::LengthMismatch {
                expected: space.len(),
                got: probs.len(),
            });
        }
        for (index, &w) in probs.iter().enumerate() {
            if !w.is_finite() {
                return Err(LabError::NonFiniteValue { index });
            }
            if w < T::zero() {
                return Err(LabError::NegativeWeight {
                    index,
                    value: w.as_f64(),
                });
            }
        }
        let total = ordered_sum(probs.iter().copied());
        if (total - T::one()).abs() > T::normalization_tol() {
            return Err(LabError::NotNormalized { sum: total.as_f64() });
        }
        Ok(FiniteDistribution { space, probs })
    }

    pub fn uniform(space: SpaceRef) -> Self {
        let n = space.len();
        let w = T::one() / T::of_usize(n);
        FiniteDistribution {
            space,
            probs: vec![w; n],
        }
    }

    pub fn point_mass(space: SpaceRef, index: usize) -> Result<Self> {
        if index >= space.len() {
            return Err(LabError::LengthMismatch {
                expected: space.len(),
                got: index,
            });
        }
        let mut probs = vec![T::zero(); space.len()];
        probs[index] = T::one();
        Ok(FiniteDistribution { space, probs })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> T {
        self.probs[i]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&i| self.probs[i] > T::zero())
            .collect()
    }

    pub fn total_mass(&self) -> T {
        ordered_sum(self.probs.iter().copied())
    }

    /// Probability of a symbol; zero when the symbol is not in the space.
    pub fn prob_of(&self, s: &[u32]) -> T {
        self.space
            .index_of(s)
            .map_or(T::zero(), |i| self.probs[i])
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: T) -> Result<Self> {
        ensure_same(&self.space, &other.space, "mixture")?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(&a, &b)| alpha * a + (T::one() - alpha) * b)
            .collect();
        Self::new(self.space.clone(), probs)
    }

    pub fn map_scalar<U: Real>(&self) -> FiniteDistribution<U> {
        FiniteDistribution {
            space: self.space.clone(),
            probs: self.probs.iter().map(|&p| U::of(p.as_f64())).collect(),
        }
    }
}

/// Independent joint law over the product space, first factor major.
pub fn product<T: Real>(p: &FiniteDistribution<T>, q: &FiniteDistribution<T>) -> FiniteDistribution<T> {
    let space = Arc::new(SymbolSpace::product(&p.space, &q.space));
    let mut probs = Vec::with_capacity(p.len() * q.len());
    for &a in &p.probs {
        for &b in &q.probs {
            probs.push(a * b);
        }
    }
    FiniteDistribution { space, probs }
}

/// Pushforward through an index-level map. `f` returns `None` for symbols it
/// does not map; images must be valid indices of `target`.
pub fn pushforward<T: Real, F>(p: &FiniteDistribution<T>, target: &SpaceRef, f: F) -> Result<FiniteDistribution<T>>
where
    F: Fn(usize) -> Option<usize>,
{
    let mut probs = vec![T::zero(); target.len()];
    for (i, &w) in p.probs.iter().enumerate() {
        let j = f(i).ok_or(LabError::UnmappedSymbol { index: i })?;
        if j >= target.len() {
            return Err(LabError::ImageOutsideTarget { index: i });
        }
        probs[j] += w;
    }
    Ok(FiniteDistribution {
        space: target.clone(),
        probs,
    })
}

/// Pushforward through a symbol-level map.
pub fn pushforward_symbols<T: Real, F>(
    p: &FiniteDistribution<T>,
    target: &SpaceRef,
    f: F,
) -> Result<FiniteDistribution<T>>
where
    F: Fn(&[u32]) -> Option<Symbol>,
{
    let images: Vec<Option<Symbol>> = p.space.symbols().iter().map(|s| f(s)).collect();
    let mut idx = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        match img {
            None => return Err(LabError::UnmappedSymbol { index: i }),
            Some(s) => idx.push(
                target
                    .index_of(s)
                    .ok_or(LabError::ImageOutsideTarget { index: i })?,
            ),
        }
    }
    pushforward(p, target, |i| Some(idx[i]))
}

/// Total variation distance; both laws must live on the same space.
pub fn tv_distance<T: Real>(p: &FiniteDistribution<T>, q: &FiniteDistribution<T>) -> Result<T> {
    ensure_same(&p.space, &q.space, "tv_distance")?;
    let s = ordered_sum(p.probs.iter().zip(&q.probs).map(|(&a, &b)| (a - b).abs()));
    Ok(s / T::of(2.0))
}

/// Total variation between laws on possibly different spaces, matching atoms
/// by symbol. Symbols absent from one space carry zero mass there.
pub fn tv_distance_by_symbol<T: Real>(p: &FiniteDistribution<T>, q: &FiniteDistribution<T>) -> T {
    let mut acc = T::zero();
    for (i, s) in p.space.symbols().iter().enumerate() {
        acc += (p.probs[i] - q.prob_of(s)).abs();
    }
    for (j, s) in q.space.symbols().iter().enumerate() {
        if !p.space.contains(s) {
            acc += q.probs[j];
        }
    }
    acc / T::of(2.0)
}

/// Both laws re-expressed on the ordered union of their spaces. Returns the
/// inputs unchanged when they already share a space.
pub fn embed_on_union<T: Real>(
    p: &FiniteDistribution<T>,
    q: &FiniteDistribution<T>,
) -> Result<(FiniteDistribution<T>, FiniteDistribution<T>)> {
    if super::space::same_space(&p.space, &q.space) {
        return Ok((p.clone(), q.clone()));
    }
    let u = Arc::new(SymbolSpace::union(&p.space, &q.space)?);
    let lift = |d: &FiniteDistribution<T>| FiniteDistribution {
        space: u.clone(),
        probs: u.symbols().iter().map(|s| d.prob_of(s)).collect(),
    };
    Ok((lift(p), lift(q)))
}

#[derive(Serialize, Deserialize)]
struct DistRepr<T> {
    dim: usize,
    value_cap: u32,
    symbols: Vec<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    probs: Vec<T>,
}

impl<T: Real + Serialize> Serialize for FiniteDistribution<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DistRepr {
            dim: self.space.dim(),
            value_cap: self.space.value_cap(),
            symbols: self.space.symbols().to_vec(),
            labels: self.space.labels().map(|l| l.to_vec()),
            probs: self.probs.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for FiniteDistribution<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = DistRepr::<T>::deserialize(deserializer)?;
        let mut space = SymbolSpace::new(r.dim, r.value_cap, r.symbols).map_err(D::Error::custom)?;
        if let Some(l) = r.labels {
            space = space.with_labels(l).map_err(D::Error::custom)?;
        }
        FiniteDistribution::from_probs(Arc::new(space), r.probs).map_err(D::Error::custom)
    }
}
