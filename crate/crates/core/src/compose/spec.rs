use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::finitedist::{format_symbol, same_space, SpaceRef, Symbol, SymbolSpace};

/// How composed symbols are produced from a background/foreground pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Rule {
    /// Per coordinate: foreground value where nonzero, else background value.
    Overlay,
    /// Scalar symbols: `a*x + b*y`.
    Affine { a: u32, b: u32 },
    /// Scalar symbols: `(x + y) mod k`.
    Modadd { k: u32 },
    /// Concatenation into the product space.
    Concat,
    /// Arbitrary lookup table.
    Table,
}

impl Rule {
    fn image(&self, x: &[u32], y: &[u32]) -> Option<Symbol> {
        match *self {
            Rule::Overlay => {
                if x.len() != y.len() {
                    return None;
                }
                Some(x.iter().zip(y).map(|(&b, &f)| if f == 0 { b } else { f }).collect())
            }
            Rule::Affine { a, b } => {
                let (&[x], &[y]) = (x, y) else { return None };
                Some(vec![a.checked_mul(x)?.checked_add(b.checked_mul(y)?)?])
            }
            Rule::Modadd { k } => {
                let (&[x], &[y]) = (x, y) else { return None };
                (k > 0).then(|| vec![(x + y) % k])
            }
            Rule::Concat => {
                let mut s = x.to_vec();
                s.extend_from_slice(y);
                Some(s)
            }
            Rule::Table => None,
        }
    }
}

/// A total deterministic composition `c: X x Y -> Z`, materialized as a table
/// of z indices indexed by `x * |Y| + y`.
#[derive(Debug, Clone)]
pub struct CompositionSpec {
    x_space: SpaceRef,
    y_space: SpaceRef,
    z_space: SpaceRef,
    rule: Rule,
    table: Vec<usize>,
}

impl PartialEq for CompositionSpec {
    fn eq(&self, o: &Self) -> bool {
        self.rule == o.rule
            && self.table == o.table
            && same_space(&self.x_space, &o.x_space)
            && same_space(&self.y_space, &o.y_space)
            && same_space(&self.z_space, &o.z_space)
    }
}

impl CompositionSpec {
    /// Builds a rule-based spec. When `z_space` is `None` the composite space
    /// is the set of images, in order of first occurrence (x major).
    pub fn from_rule(x_space: SpaceRef, y_space: SpaceRef, z_space: Option<SpaceRef>, rule: Rule) -> Result<Self> {
        if rule == Rule::Table {
            return Err(LabError::InvalidComposition("table rule needs an explicit table".into()));
        }
        match rule {
            Rule::Overlay => {
                if x_space.dim() != y_space.dim() {
                    return Err(LabError::InvalidComposition(
                        "overlay needs background and foreground of equal dimension".into(),
                    ));
                }
            }
            Rule::Affine { .. } | Rule::Modadd { .. } => {
                if x_space.dim() != 1 || y_space.dim() != 1 {
                    return Err(LabError::InvalidComposition(
                        "affine/modadd need scalar symbol spaces".into(),
                    ));
                }
                if rule == (Rule::Modadd { k: 0 }) {
                    return Err(LabError::InvalidComposition("modadd needs k >= 1".into()));
                }
            }
            _ => {}
        }
        let mut images = Vec::with_capacity(x_space.len() * y_space.len());
        for x in x_space.symbols() {
            for y in y_space.symbols() {
                let z = rule.image(x, y).ok_or_else(|| {
                    LabError::InvalidComposition(format!(
                        "rule has no image for ({}, {})",
                        format_symbol(x),
                        format_symbol(y)
                    ))
                })?;
                images.push(z);
            }
        }
        let z_space = match z_space {
            Some(z) => z,
            None => Arc::new(derived_space(&rule, &images)?),
        };
        if rule == Rule::Overlay && (x_space.value_cap() > z_space.value_cap() || y_space.value_cap() > z_space.value_cap()) {
            return Err(LabError::InvalidComposition(
                "overlay needs component value caps within the composite cap".into(),
            ));
        }
        let mut table = Vec::with_capacity(images.len());
        for (k, z) in images.iter().enumerate() {
            let zi = z_space.index_of(z).ok_or_else(|| {
                LabError::InvalidComposition(format!(
                    "image {} of pair {k} is outside the composite space",
                    format_symbol(z)
                ))
            })?;
            table.push(zi);
        }
        Ok(CompositionSpec {
            x_space,
            y_space,
            z_space,
            rule,
            table,
        })
    }

    pub fn overlay(background: SpaceRef, foreground: SpaceRef, composite: Option<SpaceRef>) -> Result<Self> {
        Self::from_rule(background, foreground, composite, Rule::Overlay)
    }

    /// `z = a*x + b*y` on scalar spaces; the default composite space is
    /// `0..=max image`.
    pub fn affine(x_space: SpaceRef, y_space: SpaceRef, a: u32, b: u32, z_space: Option<SpaceRef>) -> Result<Self> {
        Self::from_rule(x_space, y_space, z_space, Rule::Affine { a, b })
    }

    /// `(x + y) mod k` on `Z_k x Z_k -> Z_k`.
    pub fn modadd(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(LabError::InvalidComposition("modadd needs k >= 1".into()));
        }
        let zk = Arc::new(SymbolSpace::range(k as usize)?);
        Self::from_rule(zk.clone(), zk.clone(), Some(zk), Rule::Modadd { k })
    }

    pub fn concat(x_space: SpaceRef, y_space: SpaceRef) -> Result<Self> {
        let z = Arc::new(SymbolSpace::product(&x_space, &y_space));
        Self::from_rule(x_space, y_space, Some(z), Rule::Concat)
    }

    /// Explicit table `table[x][y] = z index`.
    pub fn from_table(x_space: SpaceRef, y_space: SpaceRef, z_space: SpaceRef, table: Vec<Vec<usize>>) -> Result<Self> {
        if table.len() != x_space.len() {
            return Err(LabError::InvalidComposition(format!(
                "table has {} rows, expected {}",
                table.len(),
                x_space.len()
            )));
        }
        let mut flat = Vec::with_capacity(x_space.len() * y_space.len());
        for (xi, row) in table.iter().enumerate() {
            if row.len() != y_space.len() {
                return Err(LabError::InvalidComposition(format!(
                    "table row {xi} has {} entries, expected {}",
                    row.len(),
                    y_space.len()
                )));
            }
            for (yi, &z) in row.iter().enumerate() {
                if z >= z_space.len() {
                    return Err(LabError::InvalidComposition(format!(
                        "table entry ({xi},{yi}) = {z} is outside the composite space"
                    )));
                }
                flat.push(z);
            }
        }
        Ok(CompositionSpec {
            x_space,
            y_space,
            z_space,
            rule: Rule::Table,
            table: flat,
        })
    }

    pub fn x_space(&self) -> &SpaceRef {
        &self.x_space
    }

    pub fn y_space(&self) -> &SpaceRef {
        &self.y_space
    }

    pub fn z_space(&self) -> &SpaceRef {
        &self.z_space
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn n_pairs(&self) -> usize {
        self.table.len()
    }

    #[inline]
    pub fn apply(&self, xi: usize, yi: usize) -> usize {
        self.table[xi * self.y_space.len() + yi]
    }

    /// Image of a flattened pair index `x * |Y| + y`.
    #[inline]
    pub fn apply_joint(&self, j: usize) -> usize {
        self.table[j]
    }

    pub fn table_rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.y_space.len()).map(|r| r.to_vec()).collect()
    }

    /// Symbol-level evaluation.
    pub fn evaluate(&self, x: &[u32], y: &[u32]) -> Result<Symbol> {
        let xi = self.x_space.require_index(x)?;
        let yi = self.y_space.require_index(y)?;
        Ok(self.z_space.symbol(self.apply(xi, yi)).to_vec())
    }

    /// Same rule, with the x argument first passed through `relabel`
    /// (a permutation of x indices).
    pub fn precompose_x(&self, relabel: &[usize]) -> Result<Self> {
        if relabel.len() != self.x_space.len() {
            return Err(LabError::LengthMismatch {
                expected: self.x_space.len(),
                got: relabel.len(),
            });
        }
        let ny = self.y_space.len();
        let mut table = Vec::with_capacity(self.table.len());
        for xi in 0..self.x_space.len() {
            for yi in 0..ny {
                table.push(self.apply(relabel[xi], yi));
            }
        }
        Ok(CompositionSpec {
            x_space: self.x_space.clone(),
            y_space: self.y_space.clone(),
            z_space: self.z_space.clone(),
            rule: Rule::Table,
            table,
        })
    }

    /// `c'(y, x) = c(x, y)`: the roles of the two components exchanged.
    pub fn transposed(&self) -> Self {
        let (nx, ny) = (self.x_space.len(), self.y_space.len());
        let mut table = Vec::with_capacity(self.table.len());
        for yi in 0..ny {
            for xi in 0..nx {
                table.push(self.apply(xi, yi));
            }
        }
        CompositionSpec {
            x_space: self.y_space.clone(),
            y_space: self.x_space.clone(),
            z_space: self.z_space.clone(),
            rule: Rule::Table,
            table,
        }
    }
}

fn derived_space(rule: &Rule, images: &[Symbol]) -> Result<SymbolSpace> {
    if let Rule::Affine { .. } = rule {
        let max = images.iter().map(|s| s[0]).max().unwrap_or(0);
        return SymbolSpace::range(max as usize + 1);
    }
    let mut seen = HashMap::new();
    let mut symbols = Vec::new();
    for z in images {
        if !seen.contains_key(z) {
            seen.insert(z.clone(), symbols.len());
            symbols.push(z.clone());
        }
    }
    let dim = symbols[0].len();
    let cap = symbols.iter().flat_map(|s| s.iter().copied()).max().unwrap_or(0);
    SymbolSpace::new(dim, cap, symbols)
}

/// Why a composition fails to be bijective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BijectivityWitness {
    /// Two distinct pairs with the same image.
    Collision {
        first: (usize, usize),
        second: (usize, usize),
        z: usize,
    },
    /// A composite symbol no pair maps to.
    Uncovered { z: usize },
}

impl fmt::Display for BijectivityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BijectivityWitness::Collision { first, second, z } => write!(
                f,
                "pairs (x={}, y={}) and (x={}, y={}) both map to z={z}",
                first.0, first.1, second.0, second.1
            ),
            BijectivityWitness::Uncovered { z } => write!(f, "composite z={z} has no preimage"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BijectivityCheck {
    pub bijective: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BijectivityWitness>,
}

/// Injective on `X x Y` and onto `Z`.
pub fn check_bijective(spec: &CompositionSpec) -> BijectivityCheck {
    let ny = spec.y_space.len();
    let mut preimage: Vec<Option<usize>> = vec![None; spec.z_space.len()];
    for (j, &z) in spec.table.iter().enumerate() {
        if let Some(prev) = preimage[z] {
            return BijectivityCheck {
                bijective: false,
                witness: Some(BijectivityWitness::Collision {
                    first: (prev / ny, prev % ny),
                    second: (j / ny, j % ny),
                    z,
                }),
            };
        }
        preimage[z] = Some(j);
    }
    if let Some(z) = preimage.iter().position(Option::is_none) {
        return BijectivityCheck {
            bijective: false,
            witness: Some(BijectivityWitness::Uncovered { z }),
        };
    }
    BijectivityCheck {
        bijective: true,
        witness: None,
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    #[serde(flatten)]
    rule: Rule,
    x_space: SymbolSpace,
    y_space: SymbolSpace,
    z_space: SymbolSpace,
    table: Vec<Vec<usize>>,
}

impl Serialize for CompositionSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            rule: self.rule.clone(),
            x_space: (*self.x_space).clone(),
            y_space: (*self.y_space).clone(),
            z_space: (*self.z_space).clone(),
            table: self.table_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CompositionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = SpecRepr::deserialize(d)?;
        let (x, y, z) = (Arc::new(r.x_space), Arc::new(r.y_space), Arc::new(r.z_space));
        let from_table = CompositionSpec::from_table(x.clone(), y.clone(), z.clone(), r.table).map_err(D::Error::custom)?;
        if r.rule == Rule::Table {
            return Ok(from_table);
        }
        let from_rule = CompositionSpec::from_rule(x, y, Some(z), r.rule).map_err(D::Error::custom)?;
        if from_rule.table != from_table.table {
            return Err(D::Error::custom("table disagrees with the declared rule"));
        }
        Ok(from_rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(n: usize) -> SpaceRef {
        Arc::new(SymbolSpace::range(n).unwrap())
    }

    #[test]
    fn overlay_examples() {
        let grids = Arc::new(SymbolSpace::new(2, 3, vec![vec![1, 1], vec![2, 2]]).unwrap());
        let fg = Arc::new(SymbolSpace::new(2, 3, vec![vec![0, 3], vec![0, 0]]).unwrap());
        let c = CompositionSpec::overlay(grids, fg, None).unwrap();
        assert_eq!(c.evaluate(&[1, 1], &[0, 3]).unwrap(), vec![1, 3]);
        assert_eq!(c.evaluate(&[2, 2], &[0, 0]).unwrap(), vec![2, 2]);
        assert!(matches!(c.evaluate(&[3, 3], &[0, 0]), Err(LabError::SymbolNotInSpace(_))));
    }

    #[test]
    fn affine_example() {
        let c = CompositionSpec::affine(sp(3), sp(2), 1, 3, None).unwrap();
        assert_eq!(c.evaluate(&[2], &[1]).unwrap(), vec![5]);
        assert_eq!(c.z_space().len(), 6);
        assert!(check_bijective(&c).bijective);
    }

    #[test]
    fn affine_must_land_in_given_space() {
        assert!(CompositionSpec::affine(sp(3), sp(2), 1, 3, Some(sp(4))).is_err());
    }

    #[test]
    fn modadd_not_bijective() {
        let c = CompositionSpec::modadd(3).unwrap();
        let chk = check_bijective(&c);
        assert!(!chk.bijective);
        assert!(matches!(chk.witness, Some(BijectivityWitness::Collision { .. })));
    }

    #[test]
    fn uncovered_witness() {
        let c = CompositionSpec::from_table(sp(1), sp(2), sp(3), vec![vec![0, 2]]).unwrap();
        assert_eq!(
            check_bijective(&c).witness,
            Some(BijectivityWitness::Uncovered { z: 1 })
        );
    }

    #[test]
    fn opaque_foreground_collides() {
        let bg = Arc::new(SymbolSpace::new(2, 3, vec![vec![1, 1], vec![2, 2]]).unwrap());
        let fg = Arc::new(SymbolSpace::new(2, 3, vec![vec![3, 3], vec![0, 3]]).unwrap());
        let c = CompositionSpec::overlay(bg, fg, None).unwrap();
        match check_bijective(&c).witness {
            Some(BijectivityWitness::Collision { first, second, .. }) => {
                assert_eq!(first, (0, 0));
                assert_eq!(second, (1, 0));
            }
            w => panic!("unexpected witness {w:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_rule_consistency() {
        let c = CompositionSpec::affine(sp(2), sp(2), 1, 2, None).unwrap();
        let j = serde_json::to_string(&c).unwrap();
        assert!(j.starts_with(r#"{"rule":"affine","a":1,"b":2,"#));
        let back: CompositionSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, c);
        let tampered = j.replace(r#""table":[[0,2],[1,3]]"#, r#""table":[[0,2],[3,1]]"#);
        assert_ne!(tampered, j);
        assert!(serde_json::from_str::<CompositionSpec>(&tampered).is_err());
    }

    #[test]
    fn transpose_swaps_roles() {
        let c = CompositionSpec::affine(sp(3), sp(2), 1, 3, None).unwrap();
        let t = c.transposed();
        for x in 0..3 {
            for y in 0..2 {
                assert_eq!(t.apply(y, x), c.apply(x, y));
            }
        }
    }
}
