use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::spec::{check_bijective, CompositionSpec};
use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, pushforward, FiniteDistribution, SpaceRef, SymbolSpace};

const ROW_TOL: f64 = 1e-12;

fn check_rows(rows: &[f64], n_rows: usize, width: usize, what: &str) -> Result<Vec<f64>> {
    if rows.len() != n_rows * width {
        return Err(LabError::InvalidDecomposition(format!(
            "{what}: expected {n_rows}x{width} entries, got {}",
            rows.len()
        )));
    }
    let mut out = rows.to_vec();
    for (r, row) in out.chunks_mut(width).enumerate() {
        if row.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(LabError::InvalidDecomposition(format!("{what}: row {r} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(LabError::InvalidDecomposition(format!("{what}: row {r} sums to {s}")));
        }
        if s != 1.0 {
            row.iter_mut().for_each(|w| *w /= s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecompositionKind {
    /// `(x index, y index)` per composite.
    Deterministic(Vec<(usize, usize)>),
    /// Row-stochastic `|Z| x (|X||Y|)`, row-major.
    Stochastic(Vec<f64>),
}

/// Candidate inverse of a composition: for each composite, a law over pairs.
#[derive(Debug, Clone)]
pub struct DecompositionMap {
    z_space: SpaceRef,
    x_space: SpaceRef,
    y_space: SpaceRef,
    kind: DecompositionKind,
}

impl PartialEq for DecompositionMap {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind && *self.z_space == *o.z_space && *self.x_space == *o.x_space && *self.y_space == *o.y_space
    }
}

impl DecompositionMap {
    pub fn deterministic(z_space: SpaceRef, x_space: SpaceRef, y_space: SpaceRef, table: Vec<(usize, usize)>) -> Result<Self> {
        if table.len() != z_space.len() {
            return Err(LabError::InvalidDecomposition(format!(
                "expected {} entries, got {}",
                z_space.len(),
                table.len()
            )));
        }
        if let Some(z) = table.iter().position(|&(x, y)| x >= x_space.len() || y >= y_space.len()) {
            return Err(LabError::InvalidDecomposition(format!("entry {z} is out of range")));
        }
        Ok(DecompositionMap {
            z_space,
            x_space,
            y_space,
            kind: DecompositionKind::Deterministic(table),
        })
    }

    pub fn stochastic(z_space: SpaceRef, x_space: SpaceRef, y_space: SpaceRef, rows: Vec<f64>) -> Result<Self> {
        let width = x_space.len() * y_space.len();
        let rows = check_rows(&rows, z_space.len(), width, "decomposition")?;
        Ok(DecompositionMap {
            z_space,
            x_space,
            y_space,
            kind: DecompositionKind::Stochastic(rows),
        })
    }

    /// Every row uniform over all pairs.
    pub fn uniform(z_space: SpaceRef, x_space: SpaceRef, y_space: SpaceRef) -> Self {
        let width = x_space.len() * y_space.len();
        let rows = vec![1.0 / width as f64; z_space.len() * width];
        DecompositionMap {
            z_space,
            x_space,
            y_space,
            kind: DecompositionKind::Stochastic(rows),
        }
    }

    pub fn z_space(&self) -> &SpaceRef {
        &self.z_space
    }

    pub fn x_space(&self) -> &SpaceRef {
        &self.x_space
    }

    pub fn y_space(&self) -> &SpaceRef {
        &self.y_space
    }

    pub fn kind(&self) -> &DecompositionKind {
        &self.kind
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, DecompositionKind::Deterministic(_))
    }

    pub fn n_pairs(&self) -> usize {
        self.x_space.len() * self.y_space.len()
    }

    /// Dense row for composite `z` over flattened pairs.
    pub fn row(&self, z: usize) -> Vec<f64> {
        let w = self.n_pairs();
        match &self.kind {
            DecompositionKind::Deterministic(t) => {
                let mut r = vec![0.0; w];
                let (x, y) = t[z];
                r[x * self.y_space.len() + y] = 1.0;
                r
            }
            DecompositionKind::Stochastic(rows) => rows[z * w..(z + 1) * w].to_vec(),
        }
    }

    /// Calls `f(pair, weight)` for every pair with nonzero weight in row `z`,
    /// in increasing pair order.
    pub fn for_each_in_row(&self, z: usize, mut f: impl FnMut(usize, f64)) {
        match &self.kind {
            DecompositionKind::Deterministic(t) => {
                let (x, y) = t[z];
                f(x * self.y_space.len() + y, 1.0);
            }
            DecompositionKind::Stochastic(rows) => {
                let w = self.n_pairs();
                for (j, &p) in rows[z * w..(z + 1) * w].iter().enumerate() {
                    if p != 0.0 {
                        f(j, p);
                    }
                }
            }
        }
    }

    /// Exact 0/1 stochastic form of a deterministic map.
    pub fn to_stochastic(&self) -> Self {
        let rows = (0..self.z_space.len()).flat_map(|z| self.row(z)).collect();
        DecompositionMap {
            z_space: self.z_space.clone(),
            x_space: self.x_space.clone(),
            y_space: self.y_space.clone(),
            kind: DecompositionKind::Stochastic(rows),
        }
    }

    /// Deterministic map taking each row's most likely pair (lowest index on
    /// ties).
    pub fn rounded(&self) -> Self {
        let ny = self.y_space.len();
        let table = (0..self.z_space.len())
            .map(|z| {
                let r = self.row(z);
                let mut best = 0;
                for (j, &w) in r.iter().enumerate() {
                    if w > r[best] {
                        best = j;
                    }
                }
                (best / ny, best % ny)
            })
            .collect();
        DecompositionMap {
            z_space: self.z_space.clone(),
            x_space: self.x_space.clone(),
            y_space: self.y_space.clone(),
            kind: DecompositionKind::Deterministic(table),
        }
    }

    /// Deterministic entry for `z` when the row is a point mass.
    pub fn point_of(&self, z: usize) -> Option<(usize, usize)> {
        match &self.kind {
            DecompositionKind::Deterministic(t) => Some(t[z]),
            DecompositionKind::Stochastic(_) => {
                let r = self.row(z);
                let ny = self.y_space.len();
                r.iter().position(|&w| w == 1.0).map(|j| (j / ny, j % ny))
            }
        }
    }

    /// Law of `d(Z)` over the pair space (first factor major).
    pub fn push(&self, p_z: &FiniteDistribution) -> Result<FiniteDistribution> {
        ensure_same(p_z.space(), &self.z_space, "decomposition input")?;
        let joint = Arc::new(SymbolSpace::product(&self.x_space, &self.y_space));
        let mut probs = vec![0.0; joint.len()];
        for z in 0..self.z_space.len() {
            let pz = p_z.prob(z);
            self.for_each_in_row(z, |j, w| probs[j] += pz * w);
        }
        FiniteDistribution::from_probs(joint, probs)
    }

    /// Applies `relabel` to the x part of every output.
    pub fn map_x(&self, relabel: &[usize]) -> Result<Self> {
        if relabel.len() != self.x_space.len() {
            return Err(LabError::LengthMismatch {
                expected: self.x_space.len(),
                got: relabel.len(),
            });
        }
        let ny = self.y_space.len();
        let kind = match &self.kind {
            DecompositionKind::Deterministic(t) => {
                DecompositionKind::Deterministic(t.iter().map(|&(x, y)| (relabel[x], y)).collect())
            }
            DecompositionKind::Stochastic(rows) => {
                let w = self.n_pairs();
                let mut out = vec![0.0; rows.len()];
                for z in 0..self.z_space.len() {
                    for j in 0..w {
                        let (x, y) = (j / ny, j % ny);
                        out[z * w + relabel[x] * ny + y] += rows[z * w + j];
                    }
                }
                DecompositionKind::Stochastic(out)
            }
        };
        Ok(DecompositionMap {
            z_space: self.z_space.clone(),
            x_space: self.x_space.clone(),
            y_space: self.y_space.clone(),
            kind,
        })
    }
}

/// Deterministic inverse of a bijective composition.
pub fn invert_composition(spec: &CompositionSpec) -> Result<DecompositionMap> {
    let chk = check_bijective(spec);
    if let Some(w) = chk.witness {
        return Err(LabError::NotBijective(w));
    }
    let ny = spec.y_space().len();
    let mut table = vec![(0, 0); spec.z_space().len()];
    for j in 0..spec.n_pairs() {
        table[spec.apply_joint(j)] = (j / ny, j % ny);
    }
    DecompositionMap::deterministic(spec.z_space().clone(), spec.x_space().clone(), spec.y_space().clone(), table)
}

/// Row-stochastic composition: each pair maps to a law over composites.
#[derive(Debug, Clone)]
pub struct StochasticComposition {
    x_space: SpaceRef,
    y_space: SpaceRef,
    z_space: SpaceRef,
    rows: Vec<f64>,
}

impl StochasticComposition {
    pub fn new(x_space: SpaceRef, y_space: SpaceRef, z_space: SpaceRef, rows: Vec<f64>) -> Result<Self> {
        let rows = check_rows(&rows, x_space.len() * y_space.len(), z_space.len(), "composition")?;
        Ok(StochasticComposition {
            x_space,
            y_space,
            z_space,
            rows,
        })
    }

    pub fn from_spec(spec: &CompositionSpec) -> Self {
        let nz = spec.z_space().len();
        let mut rows = vec![0.0; spec.n_pairs() * nz];
        for j in 0..spec.n_pairs() {
            rows[j * nz + spec.apply_joint(j)] = 1.0;
        }
        StochasticComposition {
            x_space: spec.x_space().clone(),
            y_space: spec.y_space().clone(),
            z_space: spec.z_space().clone(),
            rows,
        }
    }

    pub fn z_space(&self) -> &SpaceRef {
        &self.z_space
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Most likely composite per pair.
    pub fn rounded(&self) -> Result<CompositionSpec> {
        let nz = self.z_space.len();
        let ny = self.y_space.len();
        let table = (0..self.x_space.len())
            .map(|x| {
                (0..ny)
                    .map(|y| {
                        let r = &self.rows[(x * ny + y) * nz..(x * ny + y + 1) * nz];
                        let mut best = 0;
                        for (z, &w) in r.iter().enumerate() {
                            if w > r[best] {
                                best = z;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();
        CompositionSpec::from_table(self.x_space.clone(), self.y_space.clone(), self.z_space.clone(), table)
    }
}

/// Either a deterministic rule or a stochastic relaxation of one.
#[derive(Debug, Clone)]
pub enum CompositionMap {
    Exact(CompositionSpec),
    Stochastic(StochasticComposition),
}

impl CompositionMap {
    pub fn x_space(&self) -> &SpaceRef {
        match self {
            CompositionMap::Exact(s) => s.x_space(),
            CompositionMap::Stochastic(s) => &s.x_space,
        }
    }

    pub fn y_space(&self) -> &SpaceRef {
        match self {
            CompositionMap::Exact(s) => s.y_space(),
            CompositionMap::Stochastic(s) => &s.y_space,
        }
    }

    pub fn z_space(&self) -> &SpaceRef {
        match self {
            CompositionMap::Exact(s) => s.z_space(),
            CompositionMap::Stochastic(s) => &s.z_space,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.x_space().len() * self.y_space().len()
    }

    /// Calls `f(z, weight)` for every composite reachable from pair `j`.
    pub fn for_each_image(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            CompositionMap::Exact(s) => f(s.apply_joint(j), 1.0),
            CompositionMap::Stochastic(s) => {
                let nz = s.z_space.len();
                for (z, &w) in s.rows[j * nz..(j + 1) * nz].iter().enumerate() {
                    if w != 0.0 {
                        f(z, w);
                    }
                }
            }
        }
    }

    /// Law of the composite given a law over pairs.
    pub fn push(&self, joint: &FiniteDistribution) -> Result<FiniteDistribution> {
        if joint.len() != self.n_pairs() {
            return Err(LabError::SpaceMismatch("composition input".into()));
        }
        match self {
            CompositionMap::Exact(s) => pushforward(joint, s.z_space(), |j| Some(s.apply_joint(j))),
            CompositionMap::Stochastic(_) => {
                let mut probs = vec![0.0; self.z_space().len()];
                for j in 0..joint.len() {
                    let pj = joint.prob(j);
                    self.for_each_image(j, |z, w| probs[z] += pj * w);
                }
                FiniteDistribution::from_probs(self.z_space().clone(), probs)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DecompBody {
    Deterministic { table: Vec<(usize, usize)> },
    Stochastic { rows: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
struct DecompRepr {
    #[serde(flatten)]
    body: DecompBody,
    z_space: SymbolSpace,
    x_space: SymbolSpace,
    y_space: SymbolSpace,
}

impl Serialize for DecompositionMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let body = match &self.kind {
            DecompositionKind::Deterministic(t) => DecompBody::Deterministic { table: t.clone() },
            DecompositionKind::Stochastic(rows) => DecompBody::Stochastic {
                rows: rows.chunks(self.n_pairs()).map(|r| r.to_vec()).collect(),
            },
        };
        DecompRepr {
            body,
            z_space: (*self.z_space).clone(),
            x_space: (*self.x_space).clone(),
            y_space: (*self.y_space).clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DecompositionMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = DecompRepr::deserialize(d)?;
        let (z, x, y) = (Arc::new(r.z_space), Arc::new(r.x_space), Arc::new(r.y_space));
        match r.body {
            DecompBody::Deterministic { table } => DecompositionMap::deterministic(z, x, y, table),
            DecompBody::Stochastic { rows } => DecompositionMap::stochastic(z, x, y, rows.concat()),
        }
        .map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct StochCompRepr {
    x_space: SymbolSpace,
    y_space: SymbolSpace,
    z_space: SymbolSpace,
    rows: Vec<Vec<f64>>,
}

impl Serialize for StochasticComposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StochCompRepr {
            x_space: (*self.x_space).clone(),
            y_space: (*self.y_space).clone(),
            z_space: (*self.z_space).clone(),
            rows: self.rows.chunks(self.z_space.len()).map(|r| r.to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticComposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = StochCompRepr::deserialize(d)?;
        StochasticComposition::new(Arc::new(r.x_space), Arc::new(r.y_space), Arc::new(r.z_space), r.rows.concat())
            .map_err(D::Error::custom)
    }
}

impl Serialize for CompositionMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(tag = "form", rename_all = "lowercase")]
        enum Tagged<'a> {
            Exact { spec: &'a CompositionSpec },
            Stochastic { map: &'a StochasticComposition },
        }
        match self {
            CompositionMap::Exact(spec) => Tagged::Exact { spec },
            CompositionMap::Stochastic(map) => Tagged::Stochastic { map },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CompositionMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(tag = "form", rename_all = "lowercase")]
        enum Tagged {
            Exact { spec: CompositionSpec },
            Stochastic { map: StochasticComposition },
        }
        Ok(match Tagged::deserialize(d)? {
            Tagged::Exact { spec } => CompositionMap::Exact(spec),
            Tagged::Stochastic { map } => CompositionMap::Stochastic(map),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(n: usize) -> SpaceRef {
        Arc::new(SymbolSpace::range(n).unwrap())
    }

    #[test]
    fn affine_inverse_is_divmod() {
        let c = CompositionSpec::affine(sp(3), sp(2), 1, 3, None).unwrap();
        let d = invert_composition(&c).unwrap();
        for z in 0..6 {
            assert_eq!(d.point_of(z), Some((z % 3, z / 3)));
        }
    }

    #[test]
    fn modadd_has_no_inverse() {
        let c = CompositionSpec::modadd(3).unwrap();
        assert!(matches!(invert_composition(&c), Err(LabError::NotBijective(_))));
    }

    #[test]
    fn stochastic_rows_validated() {
        assert!(DecompositionMap::stochastic(sp(1), sp(1), sp(2), vec![0.5, 0.6]).is_err());
        assert!(DecompositionMap::stochastic(sp(1), sp(1), sp(2), vec![1.5, -0.5]).is_err());
        assert!(DecompositionMap::stochastic(sp(1), sp(1), sp(2), vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn deterministic_to_stochastic_is_exact() {
        let c = CompositionSpec::affine(sp(3), sp(2), 1, 3, None).unwrap();
        let d = invert_composition(&c).unwrap();
        let s = d.to_stochastic();
        for z in 0..6 {
            assert_eq!(d.row(z), s.row(z));
        }
        assert_eq!(s.rounded(), d);
    }

    #[test]
    fn json_round_trip() {
        let c = CompositionSpec::affine(sp(2), sp(2), 1, 2, None).unwrap();
        let d = invert_composition(&c).unwrap();
        let j = serde_json::to_string(&d).unwrap();
        let back: DecompositionMap = serde_json::from_str(&j).unwrap();
        assert_eq!(back, d);
        let m = CompositionMap::Stochastic(StochasticComposition::from_spec(&c));
        let j = serde_json::to_string(&m).unwrap();
        let back: CompositionMap = serde_json::from_str(&j).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), j);
    }
}
