use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::glyphs::{micro_bb_class, micro_mb_family};
use super::maps::CompositionMap;
use super::spec::CompositionSpec;
use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, product, tv_distance, FiniteDistribution, MetricKind, SpaceRef, SymbolSpace};

pub const SCHEMA_VERSION: u32 = 1;

/// Consistency tolerance between `p_z` and the law induced by the components.
pub const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    MicroMb,
    MicroBb,
    Modadd,
    Custom,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::MicroMb => "micro_mb",
            ScenarioKind::MicroBb => "micro_bb",
            ScenarioKind::Modadd => "modadd",
            ScenarioKind::Custom => "custom",
        }
    }
}

/// The two component slots of a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    /// First argument of the composition (the background in overlay scenarios).
    X,
    /// Second argument (the foreground in overlay scenarios).
    Y,
}

impl Component {
    pub fn other(self) -> Component {
        match self {
            Component::X => Component::Y,
            Component::Y => Component::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
        }
    }
}

/// Parameters for [`make_scenario`]. Fields irrelevant to a kind are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Constant background values (micro_mb/micro_bb), each in {1, 2}.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_values: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_probs: Option<Vec<f64>>,
    /// Built-in glyph family: "a"/"b" for micro_mb, "1"/"2" for micro_bb.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glyph_family: Option<String>,
    /// Explicit glyphs overriding the family (entries in {0, 3}).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glyphs: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glyph_probs: Option<Vec<f64>>,
    /// micro_bb: law over the four quadrants (nw, ne, sw, se).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrant_probs: Option<Vec<f64>>,
    /// Draw unspecified component laws at random from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_laws: Option<bool>,
    /// modadd modulus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_y: Option<Vec<f64>>,
    /// custom: component and composite space sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_size: Option<usize>,
    /// custom: explicit table `table[x][y] = z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<usize>>>,
}

/// A complete problem instance: composition, component laws (when known) and
/// the composed law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr", into = "ScenarioRepr")]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub metric_kind: MetricKind,
    pub spec: CompositionSpec,
    pub p_x: Option<FiniteDistribution>,
    pub p_y: Option<FiniteDistribution>,
    pub p_z: FiniteDistribution,
}

#[derive(Serialize, Deserialize)]
struct ScenarioRepr {
    schema: u32,
    name: String,
    kind: ScenarioKind,
    seed: u64,
    metric_kind: MetricKind,
    spec: CompositionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_x: Option<FiniteDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_y: Option<FiniteDistribution>,
    p_z: FiniteDistribution,
}

impl TryFrom<ScenarioRepr> for Scenario {
    type Error = LabError;
    fn try_from(r: ScenarioRepr) -> Result<Self> {
        if r.schema != SCHEMA_VERSION {
            return Err(LabError::InvalidParams(format!("schema: unsupported version {}", r.schema)));
        }
        Scenario::new(r.name, r.kind, r.seed, r.metric_kind, r.spec, r.p_x, r.p_y, r.p_z)
    }
}

impl From<Scenario> for ScenarioRepr {
    fn from(s: Scenario) -> Self {
        ScenarioRepr {
            schema: SCHEMA_VERSION,
            name: s.name,
            kind: s.kind,
            seed: s.seed,
            metric_kind: s.metric_kind,
            spec: s.spec,
            p_x: s.p_x,
            p_y: s.p_y,
            p_z: s.p_z,
        }
    }
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        kind: ScenarioKind,
        seed: u64,
        metric_kind: MetricKind,
        spec: CompositionSpec,
        p_x: Option<FiniteDistribution>,
        p_y: Option<FiniteDistribution>,
        p_z: FiniteDistribution,
    ) -> Result<Self> {
        // Distributions read back from JSON carry their own copy of the space;
        // share the spec's handles so identity checks stay cheap.
        let rebase = |p: FiniteDistribution, s: &SpaceRef, what: &str| -> Result<FiniteDistribution> {
            ensure_same(p.space(), s, what)?;
            FiniteDistribution::from_probs(s.clone(), p.probs().to_vec())
        };
        let p_x = p_x.map(|p| rebase(p, spec.x_space(), "p_x")).transpose()?;
        let p_y = p_y.map(|p| rebase(p, spec.y_space(), "p_y")).transpose()?;
        let p_z = rebase(p_z, spec.z_space(), "p_z")?;
        if let (Some(px), Some(py)) = (&p_x, &p_y) {
            let induced = CompositionMap::Exact(spec.clone()).push(&product(px, py))?;
            let gap = tv_distance(&induced, &p_z)?;
            if gap > CONSISTENCY_TOL {
                return Err(LabError::InvalidParams(format!(
                    "p_z: inconsistent with the component laws (tv {gap:e})"
                )));
            }
        }
        Ok(Scenario {
            name,
            kind,
            seed,
            metric_kind,
            spec,
            p_x,
            p_y,
            p_z,
        })
    }

    /// Scenario whose composed law is induced by the given components.
    pub fn from_components(
        name: impl Into<String>,
        kind: ScenarioKind,
        seed: u64,
        spec: CompositionSpec,
        p_x: FiniteDistribution,
        p_y: FiniteDistribution,
    ) -> Result<Self> {
        ensure_same(p_x.space(), spec.x_space(), "p_x")?;
        ensure_same(p_y.space(), spec.y_space(), "p_y")?;
        let p_z = CompositionMap::Exact(spec.clone()).push(&product(&p_x, &p_y))?;
        Scenario::new(name.into(), kind, seed, MetricKind::Discrete, spec, Some(p_x), Some(p_y), p_z)
    }

    pub fn with_metric(mut self, kind: MetricKind) -> Self {
        self.metric_kind = kind;
        self
    }

    pub fn component(&self, which: Component) -> Option<&FiniteDistribution> {
        match which {
            Component::X => self.p_x.as_ref(),
            Component::Y => self.p_y.as_ref(),
        }
    }

    pub fn component_space(&self, which: Component) -> &SpaceRef {
        match which {
            Component::X => self.spec.x_space(),
            Component::Y => self.spec.y_space(),
        }
    }

    /// Copy of the scenario without the given component, plus the removed law.
    pub fn hide(&self, which: Component) -> Result<(Scenario, FiniteDistribution)> {
        let mut view = self.clone();
        let removed = match which {
            Component::X => view.p_x.take(),
            Component::Y => view.p_y.take(),
        };
        let removed = removed.ok_or_else(|| LabError::MissingFragment(format!("p_{} already hidden", which.as_str())))?;
        Ok((view, removed))
    }

    /// Same instance with the two component roles exchanged.
    pub fn transposed(&self) -> Scenario {
        Scenario {
            name: self.name.clone(),
            kind: self.kind,
            seed: self.seed,
            metric_kind: self.metric_kind,
            spec: self.spec.transposed(),
            p_x: self.p_y.clone(),
            p_y: self.p_x.clone(),
            p_z: self.p_z.clone(),
        }
    }
}

fn labeled(dim: usize, cap: u32, symbols: Vec<Vec<u32>>, labels: Vec<String>) -> Result<SpaceRef> {
    Ok(Arc::new(SymbolSpace::new(dim, cap, symbols)?.with_labels(labels)?))
}

fn law(field: &str, space: &SpaceRef, weights: Option<&Vec<f64>>, rng: Option<&mut ChaCha8Rng>) -> Result<FiniteDistribution> {
    let weights = match (weights, rng) {
        (Some(w), _) => w.clone(),
        (None, Some(rng)) => random_weights(rng, space.len()),
        (None, None) => vec![1.0; space.len()],
    };
    FiniteDistribution::new(space.clone(), weights).map_err(|e| LabError::InvalidParams(format!("{field}: {e}")))
}

/// Strictly positive random weights, bounded away from zero.
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

fn backgrounds(params: &ScenarioParams, dim: usize) -> Result<(Vec<Vec<u32>>, Vec<String>)> {
    let values = params.background_values.clone().unwrap_or_else(|| vec![1, 2]);
    if values.is_empty() {
        return Err(LabError::InvalidParams("background_values: must not be empty".into()));
    }
    for &v in &values {
        if v != 1 && v != 2 {
            return Err(LabError::InvalidParams(format!(
                "background_values: {v} not in {{1, 2}}"
            )));
        }
    }
    let mut sorted = values.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != values.len() {
        return Err(LabError::InvalidParams("background_values: duplicate value".into()));
    }
    Ok((
        values.iter().map(|&v| vec![v; dim]).collect(),
        values.iter().map(|v| format!("bg{v}")).collect(),
    ))
}

fn check_glyphs(glyphs: &[Vec<u32>], cells: usize, allow_blank: bool, allow_full: bool) -> Result<()> {
    if glyphs.is_empty() {
        return Err(LabError::InvalidParams("glyphs: must not be empty".into()));
    }
    for (i, g) in glyphs.iter().enumerate() {
        if g.len() != cells {
            return Err(LabError::InvalidParams(format!(
                "glyphs: glyph {i} has {} cells, expected {cells}",
                g.len()
            )));
        }
        if g.iter().any(|&v| v != 0 && v != 3) {
            return Err(LabError::InvalidParams(format!("glyphs: glyph {i} has a value outside {{0, 3}}")));
        }
        if !allow_full && g.iter().all(|&v| v == 3) {
            return Err(LabError::InvalidParams(format!(
                "glyphs: glyph {i} covers every cell, so the background is unrecoverable"
            )));
        }
        if !allow_blank && g.iter().all(|&v| v == 0) {
            return Err(LabError::InvalidParams(format!("glyphs: glyph {i} is blank")));
        }
        if glyphs[..i].contains(g) {
            return Err(LabError::InvalidParams(format!("glyphs: glyph {i} is a duplicate")));
        }
    }
    Ok(())
}

fn micro_mb(params: &ScenarioParams, mut rng: Option<&mut ChaCha8Rng>) -> Result<(CompositionSpec, FiniteDistribution, FiniteDistribution)> {
    const CELLS: usize = 9;
    let (bg_syms, bg_labels) = backgrounds(params, CELLS)?;
    let (glyphs, labels) = match &params.glyphs {
        Some(g) => (g.clone(), (0..g.len()).map(|i| format!("g{i}")).collect()),
        None => {
            let fam_name = params.glyph_family.as_deref().unwrap_or("a");
            let fam = micro_mb_family(fam_name)?;
            (
                fam.glyphs.clone(),
                fam.labels.iter().map(|l| format!("{fam_name}.{l}")).collect(),
            )
        }
    };
    check_glyphs(&glyphs, CELLS, true, false)?;
    let bg = labeled(CELLS, 3, bg_syms, bg_labels)?;
    let fg = labeled(CELLS, 3, glyphs, labels)?;
    let p_x = law("background_probs", &bg, params.background_probs.as_ref(), rng.as_deref_mut())?;
    let p_y = law("glyph_probs", &fg, params.glyph_probs.as_ref(), rng)?;
    let spec = overlay_labeled(bg, fg)?;
    Ok((spec, p_x, p_y))
}

fn micro_bb(params: &ScenarioParams, mut rng: Option<&mut ChaCha8Rng>) -> Result<(CompositionSpec, FiniteDistribution, FiniteDistribution)> {
    const SIDE: usize = 4;
    let (bg_syms, bg_labels) = backgrounds(params, SIDE * SIDE)?;
    let (glyphs, labels) = match &params.glyphs {
        Some(g) => (g.clone(), (0..g.len()).map(|i| format!("g{i}")).collect::<Vec<_>>()),
        None => {
            let name = params.glyph_family.as_deref().unwrap_or("1");
            let fam = micro_bb_class(name)?;
            (fam.glyphs.clone(), fam.labels.iter().map(|l| format!("{name}.{l}")).collect())
        }
    };
    check_glyphs(&glyphs, 4, false, true)?;
    let bg = labeled(SIDE * SIDE, 3, bg_syms, bg_labels)?;
    let p_x = law("background_probs", &bg, params.background_probs.as_ref(), rng.as_deref_mut())?;
    let glyph_w = match (&params.glyph_probs, rng.as_deref_mut()) {
        (Some(w), _) => w.clone(),
        (None, Some(r)) => random_weights(r, glyphs.len()),
        (None, None) => vec![1.0; glyphs.len()],
    };
    let quad_w = match (&params.quadrant_probs, rng) {
        (Some(w), _) => w.clone(),
        (None, Some(r)) => random_weights(r, 4),
        (None, None) => vec![1.0; 4],
    };
    if glyph_w.len() != glyphs.len() {
        return Err(LabError::InvalidParams(format!(
            "glyph_probs: expected {} entries, got {}",
            glyphs.len(),
            glyph_w.len()
        )));
    }
    if quad_w.len() != 4 {
        return Err(LabError::InvalidParams(format!(
            "quadrant_probs: expected 4 entries, got {}",
            quad_w.len()
        )));
    }
    let mut symbols = Vec::new();
    let mut fg_labels = Vec::new();
    let mut weights = Vec::new();
    const QUADS: [&str; 4] = ["nw", "ne", "sw", "se"];
    for (g, glyph) in glyphs.iter().enumerate() {
        for (q, qname) in QUADS.iter().enumerate() {
            let (r0, c0) = ((q / 2) * 2, (q % 2) * 2);
            let mut grid = vec![0u32; SIDE * SIDE];
            for dr in 0..2 {
                for dc in 0..2 {
                    grid[(r0 + dr) * SIDE + c0 + dc] = glyph[dr * 2 + dc];
                }
            }
            symbols.push(grid);
            fg_labels.push(format!("{}@{qname}", labels[g]));
            weights.push(glyph_w[g] * quad_w[q]);
        }
    }
    let fg = labeled(SIDE * SIDE, 3, symbols, fg_labels)?;
    let p_y = FiniteDistribution::new(fg.clone(), weights)
        .map_err(|e| LabError::InvalidParams(format!("glyph_probs/quadrant_probs: {e}")))?;
    Ok((overlay_labeled(bg, fg)?, p_x, p_y))
}

/// Overlay with composite labels `background+foreground`.
pub(crate) fn overlay_labeled(bg: SpaceRef, fg: SpaceRef) -> Result<CompositionSpec> {
    let plain = CompositionSpec::overlay(bg.clone(), fg.clone(), None)?;
    let z = plain.z_space();
    let mut labels = vec![String::new(); z.len()];
    for x in 0..bg.len() {
        for y in 0..fg.len() {
            let zi = plain.apply(x, y);
            if labels[zi].is_empty() {
                labels[zi] = format!("{}+{}", bg.label(x), fg.label(y));
            }
        }
    }
    let z = Arc::new((**z).clone().with_labels(labels)?);
    CompositionSpec::overlay(bg, fg, Some(z))
}

fn modadd(params: &ScenarioParams, rng: Option<&mut ChaCha8Rng>) -> Result<(CompositionSpec, FiniteDistribution, FiniteDistribution)> {
    let k = params.k.unwrap_or(3);
    if k == 0 {
        return Err(LabError::InvalidParams("k: must be at least 1".into()));
    }
    let spec = CompositionSpec::modadd(k)?;
    let mut rng = rng;
    let p_x = law("p_x", spec.x_space(), params.p_x.as_ref(), rng.as_deref_mut())?;
    let p_y = law("p_y", spec.y_space(), params.p_y.as_ref(), rng)?;
    Ok((spec, p_x, p_y))
}

fn custom(params: &ScenarioParams, rng: &mut ChaCha8Rng) -> Result<(CompositionSpec, FiniteDistribution, FiniteDistribution)> {
    let nx = params.x_size.unwrap_or(3);
    let ny = params.y_size.unwrap_or(2);
    if nx == 0 || ny == 0 {
        return Err(LabError::InvalidParams("x_size/y_size: must be positive".into()));
    }
    let nz = params.z_size.unwrap_or(nx * ny);
    if nz == 0 {
        return Err(LabError::InvalidParams("z_size: must be positive".into()));
    }
    let table = match &params.table {
        Some(t) => t.clone(),
        None => random_table(rng, nx, ny, nz),
    };
    let xs = Arc::new(SymbolSpace::range(nx)?);
    let ys = Arc::new(SymbolSpace::range(ny)?);
    let zs = Arc::new(SymbolSpace::range(nz)?);
    let spec = CompositionSpec::from_table(xs, ys, zs, table).map_err(|e| LabError::InvalidParams(format!("table: {e}")))?;
    // Custom scenarios draw unspecified laws at random unless told otherwise.
    let mut r = params.random_laws.unwrap_or(true).then_some(rng);
    let p_x = law("p_x", spec.x_space(), params.p_x.as_ref(), r.as_deref_mut())?;
    let p_y = law("p_y", spec.y_space(), params.p_y.as_ref(), r)?;
    Ok((spec, p_x, p_y))
}

/// Random table: a bijection when `nz = nx * ny`, otherwise each pair gets a
/// composite with every composite hit when `nz <= nx * ny`.
pub fn random_table(rng: &mut impl Rng, nx: usize, ny: usize, nz: usize) -> Vec<Vec<usize>> {
    let n = nx * ny;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut flat = vec![0; n];
    if nz >= n {
        let mut targets: Vec<usize> = (0..nz).collect();
        targets.shuffle(rng);
        for (k, &j) in order.iter().enumerate() {
            flat[j] = targets[k];
        }
    } else {
        for (k, &j) in order.iter().enumerate() {
            flat[j] = if k < nz { k } else { rng.gen_range(0..nz) };
        }
    }
    flat.chunks(ny).map(|r| r.to_vec()).collect()
}

/// Builds a scenario family member. All randomness is drawn from `seed`.
pub fn make_scenario(kind: ScenarioKind, params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_laws = params.random_laws.unwrap_or(false);
    let r = random_laws.then_some(&mut rng);
    let (spec, p_x, p_y) = match kind {
        ScenarioKind::MicroMb => micro_mb(params, r)?,
        ScenarioKind::MicroBb => micro_bb(params, r)?,
        ScenarioKind::Modadd => modadd(params, r)?,
        ScenarioKind::Custom => custom(params, &mut rng)?,
    };
    Scenario::from_components(kind.as_str(), kind, seed, spec, p_x, p_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::check_bijective;

    #[test]
    fn micro_mb_default_shape() {
        let s = make_scenario(ScenarioKind::MicroMb, &ScenarioParams::default(), 0).unwrap();
        assert_eq!(s.spec.z_space().len(), 10);
        assert!(check_bijective(&s.spec).bijective);
        for &p in s.p_z.probs() {
            assert!((p - 0.1).abs() < 1e-15);
        }
        assert_eq!(s.spec.z_space().label(0), "bg1+a.bar");
    }

    #[test]
    fn micro_mb_rejects_full_cover() {
        let params = ScenarioParams {
            glyphs: Some(vec![vec![3; 9]]),
            ..Default::default()
        };
        let err = make_scenario(ScenarioKind::MicroMb, &params, 0).unwrap_err();
        assert!(err.to_string().contains("glyphs"));
    }

    #[test]
    fn micro_mb_rejects_zero_background() {
        let params = ScenarioParams {
            background_values: Some(vec![0, 1]),
            ..Default::default()
        };
        let err = make_scenario(ScenarioKind::MicroMb, &params, 0).unwrap_err();
        assert!(err.to_string().contains("background_values"));
    }

    #[test]
    fn micro_bb_shape() {
        let s = make_scenario(ScenarioKind::MicroBb, &ScenarioParams::default(), 0).unwrap();
        assert_eq!(s.spec.y_space().len(), 20);
        assert_eq!(s.spec.z_space().len(), 40);
        assert!(check_bijective(&s.spec).bijective);
    }

    #[test]
    fn seed_determines_random_laws() {
        let params = ScenarioParams {
            random_laws: Some(true),
            ..Default::default()
        };
        let a = make_scenario(ScenarioKind::MicroMb, &params, 11).unwrap();
        let b = make_scenario(ScenarioKind::MicroMb, &params, 11).unwrap();
        let c = make_scenario(ScenarioKind::MicroMb, &params, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.p_y, c.p_y);
    }

    #[test]
    fn inconsistent_pz_rejected() {
        let s = make_scenario(ScenarioKind::Modadd, &ScenarioParams::default(), 0).unwrap();
        let bad = FiniteDistribution::new(s.p_z.space().clone(), vec![1.0, 0.0, 0.0]).unwrap();
        let r = Scenario::new(s.name.clone(), s.kind, 0, s.metric_kind, s.spec.clone(), s.p_x.clone(), s.p_y.clone(), bad);
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let s = make_scenario(ScenarioKind::MicroBb, &ScenarioParams::default(), 3).unwrap();
        let j = serde_json::to_string_pretty(&s).unwrap();
        let back: Scenario = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), j);
        assert!(j.contains("\"schema\": 1"));
    }

    #[test]
    fn unknown_param_is_named() {
        let err = serde_json::from_str::<ScenarioParams>(r#"{"glyph_famly":"a"}"#).unwrap_err();
        assert!(err.to_string().contains("glyph_famly"));
    }

    #[test]
    fn random_bijective_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_table(&mut rng, 4, 3, 12);
        let mut flat: Vec<usize> = t.concat();
        flat.sort_unstable();
        assert_eq!(flat, (0..12).collect::<Vec<_>>());
    }
}
