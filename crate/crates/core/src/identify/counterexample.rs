//! Constructions showing that parts of a solution are not determined by the
//! loss alone.

use std::sync::Arc;

use serde::Serialize;

use crate::compose::{invert_composition, CompositionMap, CompositionSpec, DecompositionMap, Rule, Scenario};
use crate::error::{LabError, Result};
use crate::finitedist::{tv_distance_by_symbol, FiniteDistribution, SymbolSpace};
use crate::tasks::{total_loss, Fragment, LossBreakdown, Solution, TaskConfig};

/// Largest allowed deviation of the background law from its flipped copy.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct PhaseFlipReport {
    /// `t[x]`: index of the background with values 1 and 2 exchanged.
    pub involution: Vec<usize>,
    pub loss_a: LossBreakdown,
    pub loss_b: LossBreakdown,
    pub supported: usize,
    /// Share of supported composites the two decompositions map differently.
    pub disagreement_fraction: f64,
    /// `d_b(c_b(x, y)) = (x, y)` for every pair with positive mass.
    pub cycle_consistent_b: bool,
}

fn flip_value(v: u32) -> u32 {
    match v {
        1 => 2,
        2 => 1,
        v => v,
    }
}

fn require<'a>(law: Option<&'a FiniteDistribution>, what: &str) -> Result<&'a FiniteDistribution> {
    law.ok_or_else(|| LabError::MissingFragment(what.to_string()))
}

/// Two solutions with the same loss: the true pair `(c, d)`, and the pair in
/// which the composition reads an inverted background and the decomposition
/// emits one. Needs a background law invariant under the value swap 1 <-> 2.
pub fn phase_flip_counterexample(scenario: &Scenario) -> Result<(Solution, Solution, PhaseFlipReport)> {
    let p_x = require(scenario.p_x.as_ref(), "p_x")?;
    let p_y = require(scenario.p_y.as_ref(), "p_y")?;
    let xs = scenario.spec.x_space();
    let t: Vec<usize> = (0..xs.len())
        .map(|i| {
            let flipped: Vec<u32> = xs.symbol(i).iter().map(|&v| flip_value(v)).collect();
            xs.index_of(&flipped).ok_or_else(|| {
                LabError::PreconditionFailed(format!(
                    "swapping values 1 and 2 takes background {} outside the background space",
                    xs.label(i)
                ))
            })
        })
        .collect::<Result<_>>()?;
    let deviation = (0..xs.len()).map(|i| (p_x.prob(i) - p_x.prob(t[i])).abs()).fold(0.0, f64::max);
    if deviation > SYMMETRY_TOL {
        return Err(LabError::SymmetryAbsent { deviation });
    }
    let inverse = invert_composition(&scenario.spec)?;
    let c_b = scenario.spec.precompose_x(&t)?;
    let d_b = inverse.map_x(&t)?;

    let cfg = TaskConfig::new(2);
    let cfg = TaskConfig {
        metric_kind: scenario.metric_kind,
        ..cfg
    };
    let build = |c: CompositionSpec, d: DecompositionMap| Solution {
        p_x: Some(Fragment::given(p_x.clone())),
        p_y: Some(Fragment::given(p_y.clone())),
        composition: Some(Fragment::constructed(CompositionMap::Exact(c))),
        decomposition: Some(Fragment::constructed(d)),
    };
    let sol_a = build(scenario.spec.clone(), inverse.clone());
    let sol_b = build(c_b.clone(), d_b.clone());
    let loss_a = total_loss(scenario, &sol_a, &cfg)?;
    let loss_b = total_loss(scenario, &sol_b, &cfg)?;

    let support = scenario.p_z.support();
    let differ = support.iter().filter(|&&z| inverse.point_of(z) != d_b.point_of(z)).count();
    let ny = scenario.spec.y_space().len();
    let cycle_ok = (0..scenario.spec.n_pairs())
        .filter(|&j| p_x.prob(j / ny) * p_y.prob(j % ny) > 0.0)
        .all(|j| d_b.point_of(c_b.apply_joint(j)) == Some((j / ny, j % ny)));
    let report = PhaseFlipReport {
        involution: t,
        loss_a,
        loss_b,
        supported: support.len(),
        disagreement_fraction: if support.is_empty() { 0.0 } else { differ as f64 / support.len() as f64 },
        cycle_consistent_b: cycle_ok,
    };
    Ok((sol_a, sol_b, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialReport {
    /// Background index carrying the candidate's point mass.
    pub background: usize,
    pub losses: LossBreakdown,
    /// TV, matched by symbol, between the replayed composites and the true
    /// foreground law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_foreground: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_background: Option<f64>,
}

/// A solution that ignores the background: foregrounds are the composites
/// themselves, the background law is a point mass, and the decomposition
/// sends `z` to `(x0, z)`. Overlay leaves any symbol without zero
/// coordinates unchanged, so this reproduces `p_z` exactly.
pub fn trivial_solution_counterexample(scenario: &Scenario) -> Result<(Solution, TrivialReport)> {
    if *scenario.spec.rule() != Rule::Overlay {
        return Err(LabError::PreconditionFailed("the trivial solution needs an overlay composition".into()));
    }
    let zs = scenario.spec.z_space();
    if let Some(z) = (0..zs.len()).find(|&z| zs.symbol(z).contains(&0)) {
        return Err(LabError::PreconditionFailed(format!(
            "composite {} has a zero coordinate, so replaying it as a foreground would expose the background",
            zs.label(z)
        )));
    }
    let xs = scenario.spec.x_space();
    let fg = Arc::new(match zs.labels() {
        Some(l) => SymbolSpace::new(zs.dim(), zs.value_cap(), zs.symbols().to_vec())?.with_labels(l.to_vec())?,
        None => SymbolSpace::new(zs.dim(), zs.value_cap(), zs.symbols().to_vec())?,
    });
    let comp = CompositionSpec::overlay(xs.clone(), fg.clone(), Some(zs.clone()))?;
    let x0 = 0;
    let d = DecompositionMap::deterministic(zs.clone(), xs.clone(), fg.clone(), (0..zs.len()).map(|z| (x0, z)).collect())?;
    let p_fg = FiniteDistribution::from_probs(fg, scenario.p_z.probs().to_vec())?;
    let p_bg = FiniteDistribution::point_mass(xs.clone(), x0)?;
    let cfg = TaskConfig {
        metric_kind: scenario.metric_kind,
        ..TaskConfig::new(4)
    };
    let sol = Solution {
        p_x: Some(Fragment::constructed(p_bg.clone())),
        p_y: Some(Fragment::constructed(p_fg.clone())),
        composition: Some(Fragment::constructed(CompositionMap::Exact(comp))),
        decomposition: Some(Fragment::constructed(d)),
    };
    let losses = total_loss(scenario, &sol, &cfg)?;
    let report = TrivialReport {
        background: x0,
        losses,
        tv_foreground: scenario.p_y.as_ref().map(|t| tv_distance_by_symbol(&p_fg, t)),
        tv_background: scenario.p_x.as_ref().map(|t| tv_distance_by_symbol(&p_bg, t)),
    };
    Ok((sol, report))
}
