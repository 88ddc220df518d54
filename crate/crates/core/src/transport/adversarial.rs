//! The three adversarial losses, each evaluated as an exact W1 distance.

use serde::{Deserialize, Serialize};

use super::exact::wasserstein_exact;
use crate::compose::{CompositionMap, Component, DecompositionMap, Scenario};
use crate::error::{LabError, Result};
use crate::finitedist::{embed_on_union, ground_metric, product, same_space, FiniteDistribution, MetricKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialKind {
    /// Data component law vs candidate component law.
    Component(Component),
    /// Composed data vs composites generated from the candidate.
    Composition,
    /// Product of component laws vs decomposed data.
    Decomposition,
}

/// The fragments of a candidate solution a loss may read. Missing fields fall
/// back to the scenario where the scenario has them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Candidate<'a> {
    pub p_x: Option<&'a FiniteDistribution>,
    pub p_y: Option<&'a FiniteDistribution>,
    pub composition: Option<&'a CompositionMap>,
    pub decomposition: Option<&'a DecompositionMap>,
}

impl<'a> Candidate<'a> {
    pub fn component(&self, which: Component) -> Option<&'a FiniteDistribution> {
        match which {
            Component::X => self.p_x,
            Component::Y => self.p_y,
        }
    }
}

/// W1 between two laws under a built-in metric, embedding both on the union
/// of their spaces when the spaces differ.
pub fn w1(p: &FiniteDistribution, q: &FiniteDistribution, metric: MetricKind) -> Result<f64> {
    let (p, q) = embed_on_union(p, q)?;
    let cost = ground_metric(p.space(), metric);
    Ok(wasserstein_exact(&p, &q, &cost)?.value)
}

fn law<'a>(
    which: Component,
    scenario: &'a Scenario,
    cand: &Candidate<'a>,
) -> Result<&'a FiniteDistribution> {
    cand.component(which)
        .or_else(|| scenario.component(which))
        .ok_or_else(|| LabError::MissingFragment(format!("p_{}", which.as_str())))
}

/// Exact adversarial loss of `cand` against `scenario`.
pub fn adversarial_loss(
    kind: AdversarialKind,
    scenario: &Scenario,
    cand: &Candidate<'_>,
    metric: MetricKind,
) -> Result<f64> {
    match kind {
        AdversarialKind::Component(which) => {
            let data = scenario
                .component(which)
                .ok_or_else(|| LabError::MissingFragment(format!("data law p_{}", which.as_str())))?;
            let model = cand
                .component(which)
                .ok_or_else(|| LabError::MissingFragment(format!("candidate p_{}", which.as_str())))?;
            w1(data, model, metric)
        }
        AdversarialKind::Composition => {
            let p_x = law(Component::X, scenario, cand)?;
            let p_y = law(Component::Y, scenario, cand)?;
            let exact;
            let map = match cand.composition {
                Some(m) => m,
                None => {
                    exact = CompositionMap::Exact(scenario.spec.clone());
                    &exact
                }
            };
            if !same_space(p_x.space(), map.x_space()) || !same_space(p_y.space(), map.y_space()) {
                return Err(LabError::SpaceMismatch("component laws vs composition".into()));
            }
            if !same_space(map.z_space(), scenario.p_z.space()) {
                return Err(LabError::SpaceMismatch("composition output vs p_z".into()));
            }
            let generated = map.push(&product(p_x, p_y))?;
            w1(&scenario.p_z, &generated, metric)
        }
        AdversarialKind::Decomposition => {
            let d = cand
                .decomposition
                .ok_or_else(|| LabError::MissingFragment("decomposition".into()))?;
            let p_x = law(Component::X, scenario, cand)?;
            let p_y = law(Component::Y, scenario, cand)?;
            if !same_space(p_x.space(), d.x_space()) || !same_space(p_y.space(), d.y_space()) {
                return Err(LabError::SpaceMismatch("component laws vs decomposition".into()));
            }
            let decomposed = d.push(&scenario.p_z)?;
            w1(&product(p_x, p_y), &decomposed, metric)
        }
    }
}
