use serde::{Deserialize, Serialize};

use crate::compose::{cycle_losses_map, CompositionMap, CycleCosts, DecompositionMap, Scenario};
use crate::error::{LabError, Result};
use crate::finitedist::FiniteDistribution;
use crate::transport::{adversarial_loss, AdversarialKind, Candidate};

use super::config::TaskConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Copied unchanged from the scenario.
    Given,
    /// Produced by an optimizer or a closed-form solve.
    Optimized,
    /// Built by hand, as in the counterexamples.
    Constructed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fragment<T> {
    pub value: T,
    pub provenance: Provenance,
}

impl<T> Fragment<T> {
    pub fn given(value: T) -> Self {
        Fragment { value, provenance: Provenance::Given }
    }
    pub fn optimized(value: T) -> Self {
        Fragment { value, provenance: Provenance::Optimized }
    }
    pub fn constructed(value: T) -> Self {
        Fragment { value, provenance: Provenance::Constructed }
    }
}

fn serialize_map<S: serde::Serializer>(
    m: &Option<Fragment<CompositionMap>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct View<'a> {
        #[serde(flatten)]
        body: MapBody<'a>,
        provenance: Provenance,
    }
    #[derive(Serialize)]
    #[serde(tag = "kind", rename_all = "lowercase")]
    enum MapBody<'a> {
        Exact { spec: &'a crate::compose::CompositionSpec },
        Stochastic { rows: Vec<&'a [f64]> },
    }
    m.as_ref()
        .map(|f| View {
            body: match &f.value {
                CompositionMap::Exact(spec) => MapBody::Exact { spec },
                CompositionMap::Stochastic(sc) => MapBody::Stochastic {
                    rows: sc.rows().chunks(sc.z_space().len()).collect(),
                },
            },
            provenance: f.provenance,
        })
        .serialize(s)
}

/// Candidate values for the unknowns of a task, each tagged with where it
/// came from.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Solution {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_x: Option<Fragment<FiniteDistribution>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_y: Option<Fragment<FiniteDistribution>>,
    #[serde(serialize_with = "serialize_map", skip_serializing_if = "Option::is_none")]
    pub composition: Option<Fragment<CompositionMap>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Fragment<DecompositionMap>>,
}

impl Solution {
    pub fn candidate(&self) -> Candidate<'_> {
        Candidate {
            p_x: self.p_x.as_ref().map(|f| &f.value),
            p_y: self.p_y.as_ref().map(|f| &f.value),
            composition: self.composition.as_ref().map(|f| &f.value),
            decomposition: self.decomposition.as_ref().map(|f| &f.value),
        }
    }

    pub fn decomposition(&self) -> Option<&DecompositionMap> {
        self.decomposition.as_ref().map(|f| &f.value)
    }
}

/// The four loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_c: f64,
    pub l_d: f64,
    pub c_cyc: f64,
    pub d_cyc: f64,
    pub alpha: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l_c: f64, l_d: f64, c_cyc: f64, d_cyc: f64, alpha: f64) -> Self {
        LossBreakdown {
            l_c,
            l_d,
            c_cyc,
            d_cyc,
            alpha,
            total: l_c + l_d + alpha * (c_cyc + d_cyc),
        }
    }
}

/// `l_c + l_d + alpha (c_cyc + d_cyc)`, exactly. Solution fragments override
/// the scenario's; whatever the scenario lacks must be supplied.
pub fn total_loss(scenario: &Scenario, sol: &Solution, cfg: &TaskConfig) -> Result<LossBreakdown> {
    let cand = sol.candidate();
    let metric = cfg.metric_kind;
    let missing = |what: &str| LabError::MissingFragment(what.to_string());
    let p_x = cand.p_x.or(scenario.p_x.as_ref()).ok_or_else(|| missing("p_x"))?;
    let p_y = cand.p_y.or(scenario.p_y.as_ref()).ok_or_else(|| missing("p_y"))?;
    let d = cand.decomposition.ok_or_else(|| missing("decomposition"))?;
    let exact;
    let c = match cand.composition {
        Some(c) => c,
        None => {
            exact = CompositionMap::Exact(scenario.spec.clone());
            &exact
        }
    };
    let l_c = adversarial_loss(AdversarialKind::Composition, scenario, &cand, metric)?;
    let l_d = adversarial_loss(AdversarialKind::Decomposition, scenario, &cand, metric)?;
    let cyc = cycle_losses_map(c, d, p_x, p_y, &scenario.p_z, &CycleCosts::for_map(c, metric))?;
    Ok(LossBreakdown::new(l_c, l_d, cyc.c_cyc, cyc.d_cyc, cfg.alpha))
}
