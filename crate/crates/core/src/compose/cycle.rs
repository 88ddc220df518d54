use serde::{Deserialize, Serialize};

use super::maps::{CompositionMap, DecompositionMap};
use super::spec::CompositionSpec;
use crate::error::Result;
use crate::finitedist::{ensure_same, ground_metric, CostMatrix, FiniteDistribution, MetricKind, SpaceRef};

/// Ground costs on the two component spaces and on the composite space.
#[derive(Debug, Clone)]
pub struct CycleCosts {
    pub x: CostMatrix,
    pub y: CostMatrix,
    pub z: CostMatrix,
}

impl CycleCosts {
    pub fn new(x_space: &SpaceRef, y_space: &SpaceRef, z_space: &SpaceRef, kind: MetricKind) -> Self {
        CycleCosts {
            x: ground_metric(x_space, kind),
            y: ground_metric(y_space, kind),
            z: ground_metric(z_space, kind),
        }
    }

    pub fn for_map(map: &CompositionMap, kind: MetricKind) -> Self {
        Self::new(map.x_space(), map.y_space(), map.z_space(), kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleLosses {
    /// Expected component reconstruction error of `d(c(x, y))`.
    pub c_cyc: f64,
    /// Expected composite reconstruction error of `c(d(z))`.
    pub d_cyc: f64,
}

/// Both cycle losses for a deterministic composition.
pub fn cycle_losses(
    spec: &CompositionSpec,
    d: &DecompositionMap,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    costs: &CycleCosts,
) -> Result<CycleLosses> {
    cycle_losses_map(&CompositionMap::Exact(spec.clone()), d, p_x, p_y, p_z, costs)
}

/// Cycle losses for a possibly stochastic composition and decomposition.
///
/// Sums run over x, then y, then the decomposition row, then the composition
/// row, in increasing index order.
pub fn cycle_losses_map(
    c: &CompositionMap,
    d: &DecompositionMap,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    costs: &CycleCosts,
) -> Result<CycleLosses> {
    ensure_same(p_x.space(), c.x_space(), "p_x vs composition")?;
    ensure_same(p_y.space(), c.y_space(), "p_y vs composition")?;
    ensure_same(p_z.space(), c.z_space(), "p_z vs composition")?;
    ensure_same(d.z_space(), c.z_space(), "decomposition input")?;
    ensure_same(d.x_space(), c.x_space(), "decomposition x output")?;
    ensure_same(d.y_space(), c.y_space(), "decomposition y output")?;
    ensure_same(costs.x.rows(), c.x_space(), "x cost")?;
    ensure_same(costs.y.rows(), c.y_space(), "y cost")?;
    ensure_same(costs.z.rows(), c.z_space(), "z cost")?;

    let ny = c.y_space().len();
    let mut c_cyc = 0.0;
    for x in 0..c.x_space().len() {
        let px = p_x.prob(x);
        if px == 0.0 {
            continue;
        }
        for y in 0..ny {
            let w = px * p_y.prob(y);
            if w == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            c.for_each_image(x * ny + y, |z, cw| {
                d.for_each_in_row(z, |j, dw| {
                    let (x2, y2) = (j / ny, j % ny);
                    inner += cw * dw * (costs.x.get(x2, x) + costs.y.get(y2, y));
                });
            });
            c_cyc += w * inner;
        }
    }

    let mut d_cyc = 0.0;
    for z in 0..c.z_space().len() {
        let pz = p_z.prob(z);
        if pz == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        d.for_each_in_row(z, |j, dw| {
            c.for_each_image(j, |z2, cw| inner += dw * cw * costs.z.get(z2, z));
        });
        d_cyc += pz * inner;
    }
    Ok(CycleLosses { c_cyc, d_cyc })
}
