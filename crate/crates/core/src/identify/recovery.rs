use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::resolving::{padded, rank_of, ResolvingMatrix, RANK_REL_TOL};
use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, tv_distance, FiniteDistribution};
use crate::simplex::project_to_simplex;

/// Negative entries no larger than this are clamped to zero instead of
/// triggering a simplex projection.
const CLAMP_TOL: f64 = 1e-12;
/// Residual bound for an alternative to count as reproducing `p_z`.
const ALT_RESIDUAL: f64 = 1e-9;
/// Minimum pairwise TV between reported alternatives.
const ALT_SEPARATION: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    pub rank: usize,
    pub n_cols: usize,
    pub full_column_rank: bool,
    pub singular_values: Vec<f64>,
    /// Least-squares solution mapped into the simplex. When the matrix is rank
    /// deficient this is the minimum-norm point, one of many.
    pub recovered_p_y: Option<FiniteDistribution>,
    /// `||R p - p_z||_1` at the recovered point.
    pub residual: f64,
    /// True when the raw solution left the simplex and had to be projected.
    pub projected: bool,
    pub pruned_x: Vec<usize>,
    /// Distinct laws that all reproduce `p_z`; present only without full rank.
    pub alternatives: Option<Vec<FiniteDistribution>>,
}

fn l1_residual(r: &ResolvingMatrix, p: &[f64], p_z: &[f64]) -> f64 {
    r.apply(p).iter().zip(p_z).map(|(a, b)| (a - b).abs()).sum()
}

fn into_simplex(raw: Vec<f64>) -> (Vec<f64>, bool) {
    if raw.iter().all(|&v| v >= -CLAMP_TOL) {
        let mut p: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() <= 1e-9 {
            p.iter_mut().for_each(|v| *v /= s);
            return (p, false);
        }
        return (project_to_simplex(&p), true);
    }
    (project_to_simplex(&raw), true)
}

/// Recovers the hidden component from composed data by least squares on the
/// resolving matrix, `p = (R^T R)^{-1} R^T p_z`, solved through the SVD.
///
/// Without full column rank the result is not unique; the error carries a
/// report listing alternatives that reproduce `p_z` equally well.
pub fn recover_component_closed_form(p_z: &FiniteDistribution, r: &ResolvingMatrix) -> Result<IdentifiabilityReport> {
    ensure_same(p_z.space(), r.z_space(), "p_z vs resolving matrix")?;
    let m = padded(&r.to_matrix());
    let mut b = DVector::zeros(m.nrows());
    for (i, &v) in p_z.probs().iter().enumerate() {
        b[i] = v;
    }
    let svd = m.clone().svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let rank = rank_of(&sv, RANK_REL_TOL);
    let smax = sv.first().copied().unwrap_or(0.0);
    let raw = svd
        .solve(&b, RANK_REL_TOL * smax)
        .map_err(|e| LabError::SolverFailure(e.to_string()))?;
    let (p, projected) = into_simplex(raw.iter().copied().collect());
    let residual = l1_residual(r, &p, p_z.probs());
    let recovered = FiniteDistribution::from_probs(r.y_space().clone(), p.clone())?;

    let mut report = IdentifiabilityReport {
        rank,
        n_cols: r.n_cols,
        full_column_rank: rank == r.n_cols,
        singular_values: sv,
        recovered_p_y: Some(recovered),
        residual,
        projected,
        pruned_x: r.pruned_x.clone(),
        alternatives: None,
    };
    if report.full_column_rank {
        return Ok(report);
    }
    report.alternatives = Some(alternatives(r, &m, &p, p_z)?);
    Err(LabError::RankDeficient {
        rank,
        cols: r.n_cols,
        report: Box::new(report),
    })
}

/// Moves from `base` along null-space directions of `m`, keeping only points
/// that stay in the simplex, reproduce `p_z` and are pairwise distinct.
fn alternatives(
    r: &ResolvingMatrix,
    m: &DMatrix<f64>,
    base: &[f64],
    p_z: &FiniteDistribution,
) -> Result<Vec<FiniteDistribution>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let n = r.n_cols;
    let mut found: Vec<FiniteDistribution> = Vec::new();
    let consider = |p: Vec<f64>, found: &mut Vec<FiniteDistribution>| -> Result<()> {
        if l1_residual(r, &p, p_z.probs()) > ALT_RESIDUAL {
            return Ok(());
        }
        let d = FiniteDistribution::new(r.y_space().clone(), p)?;
        for f in found.iter() {
            if tv_distance(f, &d)? < ALT_SEPARATION {
                return Ok(());
            }
        }
        found.push(d);
        Ok(())
    };
    consider(base.to_vec(), &mut found)?;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANK_REL_TOL * smax {
            continue;
        }
        let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
        // Directions must preserve total mass.
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let vmax = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if vmax < 1e-9 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vmax);
        for sign in [1.0, -1.0] {
            let t = (0..n)
                .filter(|&i| sign * v[i] < 0.0)
                .map(|i| base[i] / (-sign * v[i]))
                .fold(f64::INFINITY, f64::min);
            if !t.is_finite() || t <= 0.0 {
                continue;
            }
            let p: Vec<f64> = (0..n).map(|i| (base[i] + sign * 0.5 * t * v[i]).max(0.0)).collect();
            consider(p, &mut found)?;
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::compose::CompositionSpec;
    use crate::finitedist::{product, pushforward, SpaceRef, SymbolSpace};
    use crate::identify::resolving_matrix;

    fn sp(n: usize) -> SpaceRef {
        Arc::new(SymbolSpace::range(n).unwrap())
    }

    fn composed(c: &CompositionSpec, p_x: &FiniteDistribution, p_y: &FiniteDistribution) -> FiniteDistribution {
        pushforward(&product(p_x, p_y), c.z_space(), |j| Some(c.apply_joint(j))).unwrap()
    }

    #[test]
    fn recovers_under_full_rank() {
        let c = CompositionSpec::affine(sp(3), sp(4), 1, 3, None).unwrap();
        let p_x = FiniteDistribution::new(sp(3), vec![0.2, 0.3, 0.5]).unwrap();
        let p_y = FiniteDistribution::new(sp(4), vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let r = resolving_matrix(&p_x, &c).unwrap();
        let rep = recover_component_closed_form(&composed(&c, &p_x, &p_y), &r).unwrap();
        assert!(rep.full_column_rank && !rep.projected);
        let got = rep.recovered_p_y.unwrap();
        for (a, b) in got.probs().iter().zip(p_y.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn modadd_uniform_has_alternatives() {
        let c = CompositionSpec::modadd(3).unwrap();
        let u = FiniteDistribution::<f64>::uniform(sp(3));
        let r = resolving_matrix(&u, &c).unwrap();
        let p_z = composed(&c, &u, &u);
        match recover_component_closed_form(&p_z, &r) {
            Err(LabError::RankDeficient { rank, report, .. }) => {
                assert_eq!(rank, 1);
                let alts = report.alternatives.unwrap();
                assert!(alts.len() >= 2);
                for a in &alts {
                    assert!(l1_residual(&r, a.probs(), p_z.probs()) < 1e-9);
                }
                assert!(tv_distance(&alts[0], &alts[1]).unwrap() >= 0.01);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
