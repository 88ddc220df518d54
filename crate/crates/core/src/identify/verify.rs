use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recovery::recover_component_closed_form;
use super::resolving::{column_rank, resolving_matrix, RANK_REL_TOL};
use crate::compose::{check_bijective, invert_composition, random_table, random_weights, Component, CompositionSpec, DecompositionMap, Scenario};
use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, ground_metric, tv_distance, FiniteDistribution, MetricKind, SymbolSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub max_x: usize,
    pub max_y: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds { max_x: 8, max_y: 8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaTrial {
    pub trial: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub rank: usize,
    pub full_rank: bool,
    pub min_singular_value: f64,
    pub pruned_x: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub n_trials: usize,
    pub full_rank_count: usize,
    pub min_singular_value: f64,
    pub trials: Vec<LemmaTrial>,
}

impl LemmaReport {
    pub fn all_full_rank(&self) -> bool {
        self.full_rank_count == self.n_trials
    }
}

/// Rank check of one bijective composition. Refuses anything that is not a
/// bijection, since the lemma says nothing about those.
pub fn check_lemma_instance(spec: &CompositionSpec, p_x: &FiniteDistribution) -> Result<LemmaTrial> {
    if let Some(w) = check_bijective(spec).witness {
        return Err(LabError::NotBijective(w));
    }
    let r = resolving_matrix(p_x, spec)?;
    let sv = r.singular_values();
    let rank = column_rank(&r, RANK_REL_TOL);
    Ok(LemmaTrial {
        trial: 0,
        x_size: spec.x_space().len(),
        y_size: spec.y_space().len(),
        rank,
        full_rank: rank == r.n_cols,
        min_singular_value: sv.last().copied().unwrap_or(0.0),
        pruned_x: r.pruned_x,
    })
}

/// Random bijective composition with a strictly positive `p_x`, drawn from
/// the given stream.
pub fn random_bijective_instance(rng: &mut impl Rng, bounds: SizeBounds) -> Result<(CompositionSpec, FiniteDistribution)> {
    let nx = rng.gen_range(1..=bounds.max_x.max(1));
    let ny = rng.gen_range(1..=bounds.max_y.max(1));
    let xs = Arc::new(SymbolSpace::range(nx)?);
    let ys = Arc::new(SymbolSpace::range(ny)?);
    let zs = Arc::new(SymbolSpace::range(nx * ny)?);
    let table = random_table(rng, nx, ny, nx * ny);
    let spec = CompositionSpec::from_table(xs.clone(), ys, zs, table)?;
    let p_x = FiniteDistribution::new(xs, random_weights(rng, nx))?;
    Ok((spec, p_x))
}

/// Runs `trials` independent rank checks. Trial `k` draws from stream `k` of
/// a generator seeded with `seed`, so results do not depend on scheduling.
pub fn verify_lemma_bijective_rank(trials: usize, bounds: SizeBounds, seed: u64) -> Result<LemmaReport> {
    if trials == 0 {
        return Err(LabError::InvalidParams("trials: must be at least 1".into()));
    }
    let results: Result<Vec<LemmaTrial>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (spec, p_x) = random_bijective_instance(&mut rng, bounds)?;
            let mut t = check_lemma_instance(&spec, &p_x)?;
            t.trial = k;
            Ok(t)
        })
        .collect();
    let trials_out = results?;
    Ok(LemmaReport {
        seed,
        n_trials: trials,
        full_rank_count: trials_out.iter().filter(|t| t.full_rank).count(),
        min_singular_value: trials_out.iter().map(|t| t.min_singular_value).fold(f64::INFINITY, f64::min),
        trials: trials_out,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Report {
    pub hidden: Component,
    pub rank: usize,
    pub n_cols: usize,
    pub hypothesis_met: bool,
    /// l1 distance between the recovered and true hidden law, when both exist.
    pub recovery_error: Option<f64>,
    pub residual: Option<f64>,
    pub passed: bool,
    pub message: String,
}

/// Recovery tolerance used when the theorem's hypothesis holds.
pub const THEOREM1_TOL: f64 = 1e-9;

/// Checks unique recovery of the `hidden` component. When the resolving
/// matrix lacks full column rank the hypothesis is reported as unmet and
/// nothing is asserted.
pub fn verify_theorem1(scenario: &Scenario, hidden: Component) -> Result<Theorem1Report> {
    let oriented = match hidden {
        Component::Y => scenario.clone(),
        Component::X => scenario.transposed(),
    };
    let known = oriented
        .p_x
        .as_ref()
        .ok_or_else(|| LabError::MissingFragment(format!("p_{}", hidden.other().as_str())))?;
    let r = resolving_matrix(known, &oriented.spec)?;
    let truth = oriented.p_y.as_ref();
    match recover_component_closed_form(&oriented.p_z, &r) {
        Ok(rep) => {
            let rec = rep.recovered_p_y.as_ref().expect("full-rank recovery yields a law");
            let err = truth
                .map(|t| -> Result<f64> { Ok(2.0 * tv_distance(t, rec)?) })
                .transpose()?;
            let passed = err.is_none_or(|e| e <= THEOREM1_TOL) && rep.residual <= THEOREM1_TOL;
            Ok(Theorem1Report {
                hidden,
                rank: rep.rank,
                n_cols: rep.n_cols,
                hypothesis_met: true,
                recovery_error: err,
                residual: Some(rep.residual),
                passed,
                message: match err {
                    Some(e) if passed => format!("full rank {}; recovered p_{} within l1 {e:.3e}", rep.rank, hidden.as_str()),
                    Some(e) => format!("full rank {} but recovery error {e:.3e} exceeds tolerance", rep.rank),
                    None => format!("full rank {}; recovery residual {:.3e}", rep.rank, rep.residual),
                },
            })
        }
        Err(LabError::RankDeficient { rank, cols, .. }) => Ok(Theorem1Report {
            hidden,
            rank,
            n_cols: cols,
            hypothesis_met: false,
            recovery_error: None,
            residual: None,
            passed: true,
            message: format!("hypothesis not met: rank {rank} < {cols}"),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Report {
    pub objective: f64,
    pub x_term: f64,
    pub y_term: f64,
    pub z_term: f64,
    pub tol: f64,
    /// `d` equals the exact inverse on every composite with positive mass.
    pub equal_on_support: bool,
    /// Supported composites where `d` departs from the inverse.
    pub mismatched: Vec<usize>,
    /// Whether `objective <= tol` agrees with `equal_on_support`.
    pub consistent: bool,
}

/// Per-composite contribution to the three-term cycle objective when `z` is
/// decomposed to pair `j`. Only meaningful for bijective `spec`, where every
/// pair has exactly one composite.
pub(crate) struct Theorem2Costs {
    cx: Vec<f64>,
    cy: Vec<f64>,
    cz: Vec<f64>,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl Theorem2Costs {
    pub(crate) fn new(spec: &CompositionSpec) -> Self {
        let g = |s| ground_metric::<f64>(s, MetricKind::L1).as_slice().to_vec();
        Theorem2Costs {
            cx: g(spec.x_space()),
            cy: g(spec.y_space()),
            cz: g(spec.z_space()),
            nx: spec.x_space().len(),
            ny: spec.y_space().len(),
            nz: spec.z_space().len(),
        }
    }

    /// `(x-term, y-term, z-term)` rates for composite `z` with true pair
    /// `(x, y)` sent to pair `j`, per unit of mass.
    pub(crate) fn terms(&self, spec: &CompositionSpec, z: usize, truth: (usize, usize), j: usize) -> (f64, f64, f64) {
        let (x2, y2) = (j / self.ny, j % self.ny);
        debug_assert!(x2 < self.nx);
        (
            self.cx[x2 * self.nx + truth.0],
            self.cy[y2 * self.ny + truth.1],
            self.cz[spec.apply_joint(j) * self.nz + z],
        )
    }
}

/// Evaluates the cycle objective with l1 ground costs:
/// `E[|d(c(X,Y))_x - X|] + E[|d(c(X,Y))_y - Y|] + E[|c(d(Z)) - Z|]`,
/// and checks that it vanishes exactly when `d` inverts `spec` on the support
/// of `p_z`.
pub fn verify_theorem2(
    spec: &CompositionSpec,
    d: &DecompositionMap,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    tol: f64,
) -> Result<Theorem2Report> {
    let inverse = invert_composition(spec)?;
    ensure_same(p_x.space(), spec.x_space(), "p_x")?;
    ensure_same(p_y.space(), spec.y_space(), "p_y")?;
    ensure_same(p_z.space(), spec.z_space(), "p_z")?;
    ensure_same(d.z_space(), spec.z_space(), "decomposition input")?;
    ensure_same(d.x_space(), spec.x_space(), "decomposition x output")?;
    ensure_same(d.y_space(), spec.y_space(), "decomposition y output")?;
    let costs = Theorem2Costs::new(spec);
    let ny = spec.y_space().len();
    let (mut xt, mut yt, mut zt) = (0.0, 0.0, 0.0);
    // Component terms: expectation over (X, Y) of the round trip through c, d.
    for j0 in 0..spec.n_pairs() {
        let w = p_x.prob(j0 / ny) * p_y.prob(j0 % ny);
        if w == 0.0 {
            continue;
        }
        let z = spec.apply_joint(j0);
        d.for_each_in_row(z, |j, dw| {
            let (a, b, _) = costs.terms(spec, z, (j0 / ny, j0 % ny), j);
            xt += w * dw * a;
            yt += w * dw * b;
        });
    }
    // Composite term: expectation over Z of the round trip through d, c.
    for z in 0..spec.z_space().len() {
        let pz = p_z.prob(z);
        if pz == 0.0 {
            continue;
        }
        let truth = inverse.point_of(z).expect("inverse is deterministic");
        d.for_each_in_row(z, |j, dw| zt += pz * dw * costs.terms(spec, z, truth, j).2);
    }
    let mismatched: Vec<usize> = (0..spec.z_space().len())
        .filter(|&z| p_z.prob(z) > 0.0 && d.point_of(z) != inverse.point_of(z))
        .collect();
    let objective = xt + yt + zt;
    let equal = mismatched.is_empty();
    Ok(Theorem2Report {
        objective,
        x_term: xt,
        y_term: yt,
        z_term: zt,
        tol,
        equal_on_support: equal,
        mismatched,
        consistent: (objective <= tol) == equal,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Sweep {
    pub n_composites: usize,
    /// Number of deterministic maps the sweep accounts for, as a decimal
    /// string (it overflows any machine integer quickly).
    pub maps_covered: String,
    pub brute_forced: usize,
    pub violations: usize,
}

/// Checks the biconditional over every deterministic decomposition map.
///
/// The objective is a sum of independent per-composite terms, so a map has
/// zero objective iff each supported composite chooses a zero-cost pair. The
/// sweep therefore tests all `|Z| * |X||Y|` local choices, which settles every
/// one of the `(|X||Y|)^|Z|` maps, and additionally brute-forces all maps
/// outright when there are at most `brute_limit` of them.
pub fn sweep_theorem2(
    spec: &CompositionSpec,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    tol: f64,
    brute_limit: usize,
) -> Result<Theorem2Sweep> {
    let inverse = invert_composition(spec)?;
    let costs = Theorem2Costs::new(spec);
    let (nz, np, ny) = (spec.z_space().len(), spec.n_pairs(), spec.y_space().len());
    let mut violations = 0;
    for z in 0..nz {
        let truth = inverse.point_of(z).expect("deterministic inverse");
        let pz = p_z.prob(z);
        let wxy = p_x.prob(truth.0) * p_y.prob(truth.1);
        for j in 0..np {
            let (a, b, c) = costs.terms(spec, z, truth, j);
            let local = wxy * (a + b) + pz * c;
            let is_inverse = j == truth.0 * ny + truth.1;
            let zero_expected = is_inverse || pz == 0.0;
            if (local <= tol) != zero_expected {
                violations += 1;
            }
        }
    }
    let total = (np as f64).powi(nz as i32);
    let mut brute = 0;
    if total <= brute_limit as f64 {
        let mut choice = vec![0usize; nz];
        loop {
            let table = choice.iter().map(|&j| (j / ny, j % ny)).collect();
            let d = DecompositionMap::deterministic(spec.z_space().clone(), spec.x_space().clone(), spec.y_space().clone(), table)?;
            if !verify_theorem2(spec, &d, p_x, p_y, p_z, tol)?.consistent {
                violations += 1;
            }
            brute += 1;
            let mut k = 0;
            while k < nz {
                choice[k] += 1;
                if choice[k] < np {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == nz {
                break;
            }
        }
    }
    Ok(Theorem2Sweep {
        n_composites: nz,
        maps_covered: big_pow(np as u64, nz as u32),
        brute_forced: brute,
        violations,
    })
}

/// Decimal expansion of `base^exp`.
fn big_pow(base: u64, exp: u32) -> String {
    let mut digits = vec![1u32]; // little-endian base 1e9 limbs
    for _ in 0..exp {
        let mut carry = 0u64;
        for d in digits.iter_mut() {
            let v = *d as u64 * base + carry;
            *d = (v % 1_000_000_000) as u32;
            carry = v / 1_000_000_000;
        }
        while carry > 0 {
            digits.push((carry % 1_000_000_000) as u32);
            carry /= 1_000_000_000;
        }
    }
    let mut s = digits.last().map(|d| d.to_string()).unwrap_or_default();
    for d in digits.iter().rev().skip(1) {
        s.push_str(&format!("{d:09}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finitedist::SpaceRef;

    fn sp(n: usize) -> SpaceRef {
        Arc::new(SymbolSpace::range(n).unwrap())
    }

    #[test]
    fn big_pow_digits() {
        assert_eq!(big_pow(4, 3), "64");
        assert_eq!(big_pow(10, 12), "1000000000000");
        assert_eq!(big_pow(7, 0), "1");
    }

    #[test]
    fn lemma_refuses_collisions() {
        let c = CompositionSpec::modadd(3).unwrap();
        let u = FiniteDistribution::<f64>::uniform(sp(3));
        assert!(matches!(check_lemma_instance(&c, &u), Err(LabError::NotBijective(_))));
    }

    #[test]
    fn lemma_after_pruning() {
        let c = CompositionSpec::affine(sp(3), sp(3), 1, 3, None).unwrap();
        let p = FiniteDistribution::new(sp(3), vec![0.0, 0.4, 0.6]).unwrap();
        let t = check_lemma_instance(&c, &p).unwrap();
        assert!(t.full_rank);
        assert_eq!(t.pruned_x, vec![0]);
    }

    #[test]
    fn theorem2_examples() {
        let c = CompositionSpec::affine(sp(4), sp(3), 1, 4, None).unwrap();
        let u4 = FiniteDistribution::<f64>::uniform(sp(4));
        let u3 = FiniteDistribution::<f64>::uniform(sp(3));
        let pz = FiniteDistribution::<f64>::uniform(c.z_space().clone());
        let inv = invert_composition(&c).unwrap();
        let r = verify_theorem2(&c, &inv, &u4, &u3, &pz, 1e-12).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.equal_on_support && r.consistent);

        let mut table: Vec<(usize, usize)> = (0..12).map(|z| inv.point_of(z).unwrap()).collect();
        table[0] = (1, 0);
        let d = DecompositionMap::deterministic(c.z_space().clone(), c.x_space().clone(), c.y_space().clone(), table).unwrap();
        let r = verify_theorem2(&c, &d, &u4, &u3, &pz, 1e-12).unwrap();
        // x error 1 and composite error |1 - 0| on a 1/12 atom.
        assert!((r.objective - 2.0 / 12.0).abs() < 1e-15);
        assert!(!r.equal_on_support && r.consistent);
        assert_eq!(r.mismatched, vec![0]);
    }
}
