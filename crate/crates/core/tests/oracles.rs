//! Library results checked against independent reference computations.

mod common;

use std::sync::Arc;

use common::*;
use decomp_lab::compose::{
    check_bijective, cycle_losses, invert_composition, make_scenario, CompositionSpec, CycleCosts, DecompositionMap,
    ScenarioKind, ScenarioParams,
};
use decomp_lab::finitedist::{ground_metric, FiniteDistribution, MetricKind, SymbolSpace};
use decomp_lab::identify::{
    column_rank, random_bijective_instance, recover_component_closed_form, resolving_matrix, sweep_theorem2,
    verify_theorem2, SizeBounds, RANK_REL_TOL,
};
use decomp_lab::transport::{adversarial_loss, wasserstein_exact, wasserstein_sinkhorn, AdversarialKind, Candidate};
use decomp_lab::LabError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn range(n: usize) -> Arc<SymbolSpace> {
    Arc::new(SymbolSpace::range(n).unwrap())
}

fn dist(space: &Arc<SymbolSpace>, w: &[f64]) -> FiniteDistribution {
    FiniteDistribution::new(space.clone(), w.to_vec()).unwrap()
}

fn random_law(rng: &mut ChaCha8Rng, space: &Arc<SymbolSpace>, sparse: bool) -> FiniteDistribution {
    let w: Vec<f64> = (0..space.len())
        .map(|_| if sparse && rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        return FiniteDistribution::uniform(space.clone());
    }
    dist(space, &w)
}

#[test]
fn half_mass_moved_one_step() {
    let s = range(2);
    let (p, q) = (dist(&s, &[0.5, 0.5]), dist(&s, &[0.0, 1.0]));
    let cost = ground_metric(&s, MetricKind::L1);
    let r = wasserstein_exact(&p, &q, &cost).unwrap();
    assert!((r.value - 0.5).abs() < 1e-15);
    assert!((r.plan.get(0, 1) - 0.5).abs() < 1e-15);
    let approx = wasserstein_sinkhorn(&p, &q, &cost, 0.01, 100_000).unwrap();
    assert!((approx - 0.5).abs() <= 0.02, "{approx}");
}

#[test]
fn line_metric_matches_cdf_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..60 {
        let n = rng.gen_range(2..=40);
        let s = range(n);
        let (p, q) = (random_law(&mut rng, &s, true), random_law(&mut rng, &s, true));
        let r = wasserstein_exact(&p, &q, &ground_metric(&s, MetricKind::L1)).unwrap();
        let oracle = line_w1(p.probs(), q.probs());
        assert!((r.value - oracle).abs() <= 1e-9, "n={n}: {} vs {oracle}", r.value);
    }
}

#[test]
fn discrete_metric_matches_total_variation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let s = range(rng.gen_range(1..=32));
        let (p, q) = (random_law(&mut rng, &s, true), random_law(&mut rng, &s, false));
        let r = wasserstein_exact(&p, &q, &ground_metric(&s, MetricKind::Discrete)).unwrap();
        assert!((r.value - tv(p.probs(), q.probs())).abs() <= 1e-9);
    }
}

#[test]
fn resolving_matrix_of_affine_example() {
    let (xs, ys) = (range(2), range(2));
    let spec = CompositionSpec::affine(xs.clone(), ys, 1, 2, None).unwrap();
    let r = resolving_matrix(&dist(&xs, &[0.5, 0.5]), &spec).unwrap();
    assert_eq!(r.rows(), vec![vec![0.5, 0.0], vec![0.5, 0.0], vec![0.0, 0.5], vec![0.0, 0.5]]);
    assert_eq!(rational_rank(&r.rows()), 2);
    assert_eq!(column_rank(&r, RANK_REL_TOL), 2);

    let p_z = dist(spec.z_space(), &[0.3, 0.3, 0.2, 0.2]);
    let rep = recover_component_closed_form(&p_z, &r).unwrap();
    let got = rep.recovered_p_y.unwrap();
    assert!((got.prob(0) - 0.6).abs() <= 1e-12 && (got.prob(1) - 0.4).abs() <= 1e-12);
    assert!(rep.residual <= 1e-12);
}

#[test]
fn modadd_ranks_agree_with_exact_elimination() {
    for (p_x, expected) in [(None, 1), (Some(vec![0.5, 0.3, 0.2]), 3)] {
        let params = ScenarioParams {
            p_x: p_x.clone(),
            ..Default::default()
        };
        let s = make_scenario(ScenarioKind::Modadd, &params, 0).unwrap();
        let px = s.p_x.as_ref().unwrap();
        let table: Vec<Vec<usize>> = (0..3).map(|x| (0..3).map(|y| (x + y) % 3).collect()).collect();
        let by_def = resolving_by_definition(px.probs(), &table, 3);
        let r = resolving_matrix(px, &s.spec).unwrap();
        assert_eq!(r.rows(), by_def);
        assert_eq!(rational_rank(&by_def), expected);
        assert_eq!(column_rank(&r, RANK_REL_TOL), expected);
    }
}

#[test]
fn lemma_instances_agree_with_exact_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (spec, p_x) = random_bijective_instance(&mut rng, SizeBounds::default()).unwrap();
        let by_def = resolving_by_definition(p_x.probs(), &spec.table_rows(), spec.z_space().len());
        let r = resolving_matrix(&p_x, &spec).unwrap();
        assert_eq!(r.rows(), by_def);
        let exact = rational_rank(&by_def);
        assert_eq!(exact, spec.y_space().len());
        assert_eq!(column_rank(&r, RANK_REL_TOL), exact);
    }
}

/// Overlay evaluated coordinate by coordinate on the raw symbols.
fn overlay_table(spec: &CompositionSpec) -> Vec<Vec<usize>> {
    let (xs, ys, zs) = (spec.x_space(), spec.y_space(), spec.z_space());
    (0..xs.len())
        .map(|x| {
            (0..ys.len())
                .map(|y| {
                    let z: Vec<u32> = xs
                        .symbol(x)
                        .iter()
                        .zip(ys.symbol(y))
                        .map(|(&b, &f)| if f != 0 { f } else { b })
                        .collect();
                    zs.index_of(&z).expect("composite in space")
                })
                .collect()
        })
        .collect()
}

#[test]
fn overlay_scenarios_are_bijective_by_enumeration() {
    for kind in [ScenarioKind::MicroMb, ScenarioKind::MicroBb] {
        let s = make_scenario(kind, &ScenarioParams::default(), 0).unwrap();
        let table = overlay_table(&s.spec);
        assert_eq!(table, s.spec.table_rows(), "{kind:?}");
        let nz = s.spec.z_space().len();
        let inv = brute_inverse(&table, nz);
        assert!(inv.iter().all(Option::is_some), "{kind:?} not surjective");
        assert!(check_bijective(&s.spec).bijective);
        let d = invert_composition(&s.spec).unwrap();
        for (z, want) in inv.iter().enumerate() {
            assert_eq!(d.point_of(z), *want);
        }
    }
    let micro_mb = make_scenario(ScenarioKind::MicroMb, &ScenarioParams::default(), 0).unwrap();
    assert_eq!(micro_mb.spec.z_space().len(), 10);
    for &p in micro_mb.p_z.probs() {
        assert!((p - 0.1).abs() < 1e-15);
    }
}

#[test]
fn modadd_has_no_inverse() {
    let spec = CompositionSpec::modadd(3).unwrap();
    assert!(matches!(invert_composition(&spec), Err(LabError::NotBijective(_))));
}

/// Cycle objective with l1 costs, computed from the table alone.
fn objective_by_hand(table: &[Vec<usize>], d: &[usize], p_x: &[f64], p_y: &[f64], p_z: &[f64]) -> f64 {
    let ny = p_y.len();
    let mut acc = 0.0;
    for (x, row) in table.iter().enumerate() {
        for (y, &z) in row.iter().enumerate() {
            let (x2, y2) = (d[z] / ny, d[z] % ny);
            acc += p_x[x] * p_y[y] * ((x2 as f64 - x as f64).abs() + (y2 as f64 - y as f64).abs());
        }
    }
    for (z, &pz) in p_z.iter().enumerate() {
        let back = table[d[z] / ny][d[z] % ny];
        acc += pz * (back as f64 - z as f64).abs();
    }
    acc
}

#[test]
fn theorem2_biconditional_over_every_map() {
    let cases: [(usize, usize, Vec<f64>, Vec<f64>); 3] = [
        (2, 2, vec![0.7, 0.3], vec![0.4, 0.6]),
        (2, 3, vec![1.0, 0.0], vec![0.2, 0.3, 0.5]),
        (3, 2, vec![0.2, 0.3, 0.5], vec![0.0, 1.0]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (nx, ny, wx, wy) in cases {
        let (xs, ys, zs) = (range(nx), range(ny), range(nx * ny));
        let mut flat: Vec<usize> = (0..nx * ny).collect();
        rand::seq::SliceRandom::shuffle(flat.as_mut_slice(), &mut rng);
        let table: Vec<Vec<usize>> = flat.chunks(ny).map(|r| r.to_vec()).collect();
        let spec = CompositionSpec::from_table(xs.clone(), ys.clone(), zs.clone(), table.clone()).unwrap();
        let (p_x, p_y) = (dist(&xs, &wx), dist(&ys, &wy));
        let pz: Vec<f64> = {
            let mut v = vec![0.0; nx * ny];
            for x in 0..nx {
                for y in 0..ny {
                    v[table[x][y]] += wx[x] * wy[y];
                }
            }
            v
        };
        let p_z = FiniteDistribution::from_probs(zs.clone(), pz.clone()).unwrap();
        let inv = brute_inverse(&table, nx * ny);
        let mut zero_count = 0;
        for m in all_maps(nx * ny, nx * ny) {
            let pairs: Vec<(usize, usize)> = m.iter().map(|&j| (j / ny, j % ny)).collect();
            let d = DecompositionMap::deterministic(zs.clone(), xs.clone(), ys.clone(), pairs.clone()).unwrap();
            let rep = verify_theorem2(&spec, &d, &p_x, &p_y, &p_z, 1e-12).unwrap();
            let hand = objective_by_hand(&table, &m, &wx, &wy, &pz);
            assert!((rep.objective - hand).abs() <= 1e-12, "{} vs {hand}", rep.objective);
            let inverse_on_support = (0..nx * ny).all(|z| pz[z] == 0.0 || Some(pairs[z]) == inv[z]);
            assert_eq!(rep.objective <= 1e-12, inverse_on_support, "map {m:?}");
            assert!(rep.consistent);
            zero_count += usize::from(inverse_on_support);
        }
        let free = pz.iter().filter(|&&p| p == 0.0).count();
        assert_eq!(zero_count, (nx * ny).pow(free as u32));
        let sweep = sweep_theorem2(&spec, &p_x, &p_y, &p_z, 1e-12, 1_000_000).unwrap();
        assert_eq!(sweep.violations, 0);
        assert_eq!(sweep.brute_forced, (nx * ny).pow((nx * ny) as u32));
    }
}

#[test]
fn cycle_loss_examples() {
    let (xs, ys) = (range(3), range(2));
    let spec = CompositionSpec::affine(xs.clone(), ys.clone(), 1, 3, None).unwrap();
    let zs = spec.z_space().clone();
    let pairs: Vec<(usize, usize)> = (0..zs.len())
        .map(|z| {
            let x = [1, 0, 2][z % 3];
            (x, z / 3)
        })
        .collect();
    let d = DecompositionMap::deterministic(zs.clone(), xs.clone(), ys.clone(), pairs).unwrap();
    let (p_x, p_y) = (FiniteDistribution::uniform(xs.clone()), dist(&ys, &[0.3, 0.7]));
    let p_z = FiniteDistribution::uniform(zs.clone());
    let l1 = CycleCosts::new(&xs, &ys, &zs, MetricKind::L1);
    let c = cycle_losses(&spec, &d, &p_x, &p_y, &p_z, &l1).unwrap();
    assert!((c.c_cyc - 2.0 / 3.0).abs() <= 1e-12, "{}", c.c_cyc);

    let u = DecompositionMap::uniform(zs.clone(), xs.clone(), ys.clone());
    let discrete = CycleCosts::new(&xs, &ys, &zs, MetricKind::Discrete);
    let c = cycle_losses(&spec, &u, &p_x, &p_y, &p_z, &discrete).unwrap();
    assert!((c.c_cyc - (2.0 - 1.0 / 3.0 - 1.0 / 2.0)).abs() <= 1e-12, "{}", c.c_cyc);

    let inv = invert_composition(&spec).unwrap();
    let c = cycle_losses(&spec, &inv, &p_x, &p_y, &p_z, &l1).unwrap();
    assert_eq!((c.c_cyc, c.d_cyc), (0.0, 0.0));
}

#[test]
fn composition_loss_with_collapsed_glyph_law() {
    let s = make_scenario(ScenarioKind::MicroMb, &ScenarioParams::default(), 0).unwrap();
    let point = FiniteDistribution::point_mass(s.spec.y_space().clone(), 0).unwrap();
    let cand = Candidate {
        p_y: Some(&point),
        ..Default::default()
    };
    let l = adversarial_loss(AdversarialKind::Composition, &s, &cand, MetricKind::Discrete).unwrap();
    assert!((l - 0.8).abs() <= 1e-12, "{l}");
}
