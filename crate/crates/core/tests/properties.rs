mod common;

use std::sync::Arc;

use decomp_lab::compose::{make_scenario, Component, ScenarioKind, ScenarioParams};
use decomp_lab::finitedist::{ground_metric, pushforward, tv_distance, FiniteDistribution, MetricKind, SymbolSpace};
use decomp_lab::identify::{check_lemma_instance, random_bijective_instance, resolving_matrix, SizeBounds};
use decomp_lab::tasks::{solve_task, solve_task_with_truth, SolverKind, TaskConfig};
use decomp_lab::transport::{wasserstein_exact, wasserstein_sinkhorn, SINKHORN_TOL};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], 1..=max)
        .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-3)
}

/// Three weight vectors of one common length.
fn triple(max: usize) -> impl Strategy<Value = [Vec<f64>; 3]> {
    (1..=max).prop_flat_map(|n| {
        let w = || {
            prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], n)
                .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-3)
        };
        (w(), w(), w()).prop_map(|(a, b, c)| [a, b, c])
    })
}

fn laws(ws: &[Vec<f64>; 3]) -> [FiniteDistribution; 3] {
    let s = Arc::new(SymbolSpace::range(ws[0].len()).unwrap());
    ws.clone().map(|w| FiniteDistribution::new(s.clone(), w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn construction_normalizes(w in weights(40)) {
        let s = Arc::new(SymbolSpace::range(w.len()).unwrap());
        let p = FiniteDistribution::new(s, w).unwrap();
        prop_assert!((p.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(p.probs().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pushforward_conserves_mass_and_is_linear(
        ws in triple(24),
        targets in prop::collection::vec(0usize..7, 24),
        alpha in 0.0..=1.0f64,
    ) {
        let [p, q, _] = laws(&ws);
        let target = Arc::new(SymbolSpace::range(7).unwrap());
        let f = |i: usize| Some(targets[i]);
        let fp = pushforward(&p, &target, f).unwrap();
        prop_assert!((fp.total_mass() - 1.0).abs() <= 1e-12);
        let mixed = pushforward(&p.mix(&q, alpha).unwrap(), &target, f).unwrap();
        let fq = pushforward(&q, &target, f).unwrap();
        for k in 0..7 {
            let want = alpha * fp.prob(k) + (1.0 - alpha) * fq.prob(k);
            prop_assert!((mixed.prob(k) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn tv_is_a_metric(ws in triple(32)) {
        let [p, q, r] = laws(&ws);
        let d = |a, b| tv_distance(a, b).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-15);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
        prop_assert!((d(&p, &q) - common::tv(p.probs(), q.probs())).abs() <= 1e-12);
        if p.probs() != q.probs() {
            prop_assert!(d(&p, &q) > 0.0);
        }
    }

    #[test]
    fn w1_is_a_metric_with_zero_gap(ws in triple(32), l1 in any::<bool>()) {
        let kind = if l1 { MetricKind::L1 } else { MetricKind::Discrete };
        let [p, q, r] = laws(&ws);
        let cost = ground_metric(p.space(), kind);
        let w = |a, b| wasserstein_exact(a, b, &cost).unwrap();
        let pq = w(&p, &q);
        prop_assert!(w(&p, &p).value.abs() <= 1e-12);
        prop_assert!((pq.value - w(&q, &p).value).abs() <= 1e-8);
        prop_assert!(w(&p, &r).value <= pq.value + w(&q, &r).value + 1e-8);
        prop_assert!(pq.duality_gap.abs() <= 1e-8);
        for (a, b) in pq.plan.row_sums().iter().zip(p.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in pq.plan.col_sums().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(pq.plan.mass.iter().all(|&m| m >= 0.0));
        // The dual witness is 1-Lipschitz and certifies the value.
        let f = pq.lipschitz_witness(&cost);
        for i in 0..f.len() {
            for j in 0..f.len() {
                prop_assert!(f[i] - f[j] <= cost.get(i, j) + 1e-9);
            }
        }
        let gap: f64 = f.iter().zip(p.probs()).zip(q.probs()).map(|((fi, a), b)| fi * (a - b)).sum();
        prop_assert!((gap - pq.value).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sinkhorn_values_fall_toward_exact(ws in triple(12)) {
        let [p, q, _] = laws(&ws);
        let cost = ground_metric(p.space(), MetricKind::L1);
        let exact = wasserstein_exact(&p, &q, &cost).unwrap().value;
        // Marginals are only met to SINKHORN_TOL, which moves the value by at
        // most that much mass times the largest cost.
        let slack = cost.max_cost() * SINKHORN_TOL;
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01, 0.001] {
            let v = wasserstein_sinkhorn(&p, &q, &cost, eps, 200_000).unwrap();
            prop_assert!(v <= prev + slack, "eps {eps}: {v} after {prev}");
            prop_assert!(v >= exact - slack);
            prev = v;
        }
        prop_assert!(prev - exact <= 1e-3);
    }

    #[test]
    fn bijective_resolving_matrices_have_full_rank(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, p_x) = random_bijective_instance(&mut rng, SizeBounds::default()).unwrap();
        let t = check_lemma_instance(&spec, &p_x).unwrap();
        prop_assert!(t.full_rank, "rank {} of {}", t.rank, t.y_size);
        let r = resolving_matrix(&p_x, &spec).unwrap();
        for s in r.column_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert_eq!(common::rational_rank(&r.rows()), t.y_size);
    }

    #[test]
    fn zero_mass_backgrounds_are_pruned(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, p_x) = random_bijective_instance(&mut rng, SizeBounds { max_x: 6, max_y: 6 }).unwrap();
        prop_assume!(p_x.len() >= 2);
        let mut w = p_x.probs().to_vec();
        w[0] = 0.0;
        let p_x = FiniteDistribution::new(p_x.space().clone(), w).unwrap();
        let t = check_lemma_instance(&spec, &p_x).unwrap();
        prop_assert!(t.full_rank);
        prop_assert_eq!(t.pruned_x, vec![0]);
    }

    /// The learner sees only the view; replacing the hidden truth with an
    /// arbitrary law changes the scores but not the solution.
    #[test]
    fn hidden_fragments_never_reach_the_solver(
        seed in 0u64..1000,
        junk in prop::collection::vec(0.01..1.0f64, 2),
        learn_x in any::<bool>(),
    ) {
        let params = ScenarioParams { random_laws: Some(true), ..Default::default() };
        let truth = make_scenario(ScenarioKind::MicroMb, &params, seed).unwrap();
        let hidden = if learn_x { Component::X } else { Component::Y };
        let cfg = TaskConfig::new(3).with_solver(SolverKind::ClosedForm).with_hidden(hidden);
        let clean = solve_task_with_truth(&truth, &cfg).unwrap();

        let mut poisoned = truth.clone();
        match hidden {
            Component::X => poisoned.p_x = Some(FiniteDistribution::new(truth.spec.x_space().clone(), junk).unwrap()),
            Component::Y => {
                let n = truth.spec.y_space().len();
                let w: Vec<f64> = (0..n).map(|i| junk[i % 2] + i as f64).collect();
                poisoned.p_y = Some(FiniteDistribution::new(truth.spec.y_space().clone(), w).unwrap());
            }
        }
        let dirty = solve_task_with_truth(&poisoned, &cfg).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&clean.solution).unwrap(),
            serde_json::to_string(&dirty.solution).unwrap()
        );
        prop_assert_eq!(clean.report.losses, dirty.report.losses);

        let (view, _) = truth.hide(hidden).unwrap();
        let direct = solve_task(&view, &cfg).unwrap();
        prop_assert_eq!(
            serde_json::to_string(&clean.solution).unwrap(),
            serde_json::to_string(&direct.solution).unwrap()
        );
        // Handing the solver the law it must learn is refused outright.
        prop_assert!(solve_task(&truth, &cfg).is_err());
    }
}
