use fdpkit::attacker::{log_sum_exp, softmax, ModelFamily};
use fdpkit::experiments::{generate_instance, generate_truth_model, random_configs, simulate_dataset, InstanceFamily, InstanceGenSpec};
use fdpkit::instance::{check_feasibility, deception_cost, expected_loss};
use fdpkit::learning::{
    classical_multiplicative_error, closed_form_from_distributions, poison_dataset, PoisonStrategy,
};
use fdpkit::planning::{
    brute_force_plan, plan_greedy, plan_milp_bs, plan_unconstrained, BruteForceOptions, PiecewiseExpApprox,
};
use fdpkit::solver::lp::solve;
use fdpkit::solver::{solve_milp, BnbOptions, LinearProgram, LpStatus, MilpModel, MilpStatus, Row, Sense};
use fdpkit::{AttackDataset, FdpInstance, FeatureConfig, ScoreModel};
use proptest::prelude::*;

fn small_binary(n: usize, m: usize, seed: u64) -> FdpInstance {
    generate_instance(&InstanceGenSpec {
        n,
        m,
        family: InstanceFamily::AllBinary,
        seed,
    })
    .unwrap()
}

fn weights(model: &ScoreModel) -> Vec<f64> {
    model.params().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_distribution(g in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let p = softmax(&g);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let lse = log_sum_exp(&g);
        prop_assert!(lse >= g.iter().cloned().fold(f64::MIN, f64::max) - 1e-12);
    }

    #[test]
    fn softmax_ignores_shifts(g in prop::collection::vec(-5.0f64..5.0, 2..8), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = g.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&g).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_loss_lies_between_extreme_losses(n in 2usize..6, m in 3usize..7, seed in any::<u64>()) {
        let m = m - m % 3;
        let inst = generate_instance(&InstanceGenSpec { n, m, family: InstanceFamily::MixedClassical, seed }).unwrap();
        let model = generate_truth_model(ModelFamily::Classical, m, seed ^ 1);
        let config = random_configs(n, m, 1, seed ^ 2).remove(0);
        let loss = expected_loss(&inst, &model, &config).unwrap();
        let lo = inst.losses().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = inst.losses().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(loss >= lo - 1e-12 && loss <= hi + 1e-12);
    }

    #[test]
    fn actual_configuration_is_free_and_feasible(n in 2usize..6, m in 1usize..6, seed in any::<u64>()) {
        let inst = small_binary(n, m, seed);
        prop_assert_eq!(deception_cost(&inst, inst.actual()).unwrap(), 0.0);
        prop_assert!(check_feasibility(&inst, inst.actual()).unwrap().is_feasible());
    }

    #[test]
    fn exponential_approximation_sandwich(w in 0.01f64..10.0, eps in 0.01f64..0.99, t in 0.0f64..=1.0) {
        let pwl = PiecewiseExpApprox::new(w, eps).unwrap();
        let z = -2.0 * w * t;
        let ratio = pwl.eval(z) / z.exp();
        prop_assert!(ratio >= 1.0 - 1e-10);
        prop_assert!(ratio <= 1.0 + eps * eps / 2.0 + 1e-10);
    }

    #[test]
    fn exact_frequencies_recover_weights(n in 2usize..6, m in 1usize..7, seed in any::<u64>()) {
        let truth = generate_truth_model(ModelFamily::Classical, m, seed);
        let configs = random_configs(n, m, m, seed ^ 7);
        let dists: Vec<Vec<f64>> = configs.iter().map(|c| truth.attack_distribution(c).unwrap()).collect();
        if let Ok(w) = closed_form_from_distributions(&configs, &dists, &vec![(0, 1); m]) {
            for (a, b) in w.iter().zip(weights(&truth)) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn multiplicative_error_bounds_score_ratios(
        pair in (1usize..6).prop_flat_map(|m| (prop::collection::vec(-1.0f64..1.0, m), prop::collection::vec(-1.0f64..1.0, m), prop::collection::vec(0.0f64..=1.0, m)))
    ) {
        let (w, v, x) = pair;
        let eps = classical_multiplicative_error(&w, &v).unwrap();
        let ratio = (w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()).exp();
        prop_assert!(ratio <= 1.0 + eps + 1e-12);
        prop_assert!(ratio >= 1.0 / (1.0 + eps) - 1e-12);
    }

    #[test]
    fn poisoning_keeps_group_sizes(gamma in 0.0f64..=1.0, seed in any::<u64>()) {
        let truth = generate_truth_model(ModelFamily::Classical, 2, seed);
        let ds = simulate_dataset(&truth, &random_configs(3, 2, 2, seed), 50, seed).unwrap();
        let poisoned = poison_dataset(&ds, gamma, PoisonStrategy::RandomFlip, seed).unwrap();
        for (a, b) in ds.groups().iter().zip(poisoned.groups()) {
            prop_assert_eq!(a.targets.len(), b.targets.len());
            let changed = a.targets.iter().zip(&b.targets).filter(|(x, y)| x != y).count();
            prop_assert!(changed <= (gamma * a.targets.len() as f64).floor() as usize);
        }
        prop_assert_eq!(poison_dataset(&ds, 0.0, PoisonStrategy::WorstCasePair, seed).unwrap(), ds);
    }

    #[test]
    fn instance_json_round_trip(n in 2usize..5, m in 1usize..4, seed in any::<u64>()) {
        let inst = small_binary(n, m, seed);
        let back = FdpInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn dataset_csv_round_trip(seed in any::<u64>(), per in 1usize..20) {
        let truth = generate_truth_model(ModelFamily::Classical, 3, seed);
        let ds = simulate_dataset(&truth, &random_configs(4, 3, 3, seed), per, seed).unwrap();
        let (mut c, mut o) = (Vec::new(), Vec::new());
        ds.write_csv(&mut c, &mut o).unwrap();
        prop_assert_eq!(AttackDataset::read_csv(&c[..], &o[..], None).unwrap(), ds);
    }

    #[test]
    fn knapsack_milp_matches_enumeration(
        items in prop::collection::vec((0.0f64..10.0, 0.1f64..5.0), 1..9),
        frac in 0.0f64..1.0,
    ) {
        let cap = frac * items.iter().map(|i| i.1).sum::<f64>();
        let mut model = MilpModel::new();
        let vars: Vec<usize> = (0..items.len()).map(|j| model.add_binary(format!("x{j}"))).collect();
        for (&v, it) in vars.iter().zip(&items) {
            model.objective[v] = -it.0;
        }
        model.add_row("cap", vars.iter().zip(&items).map(|(&v, it)| (v, it.1)).collect(), Sense::Le, cap);
        let sol = solve_milp(&model, &BnbOptions::default(), &[], None).unwrap();
        prop_assert_eq!(sol.status, MilpStatus::Optimal);
        let mut best = 0.0f64;
        for mask in 0u32..(1 << items.len()) {
            let (mut val, mut wt) = (0.0, 0.0);
            for (j, it) in items.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    val += it.0;
                    wt += it.1;
                }
            }
            if wt <= cap + 1e-9 {
                best = best.max(val);
            }
        }
        prop_assert!((-sol.objective - best).abs() < 1e-6, "{} vs {}", -sol.objective, best);
    }

    #[test]
    fn lp_optimum_beats_feasible_points(
        c in prop::collection::vec(-3.0f64..3.0, 3),
        a in prop::collection::vec(0.1f64..2.0, 3),
        pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 10),
    ) {
        // min c·x over {x in [0,1]^3 : a·x ≤ 1}
        let lp = LinearProgram {
            objective: c.clone(),
            rows: vec![Row { terms: a.iter().cloned().enumerate().collect(), sense: Sense::Le, rhs: 1.0 }],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        };
        let sol = solve(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(a.iter().zip(&sol.x).map(|(p, q)| p * q).sum::<f64>() <= 1.0 + 1e-7);
        for p in pts {
            let s = a.iter().zip(&p).map(|(u, v)| u * v).sum::<f64>();
            let x: Vec<f64> = p.iter().map(|v| v / s.max(1.0)).collect();
            prop_assert!(sol.objective <= c.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planners_are_feasible_and_never_beat_enumeration(n in 2usize..5, m in 1usize..4, seed in any::<u64>()) {
        let inst = small_binary(n, m, seed);
        let model = generate_truth_model(ModelFamily::Classical, m, seed ^ 3);
        let w = weights(&model);
        let best = brute_force_plan(&inst, &model, &BruteForceOptions::default()).unwrap();
        let bs = plan_milp_bs(&inst, &w, 0.1, 1e-4).unwrap();
        let greedy = plan_greedy(&inst, &model).unwrap();
        for plan in [&bs, &greedy] {
            prop_assert!(check_feasibility(&inst, &plan.config).unwrap().is_feasible());
            prop_assert!(plan.expected_loss >= best.expected_loss - 1e-12);
            prop_assert!(plan.cost <= inst.budget() + 1e-9);
        }
        prop_assert!(bs.expected_loss <= best.expected_loss + 2.0 * 0.01 + 1e-4 + 1e-9);
        let before = expected_loss(&inst, &model, inst.actual()).unwrap();
        prop_assert!(best.expected_loss <= before + 1e-12);
    }

    #[test]
    fn unconstrained_planner_is_exact(n in 2usize..7, m in 1usize..4, seed in any::<u64>()) {
        let base = small_binary(n, m, seed);
        let inst = base.with_budget(base.max_total_cost()).unwrap();
        prop_assume!(inst.is_unconstrained());
        let model = generate_truth_model(ModelFamily::Classical, m, seed ^ 5);
        let exact = plan_unconstrained(&inst, &weights(&model)).unwrap();
        let best = brute_force_plan(&inst, &model, &BruteForceOptions::default()).unwrap();
        prop_assert!((exact.expected_loss - best.expected_loss).abs() < 1e-12);
    }

    #[test]
    fn feature_config_rows_round_trip(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..5)) {
        let c = FeatureConfig::from_rows(&rows).unwrap();
        prop_assert_eq!(c.to_rows(), rows);
    }
}
