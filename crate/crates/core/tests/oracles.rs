use fdpkit::attacker::{log_likelihood, sample_attacks, ModelFamily};
use fdpkit::experiments::{
    exact_uniform_loss, generate_instance, generate_truth_model, random_configs, simulate_dataset, InstanceFamily,
    InstanceGenSpec,
};
use fdpkit::instance::{deception_cost, expected_loss, InstanceDoc};
use fdpkit::learning::{closed_form_learn, mle_learn, tv_error, ClosedFormOptions, MleHyper};
use fdpkit::planning::{plan_gradient, GradientHyper, PiecewiseExpApprox};
use fdpkit::rng::{derive_seed, rng_from_seed};
use fdpkit::{AttackDataset, AttackGroup, BinaryDomain, EntryDomain, FdpInstance, FeatureConfig, FeatureKind, ScoreModel};
use num_rational::Ratio;
use rand::Rng;

fn two_targets() -> FdpInstance {
    FdpInstance::try_from(InstanceDoc {
        version: 1,
        n: 2,
        m: 1,
        kinds: vec![FeatureKind::Binary],
        actual: vec![vec![1.0], vec![0.0]],
        losses: vec![1.0, 0.0],
        radii: vec![vec![EntryDomain::Binary(BinaryDomain::Free)]; 2],
        costs: vec![vec![2.0], vec![0.5]],
        budget: 2.0,
        constraints: Vec::new(),
    })
    .unwrap()
}

#[test]
fn expected_loss_by_hand() {
    // scores 3 and 1, so target 0 is attacked with probability 3/4
    let inst = two_targets();
    let model = ScoreModel::classical(vec![3f64.ln()]);
    let loss = expected_loss(&inst, &model, inst.actual()).unwrap();
    assert!((loss - 0.75).abs() < 1e-15);
    let flipped = FeatureConfig::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    assert!((expected_loss(&inst, &model, &flipped).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(deception_cost(&inst, &flipped).unwrap(), 2.5);
}

#[test]
fn gradient_planner_on_continuous_pair() {
    let mut doc = InstanceDoc::from(&two_targets());
    doc.kinds = vec![FeatureKind::Continuous];
    doc.radii = vec![vec![EntryDomain::Radius(1.0)]; 2];
    let inst = FdpInstance::try_from(doc).unwrap();
    let model = ScoreModel::classical(vec![3f64.ln()]);
    let plan = plan_gradient(&inst, &model, &GradientHyper::default()).unwrap();
    assert!(plan.cost <= inst.budget() + 1e-6);
    // optimum moves target 1 up by 1 and target 0 down by 0.75
    let optimum = 3f64.powf(-0.75) / (1.0 + 3f64.powf(-0.75));
    assert!(plan.expected_loss >= optimum - 1e-9);
    // the penalized descent settles slightly inside the budget
    assert!(plan.expected_loss <= optimum + 5e-3, "{}", plan.expected_loss);
}

#[test]
fn smoothed_closed_form_by_hand() {
    // counts (3, 1) become (4, 2); difference row is [1], so w = ln 2
    let group = AttackGroup {
        config: FeatureConfig::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
        targets: vec![0, 0, 0, 1],
    };
    let ds = AttackDataset::untyped(2, 1, vec![group]).unwrap();
    let opts = ClosedFormOptions {
        smoothing: true,
        ..Default::default()
    };
    let learned = closed_form_learn(&ds, &opts).unwrap().model;
    assert!((learned.params().unwrap()[0] - 2f64.ln()).abs() < 1e-12);
    let raw = closed_form_learn(&ds, &ClosedFormOptions::default()).unwrap().model;
    assert!((raw.params().unwrap()[0] - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn log_likelihood_by_hand() {
    let group = AttackGroup {
        config: FeatureConfig::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
        targets: vec![0, 1],
    };
    let ds = AttackDataset::untyped(2, 1, vec![group]).unwrap();
    let ll = log_likelihood(&ScoreModel::classical(vec![3f64.ln()]), &ds).unwrap();
    assert!((ll - (0.75f64.ln() + 0.25f64.ln())).abs() < 1e-12);
}

#[test]
fn approximation_is_exact_at_zero() {
    for eps in [0.5, 0.1, 0.01] {
        let p = PiecewiseExpApprox::new(2.0, eps).unwrap();
        assert!((p.eval(0.0) - 1.0).abs() < 1e-12);
    }
    assert!(PiecewiseExpApprox::new(1.0, 0.0).is_err());
    assert!(PiecewiseExpApprox::new(1.0, 1.0).is_err());
}

#[test]
fn uniform_loss_is_exact_rational() {
    assert_eq!(exact_uniform_loss(&[0, 1]), Ratio::new(1, 10));
}

#[test]
fn generators_are_deterministic() {
    for family in [InstanceFamily::MixedClassical, InstanceFamily::ContinuousNeural, InstanceFamily::AllBinary] {
        let spec = InstanceGenSpec {
            n: 4,
            m: 6,
            family,
            seed: 42,
        };
        assert_eq!(generate_instance(&spec).unwrap(), generate_instance(&spec).unwrap());
        let other = InstanceGenSpec { seed: 43, ..spec };
        assert_ne!(generate_instance(&spec).unwrap(), generate_instance(&other).unwrap());
    }
    let m1 = generate_truth_model(ModelFamily::Neural3, 4, 9);
    assert_eq!(m1, generate_truth_model(ModelFamily::Neural3, 4, 9));
    assert_eq!(sample_attacks(&m1, &random_configs(3, 4, 1, 1)[0], 50, 2).unwrap(), sample_attacks(&m1, &random_configs(3, 4, 1, 1)[0], 50, 2).unwrap());
    assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
}

#[test]
fn seeded_uniform_draws_are_centered() {
    let mut rng = rng_from_seed(2718);
    let mean = (0..10_000).map(|_| rng.gen::<f64>()).sum::<f64>() / 10_000.0;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn sampled_frequencies_follow_distribution() {
    let model = generate_truth_model(ModelFamily::Classical, 3, 5);
    let config = random_configs(4, 3, 1, 6).remove(0);
    let p = model.attack_distribution(&config).unwrap();
    let draws = sample_attacks(&model, &config, 200_000, 7).unwrap();
    for (i, &pi) in p.iter().enumerate() {
        let freq = draws.iter().filter(|&&t| t == i).count() as f64 / draws.len() as f64;
        // about five standard deviations
        assert!((freq - pi).abs() < 5.0 * (pi * (1.0 - pi) / 200_000.0).sqrt() + 1e-9, "{freq} vs {pi}");
    }
}

#[test]
fn mle_improves_likelihood_and_fit() {
    for family in [ModelFamily::Classical, ModelFamily::Neural3] {
        let truth = generate_truth_model(family, 3, 11);
        let ds = simulate_dataset(&truth, &random_configs(4, 3, 2000, 12), 1, 13).unwrap();
        let result = mle_learn(&ds, family, &MleHyper::default()).unwrap();
        let d = &result.diagnostics;
        assert!(d.log_likelihood.unwrap() >= d.initial_log_likelihood.unwrap());
        let test = random_configs(4, 3, 200, 14);
        assert!(tv_error(&truth, &result.model, &test).unwrap() < 0.1);
    }
}
