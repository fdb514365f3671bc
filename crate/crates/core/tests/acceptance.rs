//! Acceptance checks. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use fdpkit::attacker::{log_likelihood, log_likelihood_grad, ModelFamily};
use fdpkit::experiments::{
    generate_instance, generate_truth_model, median, random_configs, run_case_study, run_end_to_end,
    run_learning_curve, run_poisoning_experiment, simulate_dataset, CaseStudyProfile, EndToEndSpec, InstanceFamily,
    InstanceGenSpec, LearnerChoice, LearningCurveSpec, PlannerChoice, PoisoningSpec,
};
use fdpkit::instance::InstanceDoc;
use fdpkit::learning::{
    closed_form_from_distributions, closed_form_learn, tv_error, ClosedFormOptions, MleHyper, PoisonStrategy,
};
use fdpkit::planning::{brute_force_plan, plan_milp, plan_milp_bs, plan_unconstrained, BruteForceOptions, PiecewiseExpApprox};
use fdpkit::rng::{derive_seed, rng_from_seed};
use fdpkit::{AttackDataset, AttackGroup, BinaryDomain, EntryDomain, FdpInstance, FeatureKind, ScoreModel};
use num_rational::Ratio;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn weights(model: &ScoreModel) -> &[f64] {
    match model {
        ScoreModel::Classical { weights } => weights,
        _ => panic!("classical model expected"),
    }
}

fn case_study_exactness() -> Outcome {
    let apt = run_case_study(CaseStudyProfile::Apt).expect("apt case study");
    let bot = run_case_study(CaseStudyProfile::Botnet).expect("botnet case study");
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let checks = [
        ("apt before set", apt.before.attacked == vec![5, 6, 7, 8, 9]),
        ("apt before exact", apt.before.loss_exact == Ratio::new(3 * 4 + 2 * 8, 50).to_string()),
        ("apt before 0.56", close(apt.before.loss, 0.56)),
        ("apt after set", apt.published.attacked == vec![1, 5, 6, 7]),
        ("apt after exact", apt.published.loss_exact == Ratio::new(1 + 3 * 4, 40).to_string()),
        ("apt after 0.325", close(apt.published.loss, 0.325)),
        ("apt plan cost 10", close(apt.published.cost, 10.0)),
        ("apt optimum ≤ published", apt.planned.loss <= apt.published.loss + 1e-12),
        ("apt optimum within budget", apt.planned.cost <= 10.0 + 1e-12),
        ("botnet before set", bot.before.attacked == vec![0, 1, 3, 4]),
        ("botnet before 0.2", close(bot.before.loss, 0.2) && bot.before.loss_exact == "1/5"),
        ("botnet after set", bot.published.attacked == vec![0, 1]),
        ("botnet after 0.1", close(bot.published.loss, 0.1) && bot.published.loss_exact == "1/10"),
        ("botnet optimum ≤ published", bot.planned.loss <= bot.published.loss + 1e-12),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        format!(
            "apt {} -> {} (cost {}), botnet {} -> {}; failed checks {:?}",
            apt.before.loss_exact, apt.published.loss_exact, apt.published.cost, bot.before.loss_exact, bot.published.loss_exact, failed
        ),
    )
}

/// Random all-binary instance sizes with at most 20 entries, so exhaustive
/// search stays small.
fn desk_dims(rng: &mut impl Rng) -> (usize, usize) {
    loop {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(2..=6);
        if n * m <= 20 {
            return (n, m);
        }
    }
}

fn planner_optimality() -> Outcome {
    let (eps, eps_bs) = (0.1, 1e-4);
    let mut rng = rng_from_seed(2024);
    let (mut worst_milp, mut worst_bs, mut bad) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
    for t in 0..50u64 {
        let (n, m) = desk_dims(&mut rng);
        let inst = generate_instance(&InstanceGenSpec {
            n,
            m,
            family: InstanceFamily::AllBinary,
            seed: derive_seed(11, t),
        })
        .unwrap();
        let truth = generate_truth_model(ModelFamily::Classical, m, derive_seed(12, t));
        let oracle = brute_force_plan(&inst, &truth, &BruteForceOptions::default()).unwrap().expected_loss;
        let a = plan_milp(&inst, weights(&truth), eps).unwrap().expected_loss - oracle;
        let b = plan_milp_bs(&inst, weights(&truth), eps, eps_bs).unwrap().expected_loss - oracle;
        worst_milp = worst_milp.max(a);
        worst_bs = worst_bs.max(b);
        if a > 2.0 * eps * eps + 1e-9 || b > 2.0 * eps * eps + eps_bs + 1e-9 {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("50 instances, worst excess milp {worst_milp:.2e} (bound 2e-2), milp-bs {worst_bs:.2e} (bound 2.01e-2), violations {bad}"),
    )
}

fn unconstrained_instance(n: usize, m: usize, seed: u64) -> FdpInstance {
    let mut rng = rng_from_seed(seed);
    let actual: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect();
    let costs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
    let budget = costs.iter().flatten().sum::<f64>();
    FdpInstance::try_from(InstanceDoc {
        version: 1,
        n,
        m,
        kinds: vec![FeatureKind::Binary; m],
        actual,
        losses: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        radii: vec![vec![EntryDomain::Binary(BinaryDomain::Free); m]; n],
        costs,
        budget,
        constraints: Vec::new(),
    })
    .unwrap()
}

fn unconstrained_exactness() -> Outcome {
    let mut rng = rng_from_seed(77);
    let (mut mismatches, mut slower, mut worst) = (0, 0, 0.0f64);
    for t in 0..100u64 {
        let (n, m) = loop {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(1..=4);
            // (2^m)^n complete configurations
            if n * m <= 20 {
                break (n, m);
            }
        };
        let inst = unconstrained_instance(n, m, derive_seed(78, t));
        let truth = generate_truth_model(ModelFamily::Classical, m, derive_seed(79, t));
        let w = weights(&truth);
        let oracle = brute_force_plan(&inst, &truth, &BruteForceOptions::default()).unwrap().expected_loss;
        let start = Instant::now();
        let exact = plan_unconstrained(&inst, w).unwrap().expected_loss;
        let t_exact = start.elapsed();
        let start = Instant::now();
        plan_milp_bs(&inst, w, 0.1, 1e-4).unwrap();
        let t_bs = start.elapsed();
        let diff = (exact - oracle).abs();
        worst = worst.max(diff);
        if diff > 1e-12 {
            mismatches += 1;
        }
        if t_exact >= t_bs {
            slower += 1;
        }
    }
    outcome(
        mismatches == 0 && slower == 0,
        format!("100 instances, max |loss - enumeration| {worst:.1e}, mismatches {mismatches}, not faster than milp-bs {slower}"),
    )
}

fn cf_consistency_and_trend() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut worst_exact = 0.0f64;
    for t in 0..50u64 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=8);
        let truth = generate_truth_model(ModelFamily::Classical, m, derive_seed(6, t));
        let configs = random_configs(n, m, m, derive_seed(7, t));
        let dists: Vec<Vec<f64>> = configs.iter().map(|c| truth.attack_distribution(c).unwrap()).collect();
        let w = closed_form_from_distributions(&configs, &dists, &vec![(0, 1); m]).unwrap();
        let err = w.iter().zip(weights(&truth)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_exact = worst_exact.max(err);
    }
    let (n, m) = (5, 6);
    let draws = 5;
    let mut wins = 0;
    for t in 0..50u64 {
        let truth = generate_truth_model(ModelFamily::Classical, m, derive_seed(8, t));
        let configs = random_configs(n, m, m, derive_seed(9, t));
        let test = random_configs(n, m, 1000, derive_seed(10, t));
        let median_tv = |per: usize| {
            let errs: Vec<f64> = (0..draws)
                .map(|d| {
                    let data = simulate_dataset(&truth, &configs, per, derive_seed(derive_seed(11, t), (per * 10 + d) as u64)).unwrap();
                    let opts = ClosedFormOptions {
                        smoothing: true,
                        ..Default::default()
                    };
                    let learned = closed_form_learn(&data, &opts).unwrap().model;
                    tv_error(&truth, &learned, &test).unwrap()
                })
                .collect();
            median(&errs)
        };
        if median_tv(100_000) < median_tv(1_000) {
            wins += 1;
        }
    }
    outcome(
        worst_exact <= 1e-8 && wins >= 45,
        format!("exact-distribution max error {worst_exact:.1e} (≤ 1e-8), sampling trend {wins}/50 (≥ 45)"),
    )
}

fn neural_learning() -> Outcome {
    let spec = LearningCurveSpec {
        family: ModelFamily::Neural3,
        n: 5,
        m: 12,
        sample_grid: vec![100_000],
        replications: 5,
        test_configs: 2000,
        hyper: MleHyper {
            seed: 99,
            ..Default::default()
        },
        seed: 5,
    };
    let out = run_learning_curve(&spec).unwrap();
    let mean = out.table.rows[0].mean;
    outcome(mean <= 0.18, format!("mean TV {mean:.4} over {} replications (≤ 0.18)", out.table.rows[0].n_reps))
}

fn end_to_end_bound() -> Outcome {
    let (eps, eps_bs) = (0.05, 1e-4);
    let spec = EndToEndSpec {
        instance_family: InstanceFamily::AllBinary,
        n: 4,
        m: 5,
        sample_grid: vec![1_000, 10_000, 100_000],
        learner: LearnerChoice::ClosedForm { smoothing: true },
        planner: PlannerChoice::MilpBs { epsilon: eps, eps_bs },
        reference: Some(PlannerChoice::BruteForce { grid_step: 0.25 }),
        replications: 20,
        seed: 31,
    };
    let out = run_end_to_end(&spec).unwrap();
    let mut violations = 0;
    let mut negative = 0;
    for t in &out.trials {
        let excess = t.details["excess_loss"];
        let mult = t.details["multiplicative_error"];
        let cert = t.details["certificate"];
        if excess > 8.0 * mult + cert + 1e-9 {
            violations += 1;
        }
        if t.value < -1e-9 - cert {
            negative += 1;
        }
    }
    let last = out.table.rows.last().unwrap();
    outcome(
        violations == 0 && last.mean < 0.1,
        format!(
            "{} trials, bound violations {violations}, gaps below -certificate {negative}, mean gap at {} samples {:.4} (< 0.1)",
            out.trials.len(),
            last.param,
            last.mean
        ),
    )
}

fn approximation_sandwich() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for &eps in &[0.5, 0.1, 0.01] {
        for _ in 0..10_000 {
            let w = rng.gen_range(0.1..4.0);
            let p = PiecewiseExpApprox::new(w, eps).unwrap();
            let z = rng.gen_range(-2.0 * w..=0.0);
            let ratio = p.eval(z) / z.exp();
            worst = worst.max(ratio - 1.0);
            if ratio < 1.0 - 1e-10 || ratio > 1.0 + eps * eps / 2.0 + 1e-10 {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("30000 points, largest ratio - 1 = {worst:.3e}, violations {bad}"))
}

fn random_dataset(n: usize, m: usize, seed: u64) -> AttackDataset {
    let mut rng = rng_from_seed(seed);
    let groups = (0..4)
        .map(|g| AttackGroup {
            config: random_configs(n, m, 1, derive_seed(seed, g)).remove(0),
            targets: (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..n)).collect(),
        })
        .collect();
    AttackDataset::untyped(n, m, groups).unwrap()
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = rng_from_seed(8);
    for (family, count) in [(ModelFamily::Classical, 20u64), (ModelFamily::Neural3, 20)] {
        for t in 0..count {
            let n = rng.gen_range(2..=5);
            let m = rng.gen_range(1..=6);
            let model = generate_truth_model(family, m, derive_seed(100, t));
            let data = random_dataset(n, m, derive_seed(101, t));
            let (_, grad) = log_likelihood_grad(&model, &data, None).unwrap();
            let theta = model.params().unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..theta.len())
                .map(|j| {
                    let mut up = theta.clone();
                    let mut down = theta.clone();
                    up[j] += h;
                    down[j] -= h;
                    let f = |p: Vec<f64>| log_likelihood(&model.with_params(p).unwrap(), &data).unwrap();
                    (f(up) - f(down)) / (2.0 * h)
                })
                .collect();
            let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = f64::max(
                grad.iter().map(|a| a * a).sum::<f64>().sqrt(),
                fd.iter().map(|a| a * a).sum::<f64>().sqrt(),
            )
            .max(1e-12);
            worst = worst.max(diff / scale);
        }
    }
    outcome(worst <= 1e-4, format!("40 models, worst relative error {worst:.2e} (≤ 1e-4)"))
}

fn poisoning_robustness() -> Outcome {
    let (n, m, eps) = (3, 2, 0.2);
    let limit = fdpkit::experiments::poisoning_regime_limit(eps, fdpkit::experiments::identity_design_min_probability(n), 1.0, m);
    let far = 0.3;
    let spec = PoisoningSpec {
        n,
        m,
        gammas: vec![0.0, 0.5 * limit, limit, far],
        epsilon: eps,
        samples_per_config: 100_000,
        replications: 100,
        strategy: PoisonStrategy::WorstCasePair,
        seed: 17,
    };
    let out = run_poisoning_experiment(&spec).unwrap();
    let fraction = |g: f64| {
        let t: Vec<_> = out.trials.iter().filter(|t| t.param == g).collect();
        t.iter().filter(|t| t.details["within_bound"] == 1.0).count() as f64 / t.len() as f64
    };
    let in_regime: Vec<(f64, f64)> = spec.gammas.iter().filter(|&&g| g <= limit).map(|&g| (g, fraction(g))).collect();
    let pass = in_regime.iter().all(|&(_, f)| f >= 0.95);
    outcome(
        pass,
        format!(
            "regime limit {limit:.5}; within 3ε: {}; far outside (γ = {far}) {:.2}",
            in_regime.iter().map(|(g, f)| format!("γ={g:.5}: {f:.2}")).collect::<Vec<_>>().join(", "),
            fraction(far)
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("case-study exactness", Duration::from_secs(5), case_study_exactness),
        ("planner optimality at desk scale", Duration::from_secs(600), planner_optimality),
        ("unconstrained exactness", Duration::from_secs(120), unconstrained_exactness),
        ("closed-form consistency and trend", Duration::from_secs(600), cf_consistency_and_trend),
        ("neural learning", Duration::from_secs(1800), neural_learning),
        ("end-to-end bound", Duration::from_secs(900), end_to_end_bound),
        ("approximation sandwich", Duration::from_secs(10), approximation_sandwich),
        ("gradient correctness", Duration::from_secs(60), gradient_correctness),
        ("poisoning robustness", Duration::from_secs(600), poisoning_robustness),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (idx, (name, limit, run)) in criteria.iter().enumerate() {
        let number = idx + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed < *limit;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {number} [{}] {name}: {} ({:.1} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
