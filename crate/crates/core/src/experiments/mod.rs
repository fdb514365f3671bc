//! Instance generators, experiment pipelines and the credit-bureau case study.
//!
//! Every pipeline is deterministic in its seed. Replications run in parallel
//! on the rayon pool and derive their own seeds from the master seed and the
//! replication index, so results do not depend on the thread count.

mod case_study;
mod generate;
mod pipelines;

pub use case_study::{
    case_study_instance, exact_uniform_loss, published_config, run_case_study, CaseStudyProfile, CaseStudyReport,
    CaseStudyState, FeatureChange, CASE_STUDY_BUDGET, FEATURE_NAMES, NODE_TYPES, RULE_APPROX_WEIGHT,
};
pub use generate::{
    generate_instance, generate_truth_model, random_configs, simulate_dataset, InstanceFamily, InstanceGenSpec,
    TRUTH_WEIGHT_RANGE,
};
pub use pipelines::{
    gap_between, identity_design, paired_t_statistic, identity_design_min_probability, mean_std, median, poisoning_regime_limit,
    run_end_to_end, run_learning_curve, run_poisoning_experiment, solution_gap, EndToEndSpec, ExperimentOutput,
    GapOutcome, LearnerChoice, LearningCurveSpec, Manifest, PlannerChoice, PoisoningSpec, ResultRow, ResultTable,
    Trial, DEFAULT_REPLICATIONS, DEFAULT_TEST_CONFIGS,
};
