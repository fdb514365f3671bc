use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fdpkit::attacker::ModelFamily;
use fdpkit::experiments::{
    generate_instance, generate_truth_model, paired_t_statistic, random_configs, run_case_study, run_end_to_end,
    run_learning_curve, run_poisoning_experiment, simulate_dataset, CaseStudyProfile, EndToEndSpec, ExperimentOutput,
    InstanceFamily, InstanceGenSpec, LearnerChoice, LearningCurveSpec, Manifest, PlannerChoice, PoisoningSpec,
    DEFAULT_REPLICATIONS, DEFAULT_TEST_CONFIGS,
};
use fdpkit::instance::{check_feasibility, expected_loss};
use fdpkit::learning::{
    closed_form_learn, model_from_json_str, mle_learn, tv_error, ClosedFormOptions, MleHyper, PoisonStrategy,
};
use fdpkit::planning::{build_bs_model, build_fractional_model, GradientHyper, Optimizer, PlanResult};
use fdpkit::{AttackDataset, FdpInstance, ScoreModel};
use serde_json::json;

/// Learning and planning for the feature deception problem.
#[derive(Parser, Debug)]
#[command(name = "fdpkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a random instance and its ground-truth attacker model.
    Generate(GenerateArgs),
    /// Sample attacks under random configurations.
    Simulate(SimulateArgs),
    /// Fit an attacker model to an attack log.
    Learn(LearnArgs),
    /// Choose observed features for an instance.
    Plan(PlanArgs),
    /// Expected loss and feasibility of a configuration.
    Eval(EvalArgs),
    /// Replicated experiment pipelines.
    Experiment(ExperimentArgs),
    /// The ten-node credit-bureau network.
    Casestudy(CaseStudyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Classical,
    Neural,
    Binary,
}

impl From<FamilyArg> for InstanceFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Classical => InstanceFamily::MixedClassical,
            FamilyArg::Neural => InstanceFamily::ContinuousNeural,
            FamilyArg::Binary => InstanceFamily::AllBinary,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Classical,
    Neural3,
}

impl From<ModelArg> for ModelFamily {
    fn from(f: ModelArg) -> Self {
        match f {
            ModelArg::Classical => ModelFamily::Classical,
            ModelArg::Neural3 => ModelFamily::Neural3,
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(short)]
    n: usize,
    #[arg(short)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance JSON; the truth model goes to `<stem>.model.json`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Instance whose dimensions the configurations take.
    #[arg(short, long)]
    instance: PathBuf,
    /// Attacker model; defaults to `<instance stem>.model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of random configurations (defaults to m).
    #[arg(long)]
    num_configs: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    per_config: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes `<prefix>.configs.csv` and
    /// `<prefix>.observations.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LearnMethod {
    Cf,
    Mle,
}

#[derive(Args, Debug, Clone)]
struct MleArgs {
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long)]
    batch: Option<usize>,
}

impl MleArgs {
    fn hyper(&self, seed: u64) -> MleHyper {
        MleHyper {
            learning_rate: self.lr,
            epochs: self.epochs,
            steps_per_epoch: self.steps,
            batch_size: self.batch,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// Dataset prefix written by `simulate`.
    #[arg(short, long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "cf")]
    method: LearnMethod,
    #[arg(long, value_enum, default_value = "classical")]
    family: ModelArg,
    /// Add-one smoothing of the attack counts (closed form).
    #[arg(long)]
    smoothing: bool,
    /// Explicit estimator pairs, one `s:t` per configuration, comma separated.
    #[arg(long)]
    pairs: Option<String>,
    #[command(flatten)]
    mle: MleArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algorithm {
    MilpBs,
    Milp,
    Greedy,
    Gradient,
    Brute,
    Exact,
    Unconstrained,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Adam,
    Rmsprop,
}

#[derive(Args, Debug, Clone)]
struct PlannerArgs {
    #[arg(long = "alg", value_enum, default_value = "milp-bs")]
    algorithm: Algorithm,
    /// Segment length of the piecewise-linear approximation.
    #[arg(long, default_value_t = 0.005)]
    eps: f64,
    /// Binary-search tolerance.
    #[arg(long, default_value_t = 1e-4)]
    eps_bs: f64,
    /// Grid step for continuous features in exhaustive search.
    #[arg(long, default_value_t = 0.25)]
    grid_step: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.02)]
    plan_lr: f64,
    #[arg(long, default_value_t = 300)]
    plan_steps: usize,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
}

impl PlannerArgs {
    fn choice(&self, seed: u64) -> PlannerChoice {
        match self.algorithm {
            Algorithm::MilpBs => PlannerChoice::MilpBs {
                epsilon: self.eps,
                eps_bs: self.eps_bs,
            },
            Algorithm::Milp => PlannerChoice::Milp { epsilon: self.eps },
            Algorithm::Greedy => PlannerChoice::Greedy,
            Algorithm::Gradient => PlannerChoice::Gradient(GradientHyper {
                optimizer: match self.optimizer {
                    OptimizerArg::Adam => Optimizer::Adam,
                    OptimizerArg::Rmsprop => Optimizer::RmsProp,
                },
                learning_rate: self.plan_lr,
                steps: self.plan_steps,
                restarts: self.restarts,
                seed,
                ..Default::default()
            }),
            Algorithm::Brute => PlannerChoice::BruteForce {
                grid_step: self.grid_step,
            },
            Algorithm::Exact => PlannerChoice::ExactDiscreteCost,
            Algorithm::Unconstrained => PlannerChoice::Unconstrained,
        }
    }
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(short, long)]
    instance: PathBuf,
    /// Attacker model (bare or as written by `learn`); defaults to
    /// `<instance stem>.model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the MILP in LP text format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Plan JSON; printed to stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(short, long)]
    instance: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Plan whose configuration is evaluated; the actual configuration when
    /// absent. `-` reads it from standard input.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Second model: report the mean TV distance to it over random
    /// configurations.
    #[arg(long)]
    against: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TEST_CONFIGS)]
    test_configs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(subcommand)]
    kind: ExperimentKind,
    /// Worker threads for replications (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand, Debug)]
enum ExperimentKind {
    /// TV error against training-set size.
    LearningCurve(LearningCurveArgs),
    /// Solution gap of learn-then-plan against training-set size.
    EndToEnd(EndToEndArgs),
    /// Learning error of the closed form under poisoned labels.
    Poisoning(PoisoningArgs),
    /// Paired t statistic between two trial files.
    Ttest(TtestArgs),
}

#[derive(Args, Debug)]
struct CommonExperimentArgs {
    #[arg(short)]
    n: usize,
    #[arg(short)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result table CSV; trials go to `<stem>.trials.csv`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct LearningCurveArgs {
    #[command(flatten)]
    common: CommonExperimentArgs,
    #[arg(long, value_enum, default_value = "classical")]
    family: ModelArg,
    /// Comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    samples: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TEST_CONFIGS)]
    test_configs: usize,
    #[command(flatten)]
    mle: MleArgs,
}

#[derive(Args, Debug)]
struct EndToEndArgs {
    #[command(flatten)]
    common: CommonExperimentArgs,
    #[arg(long, value_enum, default_value = "classical")]
    family: FamilyArg,
    #[arg(long, value_delimiter = ',', required = true)]
    samples: Vec<usize>,
    #[arg(long, value_enum, default_value = "cf")]
    learner: LearnMethod,
    #[command(flatten)]
    mle: MleArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Planner on the true model; MILP-BS (classical) or gradient (neural)
    /// when absent.
    #[arg(long, value_enum)]
    reference: Option<Algorithm>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    WorstCasePair,
    RandomFlip,
}

#[derive(Args, Debug)]
struct PoisoningArgs {
    #[command(flatten)]
    common: CommonExperimentArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    per_config: usize,
    #[arg(long, value_enum, default_value = "worst-case-pair")]
    strategy: StrategyArg,
}

#[derive(Args, Debug)]
struct TtestArgs {
    /// Trials CSV of the first method.
    a: PathBuf,
    /// Trials CSV of the second method, paired by (param, replication).
    b: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Apt,
    Botnet,
}

#[derive(Args, Debug)]
struct CaseStudyArgs {
    #[arg(long, value_enum)]
    profile: ProfileArg,
    /// Also write the full report as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Data, model or solver failure (exit code 2).
#[derive(Debug)]
struct DataError(anyhow::Error);

fn main() -> ExitCode {
    let level = std::env::var("FDPKIT_LOG").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.0);
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), DataError> {
    let r = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Learn(a) => learn(a),
        Command::Plan(a) => plan(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::Casestudy(a) => casestudy(a),
    };
    r.map_err(DataError)
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("cannot write to stdout"),
        _ => Ok(()),
    }
}

/// `-` reads standard input.
fn read(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("cannot read standard input")?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// `dir/name.ext` → `dir/name` + `suffix`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(output: &Path, mut manifest: Manifest, outputs: &[&Path]) -> anyhow::Result<()> {
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    write(&with_suffix(output, ".manifest.json"), &manifest.to_json_string()?)
}

fn load_instance(path: &Path) -> anyhow::Result<FdpInstance> {
    FdpInstance::from_json_str(&read(path)?).with_context(|| format!("invalid instance {}", path.display()))
}

fn load_model(model: &Option<PathBuf>, instance: &Path) -> anyhow::Result<(ScoreModel, PathBuf)> {
    let path = model.clone().unwrap_or_else(|| sibling(instance, ".model.json"));
    let m = model_from_json_str(&read(&path)?).with_context(|| format!("invalid model {}", path.display()))?;
    Ok((m, path))
}

fn load_dataset(prefix: &Path) -> anyhow::Result<AttackDataset> {
    let (c, o) = (with_suffix(prefix, ".configs.csv"), with_suffix(prefix, ".observations.csv"));
    let open = |p: &Path| fs::File::open(p).with_context(|| format!("cannot read {}", p.display()));
    AttackDataset::read_csv(open(&c)?, open(&o)?, None).with_context(|| format!("invalid dataset {}", prefix.display()))
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let spec = InstanceGenSpec {
        n: a.n,
        m: a.m,
        family: a.family.into(),
        seed: a.seed,
    };
    let inst = generate_instance(&spec)?;
    let truth = generate_truth_model(spec.family.model_family(), a.m, fdpkit::rng::derive_seed(a.seed, 1));
    let model_path = sibling(&a.output, ".model.json");
    write(&a.output, &inst.to_json_string()?)?;
    write(&model_path, &truth.to_json_string()?)?;
    log::info!("wrote {} and {}", a.output.display(), model_path.display());
    write_manifest(
        &a.output,
        Manifest::new("generate", Some(a.seed), serde_json::to_value(&spec)?),
        &[&a.output, &model_path],
    )
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let inst = load_instance(&a.instance)?;
    let (model, model_path) = load_model(&a.model, &a.instance)?;
    let count = a.num_configs.unwrap_or(inst.m());
    if count == 0 || a.per_config == 0 {
        bail!("--num-configs and --per-config must be positive");
    }
    let configs = random_configs(inst.n(), inst.m(), count, fdpkit::rng::derive_seed(a.seed, 0));
    let data = simulate_dataset(&model, &configs, a.per_config, fdpkit::rng::derive_seed(a.seed, 1))?;
    let (c, o) = (with_suffix(&a.output, ".configs.csv"), with_suffix(&a.output, ".observations.csv"));
    let create = |p: &Path| fs::File::create(p).with_context(|| format!("cannot write {}", p.display()));
    data.write_csv(create(&c)?, create(&o)?)?;
    let mut manifest = Manifest::new(
        "simulate",
        Some(a.seed),
        json!({"num_configs": count, "per_config": a.per_config}),
    );
    manifest.inputs = vec![a.instance.display().to_string(), model_path.display().to_string()];
    write_manifest(&a.output, manifest, &[&c, &o])
}

fn parse_pairs(s: &str) -> anyhow::Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (x, y) = p.split_once(':').ok_or_else(|| anyhow!("pair {p:?} is not of the form s:t"))?;
            Ok((x.trim().parse()?, y.trim().parse()?))
        })
        .collect()
}

fn learn(a: LearnArgs) -> anyhow::Result<()> {
    let data = load_dataset(&a.data)?;
    let result = match a.method {
        LearnMethod::Cf => {
            let opts = ClosedFormOptions {
                pairs: a.pairs.as_deref().map(parse_pairs).transpose()?,
                smoothing: a.smoothing,
                ..Default::default()
            };
            closed_form_learn(&data, &opts)?
        }
        LearnMethod::Mle => mle_learn(&data, a.family.into(), &a.mle.hyper(a.seed))?,
    };
    if let Some(r) = &result.report {
        log::info!("{}", r.to_text());
    }
    write(&a.output, &result.to_json_string()?)?;
    let mut manifest = Manifest::new(
        "learn",
        Some(a.seed),
        json!({"method": format!("{:?}", a.method).to_lowercase(), "family": format!("{:?}", a.family).to_lowercase()}),
    );
    manifest.inputs = vec![a.data.display().to_string()];
    write_manifest(&a.output, manifest, &[&a.output])
}

fn dump_lp(path: &Path, inst: &FdpInstance, model: &ScoreModel, args: &PlannerArgs, plan: &PlanResult) -> anyhow::Result<()> {
    let ScoreModel::Classical { weights } = model else {
        bail!("--dump-lp needs a classical model");
    };
    let mut buf = Vec::new();
    match args.algorithm {
        Algorithm::Milp => build_fractional_model(inst, weights, args.eps)?.model.write_lp(&mut buf)?,
        Algorithm::MilpBs => {
            let delta = plan.surrogate_loss.unwrap_or(plan.expected_loss);
            build_bs_model(inst, weights, args.eps, delta)?.model.write_lp(&mut buf)?
        }
        _ => bail!("--dump-lp applies to --alg milp and milp-bs"),
    }
    fs::write(path, buf).with_context(|| format!("cannot write {}", path.display()))
}

fn plan(a: PlanArgs) -> anyhow::Result<()> {
    let inst = load_instance(&a.instance)?;
    let (model, model_path) = load_model(&a.model, &a.instance)?;
    let choice = a.planner.choice(a.seed);
    let result = choice.plan(&inst, &model)?;
    if let Some(p) = &a.dump_lp {
        dump_lp(p, &inst, &model, &a.planner, &result)?;
    }
    let text = result.to_json_string()?;
    match &a.output {
        Some(out) => {
            write(out, &text)?;
            let mut manifest = Manifest::new("plan", Some(a.seed), serde_json::to_value(&choice)?);
            manifest.inputs = vec![a.instance.display().to_string(), model_path.display().to_string()];
            let mut outs: Vec<&Path> = vec![out];
            if let Some(p) = &a.dump_lp {
                outs.push(p);
            }
            write_manifest(out, manifest, &outs)?;
        }
        None => emit(&format!("{text}\n"))?,
    }
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let inst = load_instance(&a.instance)?;
    let (model, model_path) = load_model(&a.model, &a.instance)?;
    let config = match &a.plan {
        Some(p) => PlanResult::from_json_str(&read(p)?).with_context(|| format!("invalid plan {}", p.display()))?.config,
        None => inst.actual().clone(),
    };
    let report = check_feasibility(&inst, &config)?;
    let mut out = json!({
        "expected_loss": expected_loss(&inst, &model, &config)?,
        "attack_distribution": model.attack_distribution(&config)?,
        "cost": report.cost,
        "feasible": report.is_feasible(),
    });
    if let Some(other) = &a.against {
        let b = model_from_json_str(&read(other)?).with_context(|| format!("invalid model {}", other.display()))?;
        let test = random_configs(inst.n(), inst.m(), a.test_configs.max(1), a.seed);
        out["tv_error"] = json!(tv_error(&model, &b, &test)?);
    }
    let text = serde_json::to_string_pretty(&out)?;
    match &a.output {
        Some(o) => {
            write(o, &text)?;
            let mut manifest = Manifest::new("eval", Some(a.seed), json!({"test_configs": a.test_configs}));
            manifest.inputs = [Some(&a.instance), Some(&model_path), a.plan.as_ref(), a.against.as_ref()]
                .into_iter()
                .flatten()
                .map(|p| p.display().to_string())
                .collect();
            write_manifest(o, manifest, &[o])?;
        }
        None => emit(&format!("{text}\n"))?,
    }
    Ok(())
}

fn write_experiment(common: &CommonExperimentArgs, kind: &str, spec: serde_json::Value, out: &ExperimentOutput) -> anyhow::Result<()> {
    let mut table = Vec::new();
    out.table.write_csv(&mut table)?;
    write(&common.output, std::str::from_utf8(&table)?)?;
    let trials_path = sibling(&common.output, ".trials.csv");
    let mut trials = Vec::new();
    out.write_trials_csv(&mut trials)?;
    write(&trials_path, std::str::from_utf8(&trials)?)?;
    emit(std::str::from_utf8(&table)?)?;
    write_manifest(&common.output, Manifest::new(kind, Some(common.seed), spec), &[&common.output, &trials_path])
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    if let ExperimentKind::Ttest(t) = &a.kind {
        return ttest(t);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    pool.install(|| match a.kind {
        ExperimentKind::LearningCurve(l) => {
            let spec = LearningCurveSpec {
                family: l.family.into(),
                n: l.common.n,
                m: l.common.m,
                sample_grid: l.samples.clone(),
                replications: l.common.reps,
                test_configs: l.test_configs,
                hyper: l.mle.hyper(l.common.seed),
                seed: l.common.seed,
            };
            let out = run_learning_curve(&spec)?;
            write_experiment(&l.common, "experiment learning-curve", serde_json::to_value(&spec)?, &out)
        }
        ExperimentKind::EndToEnd(e) => {
            let learner = match e.learner {
                LearnMethod::Cf => LearnerChoice::ClosedForm { smoothing: false },
                LearnMethod::Mle => LearnerChoice::Mle(e.mle.hyper(e.common.seed)),
            };
            let reference = e.reference.map(|alg| {
                PlannerArgs {
                    algorithm: alg,
                    ..e.planner.clone()
                }
                .choice(e.common.seed)
            });
            let spec = EndToEndSpec {
                instance_family: e.family.into(),
                n: e.common.n,
                m: e.common.m,
                sample_grid: e.samples.clone(),
                learner,
                planner: e.planner.choice(e.common.seed),
                reference,
                replications: e.common.reps,
                seed: e.common.seed,
            };
            let out = run_end_to_end(&spec)?;
            write_experiment(&e.common, "experiment end-to-end", serde_json::to_value(&spec)?, &out)
        }
        ExperimentKind::Poisoning(p) => {
            let spec = PoisoningSpec {
                n: p.common.n,
                m: p.common.m,
                gammas: p.gammas.clone(),
                epsilon: p.eps,
                samples_per_config: p.per_config,
                replications: p.common.reps,
                strategy: match p.strategy {
                    StrategyArg::WorstCasePair => PoisonStrategy::WorstCasePair,
                    StrategyArg::RandomFlip => PoisonStrategy::RandomFlip,
                },
                seed: p.common.seed,
            };
            let out = run_poisoning_experiment(&spec)?;
            write_experiment(&p.common, "experiment poisoning", serde_json::to_value(&spec)?, &out)
        }
        ExperimentKind::Ttest(_) => unreachable!("handled above"),
    })
}

fn read_trials(path: &Path) -> anyhow::Result<Vec<((u64, usize), f64)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for rec in reader.deserialize::<(f64, usize, f64)>() {
        let (param, rep, value) = rec.with_context(|| format!("invalid trials file {}", path.display()))?;
        out.push(((param.to_bits(), rep), value));
    }
    Ok(out)
}

fn ttest(t: &TtestArgs) -> anyhow::Result<()> {
    let a = read_trials(&t.a)?;
    let b: std::collections::HashMap<_, _> = read_trials(&t.b)?.into_iter().collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (key, v) in a {
        if let Some(&w) = b.get(&key) {
            xs.push(v);
            ys.push(w);
        }
    }
    let stat = paired_t_statistic(&xs, &ys)?;
    emit(&format!("{}\n", json!({"pairs": xs.len(), "t": stat})))?;
    Ok(())
}

fn casestudy(a: CaseStudyArgs) -> anyhow::Result<()> {
    let profile = match a.profile {
        ProfileArg::Apt => CaseStudyProfile::Apt,
        ProfileArg::Botnet => CaseStudyProfile::Botnet,
    };
    let report = run_case_study(profile)?;
    emit(&report.to_text())?;
    if let Some(out) = &a.output {
        write(out, &serde_json::to_string_pretty(&report)?)?;
        write_manifest(out, Manifest::new("casestudy", None, json!({"profile": profile})), &[out])?;
    }
    Ok(())
}
