//! `rlad`: run the detector-selection pipeline whole or one stage at a time.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlad_core::config::{ContaminationSetting, ExperimentConfig};
use rlad_core::detectors::{self, KnnMethod, UsadParams};
use rlad_core::metrics::{EvalReport, Metrics};
use rlad_core::pipeline::{self, RunReport, TsfSummary, SELECTOR_NAME};
use rlad_core::selector::{EvalStep, LogRow};
use rlad_core::series::{self, CsvSchema, LabelRule, Preprocessing, WindowParams};
use rlad_core::{
    report, signals, DetectorKind, DetectorModel, DetectorOutput, DqnConfig, DqnPolicy, EpsilonSchedule, Error,
    Hyperparams, InjectionKind, InjectionPlan, RewardKind, RewardMode, RewardSpec, ScalerKind, ScalerSpec,
    SelectionEnv, SignalTable, TsfParams, WindowSet,
};

#[derive(Parser)]
#[command(name = "rlad", version, about = "Detector pool, correctness forests and DQN detector selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inject synthetic anomalies into a series CSV.
    Inject(InjectArgs),
    /// Fit one detector on a normal series.
    Fit(FitArgs),
    /// Score a series with a fitted detector.
    Score(ScoreArgs),
    /// Threshold raw scores into labels.
    Threshold(ThresholdArgs),
    /// Assemble the per-window signal table from six thresholded score files.
    Signals(SignalsArgs),
    /// Train one correctness forest per detector.
    TsfTrain(TsfTrainArgs),
    /// Train the selection policy.
    RlTrain(RlTrainArgs),
    /// Greedy evaluation of a trained policy.
    Evaluate(EvaluateArgs),
    /// Render metric tables and plots from run reports.
    Report(ReportArgs),
    /// Run the full pipeline from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "mixed")]
    kind: InjectionKind,
    #[arg(long, default_value_t = 0.05)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    cluster_min: usize,
    #[arg(long, default_value_t = 6)]
    cluster_max: usize,
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, default_value_t = 6)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value = "any")]
    label_rule: LabelRule,
    #[arg(long, default_value = "minmax")]
    scaler: ScalerKind,
}

#[derive(Args)]
struct FitArgs {
    /// Clean training series.
    #[arg(long)]
    normal: PathBuf,
    #[arg(long)]
    detector: DetectorKind,
    /// Model JSON; the fitted scaler and window settings go to `<stem>.prep.json`.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    knn_method: Option<KnnMethod>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    osvm_max_train: Option<usize>,
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    max_features: Option<f64>,
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    usad_alpha: Option<f64>,
    #[arg(long)]
    usad_epochs: Option<usize>,
    #[arg(long)]
    usad_max_train: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    /// Defaults to `<model stem>.prep.json`.
    #[arg(long)]
    prep: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    /// Raw scores CSV.
    #[arg(long)]
    output: PathBuf,
    /// Also write the scaled windows with their labels.
    #[arg(long)]
    windows_out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    detector: DetectorKind,
    #[arg(long)]
    output: PathBuf,
    /// Fraction in (0, 1), or `auto` for the labelled anomaly count.
    #[arg(long, default_value = "0.05")]
    contamination: ContaminationSetting,
    /// Window file carrying labels; required for `auto`.
    #[arg(long)]
    windows: Option<PathBuf>,
}

#[derive(Args)]
struct SignalsArgs {
    #[arg(long)]
    windows: PathBuf,
    /// Directory holding `<detector>.csv` threshold outputs for all six detectors.
    #[arg(long)]
    scores_dir: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TsfTrainArgs {
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    #[arg(long, default_value_t = 1)]
    min_interval: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RlTrainArgs {
    /// Signal table with forest predictions, as written by `tsf-train`.
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    policy_out: PathBuf,
    #[arg(long)]
    log_out: PathBuf,
    #[arg(long, default_value = "original")]
    reward: RewardKind,
    #[arg(long, default_value = "mixed")]
    mode: RewardMode,
    #[arg(long, default_value_t = 100)]
    counter_period: usize,
    /// Exchange the FP and FN reward constants.
    #[arg(long)]
    swap_errors: bool,
    /// `decaying` or `constant`.
    #[arg(long, default_value = "decaying")]
    epsilon: String,
    #[arg(long, default_value_t = 1.0)]
    epsilon_start: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon_end: f64,
    #[arg(long, default_value_t = 0.7)]
    epsilon_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon_value: f64,
    #[arg(long, default_value_t = 60_000)]
    total_steps: usize,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Per-window choices and labels.
    #[arg(long)]
    output: PathBuf,
    /// Metrics for the six detectors and the selector.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set reward.kind=r1`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Stage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Stage(e),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Inject(a) => inject(a),
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Threshold(a) => threshold(a),
        Command::Signals(a) => build_signals(a),
        Command::TsfTrain(a) => tsf_train(a),
        Command::RlTrain(a) => rl_train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => emit(a),
        Command::Run(a) => run(a),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::from)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| Failure::Stage(Error::InvalidInput(format!("{}: {e}", path.display()))))
}

fn inject(a: InjectArgs) -> CliResult<()> {
    let ts = series::load_csv(&a.input, &CsvSchema::default())?;
    let mut plan = InjectionPlan::new(a.kind, a.rate, a.seed);
    plan.cluster_len_range = (a.cluster_min, a.cluster_max);
    let out = rlad_core::inject::inject(&ts, &plan)?;
    out.write_csv(create(&a.output)?)?;
    println!("injected {} anomalous points into {} ({})", out.anomaly_count(), a.output.display(), a.kind);
    Ok(())
}

fn prep_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model.with_file_name(format!("{stem}.prep.json"))
}

fn fit_params(a: &FitArgs) -> Hyperparams {
    match Hyperparams::default_for(a.detector).with_seed(a.seed) {
        Hyperparams::Knn { n_neighbors, method } => Hyperparams::Knn {
            n_neighbors: a.n_neighbors.unwrap_or(n_neighbors),
            method: a.knn_method.unwrap_or(method),
        },
        Hyperparams::Osvm { nu, gamma, max_train } => Hyperparams::Osvm {
            nu: a.nu.unwrap_or(nu),
            gamma,
            max_train: a.osvm_max_train.unwrap_or(max_train),
        },
        Hyperparams::IForest { n_estimators, max_features, max_samples, seed } => Hyperparams::IForest {
            n_estimators: a.n_estimators.unwrap_or(n_estimators),
            max_features: a.max_features.unwrap_or(max_features),
            max_samples: a.max_samples.unwrap_or(max_samples),
            seed,
        },
        Hyperparams::Usad { params, max_train } => Hyperparams::Usad {
            params: UsadParams {
                alpha: a.usad_alpha.unwrap_or(params.alpha),
                beta: 1.0 - a.usad_alpha.unwrap_or(params.alpha),
                epochs: a.usad_epochs.unwrap_or(params.epochs),
                ..params
            },
            max_train: a.usad_max_train.unwrap_or(max_train),
        },
        other => other,
    }
}

fn fit(a: FitArgs) -> CliResult<()> {
    let normal = series::load_csv(&a.normal, &CsvSchema::default())?;
    let prep = Preprocessing {
        scaler: ScalerSpec::fit(&normal, a.window.scaler)?,
        window: WindowParams { width: a.window.width, step: a.window.step, label_rule: a.window.label_rule, ..Default::default() },
    };
    let windows = prep.windows(&normal)?;
    let params = fit_params(&a);
    let model = DetectorModel::fit(&windows, &params)?;
    model.write_json(create(&a.output)?)?;
    prep.save(prep_path(&a.output))?;
    println!("fitted {} on {} windows: {}", a.detector, windows.len(), params.describe());
    Ok(())
}

fn score(a: ScoreArgs) -> CliResult<()> {
    let model = DetectorModel::read_json(open(&a.model)?)?;
    let prep = Preprocessing::load(a.prep.unwrap_or_else(|| prep_path(&a.model)))?;
    let ts = series::load_csv(&a.input, &CsvSchema::default())?;
    let windows = prep.windows(&ts)?;
    let raw = model.score(&windows)?;
    detectors::write_raw_scores(&windows, &raw, create(&a.output)?)?;
    if let Some(p) = a.windows_out {
        windows.write_csv(create(&p)?)?;
    }
    println!("scored {} windows with {}", raw.len(), model.kind());
    Ok(())
}

fn threshold(a: ThresholdArgs) -> CliResult<()> {
    let raw = detectors::read_raw_scores(open(&a.scores)?)?;
    let contamination = match (a.contamination, &a.windows) {
        (ContaminationSetting::Auto, None) => {
            return Err(Failure::Usage("--contamination auto needs --windows with labels".into()))
        }
        (c, Some(p)) => c.resolve(&WindowSet::read_csv(open(p)?)?.labels),
        (c, None) => c.resolve(&[]),
    };
    let out = detectors::threshold_and_label(a.detector, &raw, contamination)?;
    out.write_csv(create(&a.output)?)?;
    println!("{}: flagged {} of {} windows, threshold {}", a.detector, out.flagged(), raw.len(), out.threshold);
    Ok(())
}

fn build_signals(a: SignalsArgs) -> CliResult<()> {
    let windows = WindowSet::read_csv(open(&a.windows)?)?;
    let outputs = DetectorKind::ALL
        .iter()
        .map(|&k| Ok(DetectorOutput::read_csv(k, open(&a.scores_dir.join(format!("{}.csv", k.slug())))?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let table = signals::assemble(&windows, &outputs)?;
    table.write_csv(create(&a.output)?)?;
    println!("wrote {} rows x {} features", table.len(), table.n_features());
    Ok(())
}

fn tsf_train(a: TsfTrainArgs) -> CliResult<()> {
    let table = SignalTable::read_csv(open(&a.signals)?)?;
    let mut cfg = ExperimentConfig::default();
    cfg.tsf.params = TsfParams { n_trees: a.n_trees, min_interval: a.min_interval, max_depth: a.max_depth, seed: a.seed };
    cfg.tsf.train_fraction = a.train_fraction;
    let stage = pipeline::run_tsf(&cfg, &table)?;
    for (m, metrics) in stage.models.iter().zip(&stage.test_metrics) {
        m.write_json(create(&a.out_dir.join(format!("tsf_{}.json", m.kind.slug())))?)?;
        println!("{:<8} held-out F1 {:.3}", m.kind.name(), metrics.f1);
    }
    pipeline::write_signals_tsf(&table, &stage.predictions, &stage.gt_mask, create(&a.out_dir.join("signals_tsf.csv"))?)?;
    Ok(())
}

fn epsilon_schedule(a: &RlTrainArgs) -> CliResult<EpsilonSchedule> {
    match a.epsilon.as_str() {
        "decaying" => Ok(EpsilonSchedule::Decaying { start: a.epsilon_start, end: a.epsilon_end, fraction: a.epsilon_fraction }),
        "constant" => Ok(EpsilonSchedule::Constant { value: a.epsilon_value }),
        other => Err(Failure::Usage(format!("unknown epsilon schedule `{other}`"))),
    }
}

fn rl_train(a: RlTrainArgs) -> CliResult<()> {
    let schedule = epsilon_schedule(&a)?;
    let (table, preds, mask) = pipeline::read_signals_tsf(&a.signals)?;
    let mut reward = RewardSpec::new(a.reward, a.mode);
    reward.counter_period = a.counter_period;
    reward.swap_errors = a.swap_errors;
    let mut env = SelectionEnv::new(&table, &preds, &mask, reward)?;
    let mut cfg = DqnConfig { hidden: a.hidden.clone(), seed: a.seed, ..DqnConfig::default() };
    if let Some(lr) = a.learning_rate {
        cfg.learning_rate = lr;
    }
    let mut policy = DqnPolicy::new(env.state_dim(), cfg)?;
    let outcome = policy.train(&mut env, a.total_steps, &schedule)?;
    policy.save(&a.policy_out)?;
    outcome.write_csv(create(&a.log_out)?)?;
    let last = outcome.log.last().map_or(f64::NAN, |r: &LogRow| r.episode_return);
    println!("trained {} steps, {} updates, last episode return {last:.3}", a.total_steps, outcome.updates);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let (table, preds, mask) = pipeline::read_signals_tsf(&a.signals)?;
    let policy = DqnPolicy::load(&a.policy)?;
    let env = SelectionEnv::new(&table, &preds, &mask, RewardSpec::default())?;
    let steps = policy.evaluate(&env)?;
    EvalStep::write_csv(&steps, create(&a.output)?)?;
    let truth = &table.ground_truth;
    let selected = Metrics::compute(&EvalStep::labels(&steps), truth)?;
    println!("{SELECTOR_NAME}: P {:.3} R {:.3} F1 {:.3}", selected.precision, selected.recall, selected.f1);
    if let Some(p) = a.report_out {
        let hash = policy.config.hash();
        let seed = policy.config.seed;
        let mut systems = table
            .detectors
            .iter()
            .map(|d| Ok(EvalReport::new(d.kind.name(), Metrics::compute(&d.labels, truth)?, &hash, seed, "")))
            .collect::<CliResult<Vec<_>>>()?;
        systems.push(EvalReport::new(SELECTOR_NAME, selected, &hash, seed, ""));
        let report = RunReport {
            name: a.signals.display().to_string(),
            config_hash: hash,
            dataset_fingerprint: String::new(),
            reward: String::new(),
            reward_mode: String::new(),
            epsilon: String::new(),
            windows: truth.len(),
            anomalous_windows: truth.iter().filter(|&&g| g == 1).count(),
            flagged_per_detector: table.detectors[0].labels.iter().filter(|&&l| l == 1).count(),
            systems,
            tsf: Vec::<TsfSummary>::new(),
            tuned: vec![],
            training: vec![],
        };
        fs::write(&p, report.to_json()?).map_err(Error::from)?;
    }
    Ok(())
}

fn emit(a: ReportArgs) -> CliResult<()> {
    let reports = a.reports.iter().map(|p| Ok(RunReport::load(p)?)).collect::<CliResult<Vec<_>>>()?;
    let files = report::emit_report(&reports, &a.out_dir, !a.no_plots)?;
    for f in files {
        println!("{}", a.out_dir.join(f).display());
    }
    Ok(())
}

fn run(a: RunArgs) -> CliResult<()> {
    let text = match &a.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::from_ini_with_overrides(&text, &a.overrides)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    if a.no_plots {
        cfg.plots = false;
    }
    cfg.validate()?;
    let report = pipeline::run_experiment(&cfg)?;
    println!("{}", report::summary_line(&report));
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}
