use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use taskmerge_core::eval::{self, DEFAULT_TAU};
use taskmerge_core::oracle::DEFAULT_SEED;
use taskmerge_core::workload::read_workload;
use taskmerge_core::{
    fit_naive, generate_dataset, run_sim, split, sweep, AnyModel, Axis, Dataset, FeatureVector,
    Hyperparams, MergePolicy, NaiveModel, OracleConfig, Predictor, SweepSpec,
};

/// Predict and simulate the time saved by merging similar transcoding tasks.
#[derive(Parser)]
#[command(name = "taskmerge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled merge-saving dataset from the synthetic oracle.
    Gen(GenArgs),
    /// Train a boosted-tree model on a dataset CSV.
    Train(TrainArgs),
    /// Predict merge-saving with a trained model.
    Predict(PredictArgs),
    /// Score a model on a labelled dataset, overall and per merging degree.
    Eval(EvalArgs),
    /// Train over a grid of one or two hyperparameters and report RMSE.
    Sweep(SweepArgs),
    /// Simulate a batch of tasks with and without merging.
    Simulate(SimulateArgs),
    /// Print the oracle configuration file with default values.
    Config(ConfigArgs),
}

#[derive(Args)]
struct OracleArgs {
    /// Oracle configuration file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oracle noise seed [default: the config file's seed, else 20210614].
    #[arg(long)]
    seed: Option<u64>,
    /// Override the log-normal noise sigma of VIC tasks.
    #[arg(long)]
    vic_noise: Option<f64>,
    /// Override the log-normal noise sigma of codec tasks.
    #[arg(long)]
    codec_noise: Option<f64>,
}

impl OracleArgs {
    fn load(&self) -> Result<OracleConfig> {
        let mut cfg = match &self.config {
            Some(p) => OracleConfig::load(p)?,
            None => OracleConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(s) = self.vic_noise {
            cfg.vic_noise_sigma = s;
        }
        if let Some(s) = self.codec_noise {
            cfg.codec_noise_sigma = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct HyperArgs {
    /// Number of boosting rounds (M).
    #[arg(long, default_value_t = Hyperparams::default().num_trees)]
    trees: usize,
    /// Shrinkage per tree (L), in (0, 1].
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    learning_rate: f64,
    /// Maximum tree depth (D).
    #[arg(long, default_value_t = Hyperparams::default().max_depth)]
    max_depth: usize,
    /// Minimum samples needed to split a node (S).
    #[arg(long, default_value_t = Hyperparams::default().min_samples_split)]
    min_split: usize,
    /// Minimum samples per leaf (J).
    #[arg(long, default_value_t = Hyperparams::default().min_samples_leaf)]
    min_leaf: usize,
}

impl HyperArgs {
    fn params(&self) -> Result<Hyperparams> {
        let hp = Hyperparams {
            num_trees: self.trees,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            min_samples_split: self.min_split,
            min_samples_leaf: self.min_leaf,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Fraction of samples used for training; the rest is the test set.
    #[arg(long, default_value_t = 0.8)]
    split_fraction: f64,
    /// Seed of the train/test shuffle.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Number of synthetic video segments.
    #[arg(long, default_value_t = 100)]
    videos: usize,
    /// Merge cases sampled per segment.
    #[arg(long, default_value_t = 50)]
    cases: usize,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Error tolerance for the reported test accuracy.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Also write the training part of the split.
    #[arg(long)]
    train_out: Option<PathBuf>,
    /// Also write the held-out test part of the split.
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Also fit the lookup baseline on the training part and save it here.
    #[arg(long)]
    naive_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// One feature row: duration_s,size_kb,framerate,width,height,b_count,s_count,r_count,mpeg4,vp9,hevc.
    #[arg(
        long,
        conflicts_with = "data",
        required_unless_present = "data",
        allow_hyphen_values = true
    )]
    features: Option<String>,
    /// Dataset CSV whose rows should be predicted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Labelled dataset CSV, usually the held-out test set.
    #[arg(long)]
    data: PathBuf,
    /// Error tolerance: a prediction is correct when |P - E| <= tau.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Lookup-baseline model to compare against.
    #[arg(long, conflicts_with = "baseline_data")]
    baseline: Option<PathBuf>,
    /// Training CSV to fit the lookup baseline on for comparison.
    #[arg(long)]
    baseline_data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    /// Number of trees.
    M,
    /// Learning rate.
    L,
    /// Maximum depth.
    D,
    /// Minimum samples to split.
    S,
    /// Minimum samples per leaf.
    J,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::M => Axis::NumTrees,
            AxisArg::L => Axis::LearningRate,
            AxisArg::D => Axis::MaxDepth,
            AxisArg::S => Axis::MinSamplesSplit,
            AxisArg::J => Axis::MinSamplesLeaf,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Dataset CSV; split into train and test unless --test-data is given.
    #[arg(long)]
    data: PathBuf,
    /// Separate test CSV; --data is then used whole for training.
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Hyperparameter to vary.
    #[arg(long, value_enum, ignore_case = true)]
    axis: AxisArg,
    /// Strictly ordered comma-separated values for the axis.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Optional second hyperparameter, one curve per value.
    #[arg(long, value_enum, ignore_case = true, requires = "series_values")]
    series_axis: Option<AxisArg>,
    /// Values of the series axis.
    #[arg(long, value_delimiter = ',', requires = "series_axis")]
    series_values: Vec<f64>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Run every task on its own.
    Never,
    /// Merge every group the signature tables form.
    Always,
    /// Merge a group only if the model predicts at least --threshold.
    Threshold,
}

#[derive(Args)]
struct SimulateArgs {
    /// Workload CSV: task_id,segment_id,duration_s,size_kb,framerate,width,height,kind,parameter.
    #[arg(long)]
    workload: PathBuf,
    /// Merge policy.
    #[arg(long, value_enum, default_value_t = PolicyArg::Always)]
    policy: PolicyArg,
    /// Minimum predicted saving for the threshold policy, in [0, 1).
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Model used by the threshold policy; also fills predicted_saving in the trace.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of identical workers.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Per-group CSV trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct ConfigArgs {
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their cause; print each text once.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => evaluate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => simulate(a),
        Command::Config(a) => {
            let mut out = output(a.out.as_deref())?;
            out.write_all(OracleConfig::default().to_text().as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Ok(Dataset::read_csv(path)?)
}

fn load_model(path: &Path) -> Result<AnyModel> {
    AnyModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let cfg = a.oracle.load()?;
    let data = generate_dataset(a.videos, a.cases, &cfg)?;
    let mut out = output(a.out.as_deref())?;
    data.write_csv_to(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.out {
        eprintln!("wrote {} samples to {}", data.len(), p.display());
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let hp = a.hyper.params()?;
    let data = read_dataset(&a.data)?;
    let (train_set, test_set) = split(&data, a.split.split_fraction, a.split.seed)?;
    let model = taskmerge_core::train(&train_set, &hp)?;
    model
        .save(&a.out)
        .with_context(|| format!("writing model {}", a.out.display()))?;

    let train_pred = eval::predict_all(&model, &train_set);
    println!(
        "hyperparameters: M={} L={} D={} S={} J={}",
        hp.num_trees, hp.learning_rate, hp.max_depth, hp.min_samples_split, hp.min_samples_leaf
    );
    println!(
        "train: n={} rmse={:.5}",
        train_set.len(),
        eval::rmse(&train_pred, &train_set.targets())?
    );
    println!("test:  {}", eval::evaluate(&model, &test_set, a.tau)?);
    for (path, part) in [(&a.train_out, &train_set), (&a.test_out, &test_set)] {
        if let Some(p) = path {
            part.write_csv(p)?;
        }
    }
    if let Some(p) = &a.naive_out {
        fit_naive(&train_set)?.save(p)?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut out = output(a.out.as_deref())?;
    if let Some(row) = &a.features {
        let fv: FeatureVector = row.parse()?;
        writeln!(out, "{}", model.predict(&fv))?;
    } else if let Some(path) = &a.data {
        let data = read_dataset(path)?;
        writeln!(out, "predicted_saving,saving")?;
        for s in &data.samples {
            writeln!(out, "{},{}", model.predict(&s.features), s.target)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = read_dataset(&a.data)?;
    let baseline: Option<NaiveModel> = match (&a.baseline, &a.baseline_data) {
        (Some(p), _) => {
            Some(NaiveModel::load(p).with_context(|| format!("loading {}", p.display()))?)
        }
        (None, Some(p)) => Some(fit_naive(&read_dataset(p)?)?),
        (None, None) => None,
    };
    println!("model: {}", model.kind());
    println!("overall: {}", eval::evaluate(&model, &data, a.tau)?);
    if let Some(b) = &baseline {
        println!("naive:   {}", eval::evaluate(b, &data, a.tau)?);
    }
    let by_degree = eval::evaluate_by_degree(&model, &data, a.tau)?;
    let naive_by_degree = match &baseline {
        Some(b) => Some(eval::evaluate_by_degree(b, &data, a.tau)?),
        None => None,
    };
    print!("degree,count,rmse,accuracy_pct");
    if naive_by_degree.is_some() {
        print!(",naive_rmse,naive_accuracy_pct");
    }
    println!();
    for (d, r) in &by_degree {
        print!("{d},{},{:.5},{:.2}", r.count, r.rmse, r.accuracy_pct);
        if let Some(n) = naive_by_degree.as_ref().and_then(|m| m.get(d)) {
            print!(",{:.5},{:.2}", n.rmse, n.accuracy_pct);
        }
        println!();
    }
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let fixed = a.hyper.params()?;
    let data = read_dataset(&a.data)?;
    let (train_set, test_set) = match &a.test_data {
        Some(p) => (data, read_dataset(p)?),
        None => split(&data, a.split.split_fraction, a.split.seed)?,
    };
    let mut spec = SweepSpec::new(a.axis.into(), a.values, fixed);
    if let Some(axis) = a.series_axis {
        spec = spec.with_series(axis.into(), a.series_values);
    }
    let rows = sweep(&spec, &train_set, &test_set)?;
    let mut out = output(a.out.as_deref())?;
    eval::write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = a.oracle.load()?;
    let tasks = read_workload(&a.workload)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let policy = match a.policy {
        PolicyArg::Never => MergePolicy::Never,
        PolicyArg::Always => MergePolicy::Always,
        PolicyArg::Threshold => {
            if model.is_none() {
                bail!("--policy threshold needs --model");
            }
            MergePolicy::Threshold(a.threshold)
        }
    };
    let report = run_sim(
        &tasks,
        policy,
        model.as_ref().map(|m| m as &dyn Predictor),
        &cfg,
        a.workers,
    )?;
    println!("{report}");
    if let Some(p) = &a.trace {
        let mut out = output(Some(p))?;
        report.write_trace(&mut out)?;
        out.flush()?;
    }
    Ok(())
}
