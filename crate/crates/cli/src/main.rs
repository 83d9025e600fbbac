use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bias_meter::dataset::{read_dataset, write_dataset};
use bias_meter::gp::{GradientReduction, StepSize, DEFAULT_JITTER};
use bias_meter::loss::{write_histogram_csv, FitMethod, TailMode};
use bias_meter::pipeline::{
    estimate, generate_task, replay, run_pipeline, sample_hypotheses, write_run, EstimateConfig, KernelSolver,
    PhaseError, PipelineConfig, Preset, RunManifest, SpaceConfig, SpaceKind, Target, TaskConfig, BIAS_FILE,
    HISTOGRAM_FILE,
};
use bias_meter::samples::{read_samples, write_samples};
use bias_meter::tasks::{SyntheticGpSpec, DEFAULT_NUM_FEATURES};
use bias_meter::Error;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

const DATA_DIR_ENV: &str = "BIAS_METER_DATA_DIR";

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Estimate the inductive bias a task requires from sampled hypotheses.
#[derive(Parser)]
#[command(name = "bias-meter", version)]
struct Cli {
    /// Worker threads for parallel phases; 1 forces fully sequential execution.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task and write its dataset CSVs and manifest.
    GenerateTask {
        #[command(flatten)]
        task: TaskArgs,
        /// Output directory [default: $BIAS_METER_DATA_DIR/<task>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample hypotheses on a generated dataset.
    Sample {
        /// Dataset directory written by generate-task.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory [default: <data>/samples].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the loss distribution and report the bias.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// Samples directory written by sample.
        #[arg(long)]
        samples: PathBuf,
        #[command(flatten)]
        opts: EstimateArgs,
        /// Output directory for bias.json and histogram.csv [default: the samples directory].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, sample and estimate in one seeded run.
    Pipeline {
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        opts: EstimateArgs,
        /// Output directory [default: $BIAS_METER_DATA_DIR/run].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the configuration stored in a run manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskName {
    Pendulum,
    SyntheticGp,
    MnistSubset,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long, value_enum)]
    task: TaskName,
    #[arg(long, visible_alias = "train")]
    n_train: Option<usize>,
    #[arg(long, visible_alias = "test")]
    n_test: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory with the four MNIST IDX files (mnist-subset).
    #[arg(long)]
    idx_dir: Option<PathBuf>,
    /// Standardize pixel columns (mnist-subset).
    #[arg(long)]
    standardize: bool,
    /// Input dimension (synthetic-gp).
    #[arg(long, default_value_t = 2)]
    input_dim: usize,
    /// Output channels (synthetic-gp).
    #[arg(long, default_value_t = 1)]
    output_dim: usize,
    /// Random Fourier features (synthetic-gp).
    #[arg(long, default_value_t = DEFAULT_NUM_FEATURES)]
    features: usize,
    /// Kernel bandwidth of the generating function space (synthetic-gp).
    #[arg(long, default_value_t = 1.0)]
    gp_bandwidth: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceName {
    Kernel,
    Nn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReductionArg {
    Sum,
    Mean,
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long, value_enum, default_value = "kernel")]
    space: SpaceName,
    /// desk, paper-pendulum or paper-mnist.
    #[arg(long, default_value = "desk", value_parser = parse_preset)]
    preset: Preset,
    /// Number of hypotheses S.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,

    /// RBF bandwidth γ.
    #[arg(long, help_heading = "Kernel space")]
    bandwidth: Option<f64>,
    /// Step size for α: a positive number or `auto`.
    #[arg(long, help_heading = "Kernel space")]
    lr_alpha: Option<StepSize>,
    /// Step size for A: a positive number or `auto`.
    #[arg(long, help_heading = "Kernel space")]
    lr_a: Option<StepSize>,
    /// Rows per kernel-block group.
    #[arg(long, help_heading = "Kernel space")]
    group: Option<usize>,
    #[arg(long, value_enum, help_heading = "Kernel space")]
    reduction: Option<ReductionArg>,
    /// Use the exact Cholesky posterior instead of SGD.
    #[arg(long, help_heading = "Kernel space")]
    exact: bool,
    #[arg(long, help_heading = "Kernel space")]
    jitter: Option<f64>,

    #[arg(long, help_heading = "NN space")]
    width: Option<usize>,
    /// Hidden ReLU layers.
    #[arg(long, help_heading = "NN space")]
    depth: Option<usize>,
    #[arg(long, help_heading = "NN space")]
    adam_lr: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitArg {
    Mom,
    Mle,
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).args(["epsilon", "accuracy"])))]
struct EstimateArgs {
    /// Target test error ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Model accuracy a; the bias is evaluated at ε = 1 − a.
    #[arg(long)]
    accuracy: Option<f64>,
    #[arg(long, value_enum, default_value = "mle")]
    fit: FitArg,
    /// auto, exact, sankaran or chernoff.
    #[arg(long, default_value = "auto")]
    tail: TailMode,
    #[arg(long, default_value_t = bias_meter::pipeline::DEFAULT_BINS)]
    bins: usize,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
    Phase(PhaseError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("bias-meter-data"))
}

fn task_config(args: &TaskArgs, preset: Preset) -> Result<TaskConfig, Failure> {
    let full_scale = preset != Preset::Desk;
    Ok(match args.task {
        TaskName::Pendulum => TaskConfig::Pendulum {
            n_train: args.n_train.unwrap_or(if full_scale { 10_000 } else { 2000 }),
            n_test: args.n_test.unwrap_or(100),
            seed: args.seed,
        },
        TaskName::SyntheticGp => TaskConfig::SyntheticGp {
            n_train: args.n_train.unwrap_or(1000),
            n_test: args.n_test.unwrap_or(100),
            spec: SyntheticGpSpec {
                num_features: args.features,
                input_dim: args.input_dim,
                output_dim: args.output_dim,
                bandwidth: args.gp_bandwidth,
                seed: args.seed,
            },
        },
        TaskName::MnistSubset => TaskConfig::MnistSubset {
            n_train: args.n_train.unwrap_or(if full_scale { 60_000 } else { 500 }),
            n_test: args.n_test.unwrap_or(if full_scale { 10_000 } else { 100 }),
            seed: args.seed,
            standardize: args.standardize,
            idx_dir: args
                .idx_dir
                .clone()
                .ok_or_else(|| Failure::Usage("--task mnist-subset requires --idx-dir".into()))?,
        },
    })
}

/// Preset defaults overridden by explicit flags.
fn space_config(args: &SpaceArgs, seed: u64) -> Result<(SpaceConfig, usize), Failure> {
    let kind = match args.space {
        SpaceName::Kernel => SpaceKind::Kernel,
        SpaceName::Nn => SpaceKind::NeuralNet,
    };
    let n_samples = args.samples.unwrap_or(args.preset.default_samples(kind));
    let mut space = SpaceConfig::from_preset(args.preset, kind, seed);
    match &mut space {
        SpaceConfig::Kernel { bandwidth, solver } => {
            if args.width.is_some() || args.depth.is_some() || args.adam_lr.is_some() {
                return Err(Failure::Usage("--width, --depth and --adam-lr apply to --space nn".into()));
            }
            if let Some(b) = args.bandwidth {
                *bandwidth = b;
            }
            if args.exact {
                *solver = KernelSolver::Exact { jitter: args.jitter.unwrap_or(DEFAULT_JITTER) };
            } else if let KernelSolver::Sgd { sgd } = solver {
                if args.jitter.is_some() {
                    return Err(Failure::Usage("--jitter needs --exact".into()));
                }
                sgd.lr_alpha = args.lr_alpha.unwrap_or(sgd.lr_alpha);
                sgd.lr_a = args.lr_a.unwrap_or(sgd.lr_a);
                sgd.batch_size = args.batch.unwrap_or(sgd.batch_size);
                sgd.epochs = args.epochs.unwrap_or(sgd.epochs);
                sgd.group_size = args.group.unwrap_or(sgd.group_size);
                match args.reduction {
                    Some(ReductionArg::Sum) => sgd.reduction = GradientReduction::Sum,
                    Some(ReductionArg::Mean) => sgd.reduction = GradientReduction::Mean,
                    None => {}
                }
            }
        }
        SpaceConfig::NeuralNet(nn) => {
            let kernel_only = args.bandwidth.is_some()
                || args.lr_alpha.is_some()
                || args.lr_a.is_some()
                || args.group.is_some()
                || args.reduction.is_some()
                || args.exact
                || args.jitter.is_some();
            if kernel_only {
                return Err(Failure::Usage("kernel flags do not apply to --space nn".into()));
            }
            nn.hidden_width = args.width.unwrap_or(nn.hidden_width);
            nn.hidden_layers = args.depth.unwrap_or(nn.hidden_layers);
            nn.train.adam.lr = args.adam_lr.unwrap_or(nn.train.adam.lr);
            nn.train.epochs = args.epochs.unwrap_or(nn.train.epochs);
            nn.train.batch_size = args.batch.unwrap_or(nn.train.batch_size);
        }
    }
    Ok((space, n_samples))
}

fn estimate_config(args: &EstimateArgs) -> EstimateConfig {
    let target = match (args.epsilon, args.accuracy) {
        (Some(e), _) => Target::Epsilon(e),
        (None, Some(a)) => Target::Accuracy(a),
        (None, None) => unreachable!("clap requires one target"),
    };
    EstimateConfig {
        target,
        fit: match args.fit {
            FitArg::Mom => FitMethod::Mom,
            FitArg::Mle => FitMethod::Mle,
        },
        tail: args.tail,
        bins: args.bins,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Run(Error::Io { path: path.to_path_buf(), source: e }))
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenerateTask { task, out } => {
            let cfg = task_config(&task, Preset::Desk)?;
            let (data, manifest) = generate_task(&cfg)?;
            let out = out.unwrap_or_else(|| data_root().join(cfg.name()));
            write_dataset(&out, &data, &manifest)?;
            println!("{}", out.display());
        }
        Command::Sample { data, space, seed, out } => {
            let (space, n_samples) = space_config(&space, seed)?;
            let (dataset, _) = read_dataset(&data)?;
            let t = Instant::now();
            let (samples, mut manifest) = sample_hypotheses(&dataset, &space, n_samples, seed)?;
            manifest.config["wall_time_secs"] = t.elapsed().as_secs_f64().into();
            let out = out.unwrap_or_else(|| data.join("samples"));
            write_samples(&out, &samples, &manifest)?;
            println!("{}", out.display());
        }
        Command::Estimate { data, samples, opts, out } => {
            let (dataset, _) = read_dataset(&data)?;
            let (hyps, _) = read_samples(&samples)?;
            let est = estimate(&dataset, &hyps, &estimate_config(&opts))?;
            let out = out.unwrap_or(samples);
            std::fs::create_dir_all(&out).map_err(|e| Failure::Run(Error::Io { path: out.clone(), source: e }))?;
            let json = est.report.to_json()?;
            write_text(&out.join(BIAS_FILE), &json)?;
            write_histogram_csv(&out.join(HISTOGRAM_FILE), &est.histogram)?;
            print!("{json}");
        }
        Command::Pipeline { task, space, opts, out } => {
            let task_cfg = task_config(&task, space.preset)?;
            let (space_cfg, n_samples) = space_config(&space, task.seed)?;
            let cfg = PipelineConfig {
                task: task_cfg,
                space: space_cfg,
                n_samples,
                seed: task.seed,
                estimate: estimate_config(&opts),
            };
            let run = run_pipeline(&cfg, &command_line()).map_err(Failure::Phase)?;
            let out = out.unwrap_or_else(|| data_root().join("run"));
            write_run(&out, &run)?;
            print!("{}", run.estimate.report.to_json()?);
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest)?;
            let run = replay(&m).map_err(Failure::Phase)?;
            write_run(&out, &run)?;
            print!("{}", run.estimate.report.to_json()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Phase(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e.source))
        }
    }
}
