//! End-to-end runs: task generation, hypothesis sampling and bias
//! estimation, configured by presets and recorded in a replayable manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, Dataset, DatasetManifest, DatasetSizes};
use crate::error::{Error, Result};
use crate::gp::{draw_samples, exact_posterior, sgd_fit, FitTargets, GradientReduction, PosteriorSolve, SgdConfig, StepSize};
use crate::kernel::KernelSpec;
use crate::loss::{
    bias_of_model, fit_mle, fit_mom, histogram, inductive_bias, test_losses, write_histogram_csv, BiasEstimate,
    ChiSquaredFit, FitMethod, HistogramBin, LossSamples, TailMode,
};
use crate::nn::{sample_nn_hypotheses, AdamConfig, MlpArch, TrainConfig};
use crate::samples::{write_samples, HypothesisSamples, SampleSource, SamplesManifest};
use crate::tasks::{generate_pendulum_dataset, generate_synthetic_gp_task, mnist_subset, IdxPaths, SyntheticGpSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskConfig {
    Pendulum {
        n_train: usize,
        n_test: usize,
        seed: u64,
    },
    SyntheticGp {
        n_train: usize,
        n_test: usize,
        #[serde(flatten)]
        spec: SyntheticGpSpec,
    },
    MnistSubset {
        n_train: usize,
        n_test: usize,
        seed: u64,
        standardize: bool,
        idx_dir: PathBuf,
    },
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Pendulum { .. } => "pendulum",
            TaskConfig::SyntheticGp { .. } => "synthetic-gp",
            TaskConfig::MnistSubset { .. } => "mnist-subset",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            TaskConfig::Pendulum { seed, .. } | TaskConfig::MnistSubset { seed, .. } => *seed,
            TaskConfig::SyntheticGp { spec, .. } => spec.seed,
        }
    }
}

pub fn generate_task(cfg: &TaskConfig) -> Result<(Dataset, DatasetManifest)> {
    let data = match cfg {
        TaskConfig::Pendulum { n_train, n_test, seed } => generate_pendulum_dataset(*n_train, *n_test, *seed)?,
        TaskConfig::SyntheticGp { n_train, n_test, spec } => generate_synthetic_gp_task(spec, *n_train, *n_test)?,
        TaskConfig::MnistSubset { n_train, n_test, seed, standardize, idx_dir } => {
            mnist_subset(&IdxPaths::in_dir(idx_dir), *n_train, *n_test, *seed, *standardize)?
        }
    };
    let manifest = DatasetManifest {
        task: cfg.name().to_string(),
        seed: cfg.seed(),
        sizes: DatasetSizes::of(&data),
        generator: serde_json::to_value(cfg)?,
    };
    Ok((data, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Desk,
    FullPendulum,
    FullMnist,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::FullPendulum => "paper-pendulum",
            Preset::FullMnist => "paper-mnist",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper-pendulum" => Ok(Preset::FullPendulum),
            "paper-mnist" => Ok(Preset::FullMnist),
            other => Err(Error::invalid("preset", format!("unknown preset `{other}` (desk, paper-pendulum, paper-mnist)"))),
        }
    }
}

impl Preset {
    pub fn kernel_sgd(self, seed: u64) -> SgdConfig {
        match self {
            Preset::Desk => SgdConfig { seed, ..SgdConfig::default() },
            Preset::FullPendulum => SgdConfig {
                lr_alpha: StepSize::Fixed(1e-3),
                lr_a: StepSize::Fixed(1e-4),
                batch_size: 64,
                epochs: 500,
                group_size: 1024,
                seed,
                reduction: GradientReduction::Mean,
            },
            Preset::FullMnist => SgdConfig {
                lr_alpha: StepSize::Fixed(1e-4),
                lr_a: StepSize::Fixed(1e-5),
                batch_size: 128,
                epochs: 20,
                group_size: 2048,
                seed,
                reduction: GradientReduction::Mean,
            },
        }
    }

    /// `(hidden_width, hidden_layers, training)`.
    pub fn nn(self, seed: u64) -> NnSpace {
        let train = TrainConfig { seed, ..TrainConfig::default() };
        match self {
            Preset::Desk => NnSpace { hidden_width: 64, hidden_layers: 3, train },
            Preset::FullPendulum | Preset::FullMnist => NnSpace { hidden_width: 512, hidden_layers: 10, train },
        }
    }

    pub fn default_samples(self, space: SpaceKind) -> usize {
        match (self, space) {
            (Preset::Desk, _) => 1000,
            (_, SpaceKind::Kernel) => 100_000,
            (_, SpaceKind::NeuralNet) => 100,
        }
    }

    pub fn task(self, seed: u64, idx_dir: Option<PathBuf>) -> Result<TaskConfig> {
        Ok(match self {
            Preset::Desk => TaskConfig::Pendulum { n_train: 2000, n_test: 100, seed },
            Preset::FullPendulum => TaskConfig::Pendulum { n_train: 10_000, n_test: 100, seed },
            Preset::FullMnist => TaskConfig::MnistSubset {
                n_train: 60_000,
                n_test: 10_000,
                seed,
                standardize: false,
                idx_dir: idx_dir.ok_or_else(|| Error::invalid("idx_dir", "mnist-subset needs the IDX directory"))?,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Kernel,
    NeuralNet,
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(SpaceKind::Kernel),
            "nn" | "neural_net" | "neural-net" => Ok(SpaceKind::NeuralNet),
            other => Err(Error::invalid("space", format!("unknown hypothesis space `{other}` (kernel, nn)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum KernelSolver {
    Sgd { sgd: SgdConfig },
    Exact { jitter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnSpace {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub train: TrainConfig,
}

impl NnSpace {
    pub fn arch(&self, data: &Dataset) -> MlpArch {
        MlpArch {
            input_dim: data.input_dim(),
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            output_dim: data.output_dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceConfig {
    Kernel {
        bandwidth: f64,
        #[serde(flatten)]
        solver: KernelSolver,
    },
    NeuralNet(NnSpace),
}

impl SpaceConfig {
    pub fn kind(&self) -> SpaceKind {
        match self {
            SpaceConfig::Kernel { .. } => SpaceKind::Kernel,
            SpaceConfig::NeuralNet(_) => SpaceKind::NeuralNet,
        }
    }

    pub fn from_preset(preset: Preset, kind: SpaceKind, seed: u64) -> Self {
        match kind {
            SpaceKind::Kernel => SpaceConfig::Kernel {
                bandwidth: 1.0,
                solver: KernelSolver::Sgd { sgd: preset.kernel_sgd(seed) },
            },
            SpaceKind::NeuralNet => SpaceConfig::NeuralNet(preset.nn(seed)),
        }
    }
}

/// Draw `n_samples` hypotheses and record how they were produced. `seed`
/// drives the posterior draws (kernel) or the per-network seeds (NN).
pub fn sample_hypotheses(
    data: &Dataset,
    space: &SpaceConfig,
    n_samples: usize,
    seed: u64,
) -> Result<(HypothesisSamples, SamplesManifest)> {
    match space {
        SpaceConfig::Kernel { bandwidth, solver } => {
            let spec = KernelSpec::rbf(*bandwidth, data.output_dim())?;
            let (solve, fit) = match solver {
                KernelSolver::Sgd { sgd } => {
                    let fit = sgd_fit(data, &spec, sgd, FitTargets::BOTH)?;
                    let (alpha, a) = (fit.alpha.clone().expect("alpha fitted"), fit.a.clone().expect("A fitted"));
                    (PosteriorSolve::from_coefficients(alpha, a, data, &spec, SampleSource::Kernel)?, Some(fit))
                }
                KernelSolver::Exact { jitter } => (exact_posterior(data, &spec, *jitter)?, None),
            };
            let samples = draw_samples(&solve, n_samples, seed)?;
            let mut manifest = SamplesManifest::for_samples(&samples);
            manifest.clamped_mass = Some(solve.clamped_mass);
            manifest.config = serde_json::json!({ "kernel": spec, "space": space });
            if let Some(fit) = fit {
                manifest.residual_alpha = fit.residual_alpha;
                manifest.residual_a = fit.residual_a;
                manifest.config["resolved"] = serde_json::json!({
                    "lr_alpha": fit.lr_alpha,
                    "lr_a": fit.lr_a,
                    "steps": fit.steps,
                });
            }
            Ok((samples, manifest))
        }
        SpaceConfig::NeuralNet(nn) => {
            let arch = nn.arch(data);
            let train = TrainConfig { seed, ..nn.train };
            let out = sample_nn_hypotheses(&arch, data, n_samples, &train)?;
            let mut manifest = SamplesManifest::for_samples(&out.samples);
            manifest.arch = Some(serde_json::json!({ "init": "glorot_uniform", "activation": "relu", "arch": arch }));
            manifest.optimizer = Some(serde_json::to_value(train)?);
            manifest.final_train_losses = Some(out.final_train_losses);
            manifest.config = serde_json::json!({ "space": space });
            Ok((out.samples, manifest))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Epsilon(f64),
    /// Classification accuracy `a`, evaluated at error `1 - a`.
    Accuracy(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub target: Target,
    pub fit: FitMethod,
    pub tail: TailMode,
    pub bins: usize,
}

impl EstimateConfig {
    pub fn epsilon(epsilon: f64) -> Self {
        EstimateConfig { target: Target::Epsilon(epsilon), fit: FitMethod::Mle, tail: TailMode::Auto, bins: DEFAULT_BINS }
    }
}

/// Fit and bias in the serialized report form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub s: f64,
    pub k_dof: f64,
    pub lambda: f64,
    pub fit_method: FitMethod,
    pub log_likelihood: f64,
    pub epsilon: f64,
    pub bias_nats: f64,
    pub bias_bits: f64,
    pub tail_mode: TailMode,
}

impl BiasReport {
    pub fn new(fit: &ChiSquaredFit, bias: &BiasEstimate) -> Self {
        BiasReport {
            s: fit.s,
            k_dof: fit.k_dof,
            lambda: fit.lambda,
            fit_method: fit.fit_method,
            log_likelihood: fit.log_likelihood,
            epsilon: bias.epsilon,
            bias_nats: bias.bias_nats,
            bias_bits: bias.bias_bits,
            tail_mode: bias.tail_mode,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub losses: LossSamples,
    pub mom: ChiSquaredFit,
    pub fit: ChiSquaredFit,
    pub bias: BiasEstimate,
    pub report: BiasReport,
    pub histogram: Vec<HistogramBin>,
}

/// Losses, method-of-moments fit (refined by MLE when requested) and bias.
pub fn estimate(data: &Dataset, samples: &HypothesisSamples, cfg: &EstimateConfig) -> Result<Estimate> {
    let losses = test_losses(samples, data)?;
    if losses.len() < 3 {
        return Err(Error::invalid("samples", format!("need at least 3 hypotheses to fit, got {}", losses.len())));
    }
    let mom = fit_mom(&losses)?;
    let fit = match cfg.fit {
        FitMethod::Mom => mom,
        FitMethod::Mle => fit_mle(&losses, &mom)?,
    };
    let bias = match cfg.target {
        Target::Epsilon(e) => inductive_bias(&fit, e, cfg.tail)?,
        Target::Accuracy(a) => bias_of_model(a, &fit, cfg.tail)?,
    };
    let histogram = histogram(&losses, &fit, cfg.bins)?;
    Ok(Estimate { report: BiasReport::new(&fit, &bias), losses, mom, fit, bias, histogram })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: TaskConfig,
    pub space: SpaceConfig,
    pub n_samples: usize,
    pub seed: u64,
    pub estimate: EstimateConfig,
}

impl PipelineConfig {
    /// Preset defaults for `task`, with every seed derived from `seed`.
    pub fn preset(preset: Preset, kind: SpaceKind, task: TaskConfig, seed: u64, target: Target) -> Self {
        PipelineConfig {
            task,
            space: SpaceConfig::from_preset(preset, kind, seed),
            n_samples: preset.default_samples(kind),
            seed,
            estimate: EstimateConfig { target, ..EstimateConfig::epsilon(1.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Generate,
    Sample,
    Estimate,
    Write,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Generate => "generate",
            Phase::Sample => "sample",
            Phase::Estimate => "estimate",
            Phase::Write => "write",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{phase} phase failed: {source}")]
pub struct PhaseError {
    pub phase: Phase,
    #[source]
    pub source: Error,
}

trait InPhase<T> {
    fn phase(self, phase: Phase) -> std::result::Result<T, PhaseError>;
}

impl<T> InPhase<T> for Result<T> {
    fn phase(self, phase: Phase) -> std::result::Result<T, PhaseError> {
        self.map_err(|source| PhaseError { phase, source })
    }
}

/// Seconds spent in each phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub generate: f64,
    pub sample: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: PipelineConfig,
    pub dataset: DatasetManifest,
    pub sampling: SamplesManifest,
    pub mom_fit: ChiSquaredFit,
    pub bias: BiasReport,
    pub wall_times: PhaseTimes,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub dataset: Dataset,
    pub samples: HypothesisSamples,
    pub estimate: Estimate,
    pub manifest: RunManifest,
}

pub fn run_pipeline(cfg: &PipelineConfig, command: &str) -> std::result::Result<PipelineRun, PhaseError> {
    let t = Instant::now();
    let (dataset, data_manifest) = generate_task(&cfg.task).phase(Phase::Generate)?;
    let generate = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (samples, sampling) = sample_hypotheses(&dataset, &cfg.space, cfg.n_samples, cfg.seed).phase(Phase::Sample)?;
    let sample = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let est = estimate(&dataset, &samples, &cfg.estimate).phase(Phase::Estimate)?;
    let estimate_time = t.elapsed().as_secs_f64();

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        command: command.to_string(),
        config: cfg.clone(),
        dataset: data_manifest,
        sampling,
        mom_fit: est.mom,
        bias: est.report,
        wall_times: PhaseTimes { generate, sample, estimate: estimate_time },
    };
    Ok(PipelineRun { dataset, samples, estimate: est, manifest })
}

pub const RUN_MANIFEST_FILE: &str = "run.json";
pub const BIAS_FILE: &str = "bias.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// `dataset/`, `samples/`, `bias.json`, `histogram.csv` and `run.json` under `dir`.
pub fn write_run(dir: &Path, run: &PipelineRun) -> Result<()> {
    write_dataset(&dir.join("dataset"), &run.dataset, &run.manifest.dataset)?;
    write_samples(&dir.join("samples"), &run.samples, &run.manifest.sampling)?;
    let bias = dir.join(BIAS_FILE);
    fs::write(&bias, run.estimate.report.to_json()?).map_err(|e| Error::io(&bias, e))?;
    write_histogram_csv(&dir.join(HISTOGRAM_FILE), &run.estimate.histogram)?;
    let m = dir.join(RUN_MANIFEST_FILE);
    fs::write(&m, serde_json::to_string_pretty(&run.manifest)? + "\n").map_err(|e| Error::io(&m, e))
}

/// Re-run the configuration recorded in a manifest.
pub fn replay(manifest: &RunManifest) -> std::result::Result<PipelineRun, PhaseError> {
    run_pipeline(&manifest.config, &manifest.command)
}

/// Convenience for desk-scale NN configs with a custom optimizer.
pub fn nn_space(hidden_width: usize, hidden_layers: usize, lr: f64, epochs: usize, batch_size: usize, seed: u64) -> SpaceConfig {
    SpaceConfig::NeuralNet(NnSpace {
        hidden_width,
        hidden_layers,
        train: TrainConfig { adam: AdamConfig { lr, ..AdamConfig::default() }, epochs, batch_size, seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_kernel_cfg(seed: u64) -> PipelineConfig {
        let mut cfg = PipelineConfig::preset(
            Preset::Desk,
            SpaceKind::Kernel,
            TaskConfig::Pendulum { n_train: 200, n_test: 20, seed },
            seed,
            Target::Epsilon(1.0),
        );
        cfg.n_samples = 200;
        if let SpaceConfig::Kernel { solver: KernelSolver::Sgd { sgd }, .. } = &mut cfg.space {
            sgd.epochs = 10;
        }
        cfg
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [Preset::Desk, Preset::FullPendulum, Preset::FullMnist] {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("paper-cifar".parse::<Preset>(), Err(Error::InvalidParameter { .. })));
        let s = Preset::FullPendulum.kernel_sgd(0);
        assert_eq!((s.lr_alpha, s.lr_a, s.batch_size, s.epochs), (StepSize::Fixed(1e-3), StepSize::Fixed(1e-4), 64, 500));
        assert_eq!(Preset::FullMnist.nn(0).hidden_layers, 10);
        assert!(Preset::FullMnist.task(0, None).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small_kernel_cfg(3);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
        let nn = PipelineConfig { space: nn_space(8, 2, 1e-3, 2, 32, 1), ..cfg };
        let text = serde_json::to_string(&nn).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), nn);
        let synth = TaskConfig::SyntheticGp {
            n_train: 10,
            n_test: 5,
            spec: SyntheticGpSpec { num_features: 16, input_dim: 2, output_dim: 1, bandwidth: 1.0, seed: 4 },
        };
        let text = serde_json::to_string(&synth).unwrap();
        assert!(text.contains("\"task\":\"synthetic-gp\""));
        assert_eq!(serde_json::from_str::<TaskConfig>(&text).unwrap(), synth);
    }

    #[test]
    fn report_fields() {
        let run = run_pipeline(&small_kernel_cfg(1), "test").unwrap();
        let json: serde_json::Value = serde_json::from_str(&run.estimate.report.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["s", "k_dof", "lambda", "fit_method", "log_likelihood", "epsilon", "bias_nats", "bias_bits", "tail_mode"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(keys.len(), 9);
        assert!(run.manifest.sampling.residual_alpha.is_some());
    }

    #[test]
    fn accuracy_target_uses_error_rate() {
        let mut cfg = small_kernel_cfg(2);
        cfg.estimate.target = Target::Accuracy(0.9);
        let run = run_pipeline(&cfg, "test").unwrap();
        assert!((run.estimate.bias.epsilon - 0.1).abs() < 1e-15);
    }

    #[test]
    fn epsilon_above_max_loss_is_nearly_free() {
        let mut cfg = small_kernel_cfg(4);
        cfg.estimate.target = Target::Epsilon(1e6);
        let run = run_pipeline(&cfg, "test").unwrap();
        assert!(run.estimate.report.bias_bits <= 0.1);
    }

    #[test]
    fn replay_reproduces_bias_exactly() {
        let run = run_pipeline(&small_kernel_cfg(5), "test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &run).unwrap();
        let manifest = RunManifest::read(&dir.path().join(RUN_MANIFEST_FILE)).unwrap();
        let again = replay(&manifest).unwrap();
        assert_eq!(again.estimate.report.to_json().unwrap(), run.estimate.report.to_json().unwrap());
        assert_eq!(again.estimate.report.bias_bits, run.estimate.report.bias_bits);
    }

    #[test]
    fn failures_name_their_phase() {
        let mut cfg = small_kernel_cfg(6);
        cfg.task = TaskConfig::Pendulum { n_train: 0, n_test: 5, seed: 0 };
        assert_eq!(run_pipeline(&cfg, "t").unwrap_err().phase, Phase::Generate);
        let mut cfg = small_kernel_cfg(6);
        cfg.n_samples = 2;
        assert_eq!(run_pipeline(&cfg, "t").unwrap_err().phase, Phase::Estimate);
        let mut cfg = small_kernel_cfg(6);
        cfg.space = SpaceConfig::Kernel { bandwidth: 1.0, solver: KernelSolver::Sgd { sgd: SgdConfig { lr_alpha: StepSize::Fixed(1e6), ..SgdConfig::default() } } };
        let err = run_pipeline(&cfg, "t").unwrap_err();
        assert_eq!(err.phase, Phase::Sample);
        assert!(err.source.is_numerical());
    }
}
