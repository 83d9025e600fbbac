//! Mini-batch SGD for the interpolation coefficients.
//!
//! `α` minimizes `‖Y - K(X,X)α‖²` and `A` minimizes `‖K(X,X̄) - K(X,X)A‖_F²`.
//! For a batch `b` both share the update form
//! `W ← W - η·2·K(X, x_b)·(K(x_b, X)·W - T_b)`, so they are fitted in one
//! pass that reuses the kernel block `K(X, x_b)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram, kernel_matmul_chunked, KernelSpec, PointSet};

/// Safety factor applied to the per-batch stability limit by [`StepSize::Auto`].
pub const AUTO_STEP_SAFETY: f64 = 0.5;
/// Number of batches probed when resolving [`StepSize::Auto`].
pub const AUTO_STEP_PROBES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `AUTO_STEP_SAFETY / max_b σ_max(K(X, x_b))²`, probed over a few batches.
    Auto,
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Fixed(v) => write!(f, "{v}"),
            StepSize::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for StepSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(StepSize::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected a number or `auto`, got `{s}`"))?;
        if v > 0.0 && v.is_finite() {
            Ok(StepSize::Fixed(v))
        } else {
            Err(format!("step size must be positive, got {v}"))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepSizeRepr {
    Number(f64),
    Text(String),
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            StepSize::Fixed(v) => StepSizeRepr::Number(v),
            StepSize::Auto => StepSizeRepr::Text("auto".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match StepSizeRepr::deserialize(d)? {
            StepSizeRepr::Number(v) => Ok(StepSize::Fixed(v)),
            StepSizeRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How the per-example gradient terms of a batch are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientReduction {
    /// Sum over the batch, the literal `2·K(X,x)(K(x,X)α - y)`.
    Sum,
    /// Divide the summed gradient by the batch size.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr_alpha: StepSize,
    pub lr_a: StepSize,
    pub batch_size: usize,
    pub epochs: usize,
    pub group_size: usize,
    pub seed: u64,
    pub reduction: GradientReduction,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr_alpha: StepSize::Auto,
            lr_a: StepSize::Auto,
            batch_size: 64,
            epochs: 50,
            group_size: 1024,
            seed: 0,
            reduction: GradientReduction::Sum,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [("lr_alpha", self.lr_alpha), ("lr_a", self.lr_a)] {
            if let StepSize::Fixed(v) = lr {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(name, format!("must be positive, got {v}")));
                }
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if self.group_size == 0 {
            return Err(Error::invalid("group_size", "must be positive"));
        }
        Ok(())
    }

    /// Optimization steps `T = epochs · ⌈N / batch_size⌉`.
    pub fn steps(&self, n_train: usize) -> usize {
        self.epochs * n_train.div_ceil(self.batch_size)
    }
}

/// Output of a coefficient fit, with the diagnostics the run manifest records.
#[derive(Debug, Clone)]
pub struct SgdFit {
    /// `N × k`, present when α was fitted.
    pub alpha: Option<DMatrix<f64>>,
    /// `N × n`, present when A was fitted.
    pub a: Option<DMatrix<f64>>,
    /// `‖Y - K(X,X)α‖_F`.
    pub residual_alpha: Option<f64>,
    /// `‖K(X,X̄) - K(X,X)A‖_F`.
    pub residual_a: Option<f64>,
    pub lr_alpha: f64,
    pub lr_a: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitTargets {
    pub alpha: bool,
    pub a: bool,
}

impl FitTargets {
    pub const BOTH: FitTargets = FitTargets { alpha: true, a: true };
}

fn check_inputs(data: &Dataset, spec: &KernelSpec, cfg: &SgdConfig) -> Result<()> {
    spec.validate()?;
    cfg.validate()?;
    data.validate()?;
    if spec.output_dim != data.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "kernel output_dim vs targets",
            expected: spec.output_dim,
            got: data.output_dim(),
        });
    }
    Ok(())
}

/// Resolve [`StepSize::Auto`] from the largest squared singular value of the
/// kernel block over the first few batches of a seeded permutation.
pub fn auto_step_size(
    train_x: &PointSet,
    spec: &KernelSpec,
    batch_size: usize,
    reduction: GradientReduction,
    seed: u64,
) -> Result<f64> {
    let n = train_x.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a070_57e9_0000);
    order.shuffle(&mut rng);
    let mut worst: f64 = 0.0;
    for batch in order.chunks(batch_size.max(1)).take(AUTO_STEP_PROBES) {
        let xb = train_x.select(batch)?;
        let block = gram(spec, train_x, &xb);
        let small = block.tr_mul(&block);
        let top = small
            .try_symmetric_eigen(1e-12, 10_000)
            .ok_or_else(|| Error::Numerical("eigendecomposition failed while probing the step size".into()))?
            .eigenvalues
            .max();
        worst = worst.max(top);
    }
    if !(worst > 0.0 && worst.is_finite()) {
        return Err(Error::Numerical("degenerate kernel block while probing the step size".into()));
    }
    let scale = match reduction {
        GradientReduction::Sum => 1.0,
        GradientReduction::Mean => batch_size.min(n) as f64,
    };
    Ok(AUTO_STEP_SAFETY * scale / worst)
}

fn resolve(lr: StepSize, auto: &mut Option<f64>, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
    match lr {
        StepSize::Fixed(v) => Ok(v),
        StepSize::Auto => {
            if auto.is_none() {
                *auto = Some(compute()?);
            }
            Ok(auto.unwrap())
        }
    }
}

/// `Σ_g K(x_b, X_g)·W_g` with the training set split into groups.
fn grouped_forward(block: &DMatrix<f64>, w: &DMatrix<f64>, group_size: usize) -> DMatrix<f64> {
    let n = block.nrows();
    let mut out = DMatrix::zeros(block.ncols(), w.ncols());
    let mut start = 0;
    while start < n {
        let len = group_size.min(n - start);
        out.gemm_tr(1.0, &block.rows(start, len), &w.rows(start, len), 1.0);
        start += len;
    }
    out
}

/// Fit α and/or A by mini-batch SGD. Batches are a fresh seeded shuffle of the
/// training set each epoch, shared by every channel and by both problems.
pub fn sgd_fit(data: &Dataset, spec: &KernelSpec, cfg: &SgdConfig, targets: FitTargets) -> Result<SgdFit> {
    check_inputs(data, spec, cfg)?;
    let n_train = data.n_train();
    let n_test = data.n_test();
    let x = &data.train_x;

    let mut auto = None;
    let probe = || auto_step_size(x, spec, cfg.batch_size, cfg.reduction, cfg.seed);
    let lr_alpha = if targets.alpha {
        resolve(cfg.lr_alpha, &mut auto, probe)?
    } else {
        0.0
    };
    let probe = || auto_step_size(x, spec, cfg.batch_size, cfg.reduction, cfg.seed);
    let lr_a = if targets.a {
        resolve(cfg.lr_a, &mut auto, probe)?
    } else {
        0.0
    };

    let mut alpha = targets.alpha.then(|| DMatrix::zeros(n_train, data.output_dim()));
    let mut a = targets.a.then(|| DMatrix::zeros(n_train, n_test));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut step = 0usize;
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let xb = x.select(batch)?;
            // N × B
            let block = gram(spec, x, &xb);
            let scale = match cfg.reduction {
                GradientReduction::Sum => 2.0,
                GradientReduction::Mean => 2.0 / batch.len() as f64,
            };

            if let Some(alpha) = alpha.as_mut() {
                let mut resid = grouped_forward(&block, alpha, cfg.group_size);
                for (r, &i) in batch.iter().enumerate() {
                    for c in 0..resid.ncols() {
                        resid[(r, c)] -= data.train_y[(i, c)];
                    }
                }
                alpha.gemm(-lr_alpha * scale, &block, &resid, 1.0);
                if alpha.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence {
                        step,
                        lr: lr_alpha,
                        what: "alpha",
                    });
                }
            }

            if let Some(a) = a.as_mut() {
                let mut resid = grouped_forward(&block, a, cfg.group_size);
                resid -= gram(spec, &xb, &data.test_x);
                a.gemm(-lr_a * scale, &block, &resid, 1.0);
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { step, lr: lr_a, what: "A" });
                }
            }
        }
    }

    let residual_alpha = match &alpha {
        Some(alpha) => {
            let fitted = kernel_matmul_chunked(spec, x, x, alpha, cfg.group_size)?;
            Some((&data.train_y - fitted).norm())
        }
        None => None,
    };
    let residual_a = match &a {
        Some(a) => {
            let fitted = kernel_matmul_chunked(spec, x, x, a, cfg.group_size)?;
            Some((gram(spec, x, &data.test_x) - fitted).norm())
        }
        None => None,
    };

    Ok(SgdFit {
        alpha,
        a,
        residual_alpha,
        residual_a,
        lr_alpha,
        lr_a,
        steps: step,
    })
}

/// `α ≈ argmin ‖Y - K(X,X)α‖²`, shape `N × k`.
pub fn sgd_fit_alpha(data: &Dataset, spec: &KernelSpec, cfg: &SgdConfig) -> Result<DMatrix<f64>> {
    let fit = sgd_fit(data, spec, cfg, FitTargets { alpha: true, a: false })?;
    Ok(fit.alpha.expect("alpha requested"))
}

/// `A ≈ argmin ‖K(X,X̄) - K(X,X)A‖_F²`, shape `N × n`.
pub fn sgd_fit_a(data: &Dataset, spec: &KernelSpec, cfg: &SgdConfig) -> Result<DMatrix<f64>> {
    let fit = sgd_fit(data, spec, cfg, FitTargets { alpha: false, a: true })?;
    Ok(fit.a.expect("A requested"))
}
