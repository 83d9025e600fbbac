//! Regression task whose targets are an explicit draw from the RBF-kernel
//! function space, built from random Fourier features.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::PointSet;

pub const DEFAULT_NUM_FEATURES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGpSpec {
    pub num_features: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Kernel bandwidth γ the features approximate.
    pub bandwidth: f64,
    pub seed: u64,
}

impl SyntheticGpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_features == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid("synthetic spec", "P, input_dim and output_dim must be at least 1"));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        Ok(())
    }
}

/// Materialized feature map `φ_p(x) = √2 cos(w_p·x + b_p)` with
/// `w_p ~ N(0, γI)`, `b_p ~ U[0, 2π)`, and weights `θ* ~ N(0, I/P)`, so that
/// `φ(x)·φ(x')/P → κ(x, x')` and targets have prior covariance ≈ κ.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGp {
    pub spec: SyntheticGpSpec,
    /// `P × d`
    pub w: DMatrix<f64>,
    pub b: Vec<f64>,
    /// `P × k`
    pub theta_star: DMatrix<f64>,
}

impl SyntheticGp {
    pub fn sample(spec: &SyntheticGpSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let p = spec.num_features;
        let freq = Normal::new(0.0, spec.bandwidth.sqrt()).expect("valid sd");
        let w = DMatrix::from_fn(p, spec.input_dim, |_, _| freq.sample(&mut rng));
        let b = (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let weight = Normal::new(0.0, (1.0 / p as f64).sqrt()).expect("valid sd");
        let theta_star = DMatrix::from_fn(p, spec.output_dim, |_, _| weight.sample(&mut rng));
        Ok(SyntheticGp { spec: *spec, w, b, theta_star })
    }

    /// `|X| × P` feature matrix.
    pub fn features(&self, x: &PointSet) -> Result<DMatrix<f64>> {
        if x.dim() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                context: "synthetic task inputs",
                expected: self.spec.input_dim,
                got: x.dim(),
            });
        }
        let p = self.spec.num_features;
        Ok(DMatrix::from_fn(x.len(), p, |i, f| {
            let row = x.row(i);
            let phase: f64 = (0..row.len()).map(|c| self.w[(f, c)] * row[c]).sum::<f64>() + self.b[f];
            std::f64::consts::SQRT_2 * phase.cos()
        }))
    }

    pub fn targets(&self, x: &PointSet) -> Result<DMatrix<f64>> {
        Ok(self.features(x)? * &self.theta_star)
    }
}

/// Inputs uniform on `[0, 1]^d`, drawn after the feature map from the same stream.
pub fn generate_synthetic_gp_task(spec: &SyntheticGpSpec, n_train: usize, n_test: usize) -> Result<Dataset> {
    let gp = SyntheticGp::sample(spec)?;
    generate_from(&gp, n_train, n_test)
}

pub fn generate_from(gp: &SyntheticGp, n_train: usize, n_test: usize) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("sizes", "n_train and n_test must be at least 1"));
    }
    let d = gp.spec.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(gp.spec.seed ^ 0x1a9b_5e7d_0000_0001);
    let mut cube = |n: usize| PointSet::new(n, d, (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect());
    let train_x = cube(n_train)?;
    let test_x = cube(n_test)?;
    let train_y = gp.targets(&train_x)?;
    let test_y = gp.targets(&test_x)?;
    Dataset::new("synthetic-gp", train_x, train_y, test_x, test_y)
}
