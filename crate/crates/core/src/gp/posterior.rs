//! Predictive moments, the PSD square root and pathwise draws.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};
use crate::samples::{HypothesisSamples, SampleSource};

/// Fraction of `trace(C)` above which clamped negative eigenvalues are logged.
pub const CLAMP_WARN_FRACTION: f64 = 0.01;
/// Largest training set [`exact_posterior`] will factorize.
pub const EXACT_MAX_TRAIN: usize = 4096;
pub const DEFAULT_JITTER: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PosteriorSolve {
    /// `N × k`
    pub alpha: DMatrix<f64>,
    /// `N × n`
    pub a: DMatrix<f64>,
    /// `n × k`
    pub mean: DMatrix<f64>,
    /// `n × n`, shared by all channels.
    pub cov_scalar: DMatrix<f64>,
    pub sqrt_cov: DMatrix<f64>,
    pub clamped_mass: f64,
    pub source: SampleSource,
}

impl PosteriorSolve {
    pub fn from_coefficients(
        alpha: DMatrix<f64>,
        a: DMatrix<f64>,
        data: &Dataset,
        spec: &KernelSpec,
        source: SampleSource,
    ) -> Result<Self> {
        let (mean, cov_scalar) = posterior_moments(&alpha, &a, data, spec)?;
        let (sqrt_cov, clamped_mass) = psd_sqrt(&cov_scalar)?;
        let trace = cov_scalar.trace();
        if clamped_mass > CLAMP_WARN_FRACTION * trace.abs() {
            log::warn!(
                "covariance is indefinite: clamped eigenvalue mass {clamped_mass:.3e} exceeds {:.0}% of trace {trace:.3e}",
                CLAMP_WARN_FRACTION * 100.0
            );
        }
        Ok(PosteriorSolve {
            alpha,
            a,
            mean,
            cov_scalar,
            sqrt_cov,
            clamped_mass,
            source,
        })
    }

    pub fn n_points(&self) -> usize {
        self.mean.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.mean.ncols()
    }
}

/// `mean = K(X̄,X)α`, `cov = κ(X̄,X̄) - κ(X̄,X)A`, symmetrized.
pub fn posterior_moments(
    alpha: &DMatrix<f64>,
    a: &DMatrix<f64>,
    data: &Dataset,
    spec: &KernelSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n_train, n_test) = (data.n_train(), data.n_test());
    if alpha.nrows() != n_train {
        return Err(Error::DimensionMismatch {
            context: "alpha rows",
            expected: n_train,
            got: alpha.nrows(),
        });
    }
    if alpha.ncols() != data.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "alpha columns",
            expected: data.output_dim(),
            got: alpha.ncols(),
        });
    }
    if a.shape() != (n_train, n_test) {
        return Err(Error::DimensionMismatch {
            context: "A shape (rows × cols)",
            expected: n_train * n_test,
            got: a.nrows() * a.ncols(),
        });
    }
    if data.test_x.dim() != data.train_x.dim() {
        return Err(Error::DimensionMismatch {
            context: "test input dimension",
            expected: data.train_x.dim(),
            got: data.test_x.dim(),
        });
    }
    let cross = gram(spec, &data.test_x, &data.train_x);
    let mean = &cross * alpha;
    let mut cov = gram(spec, &data.test_x, &data.test_x) - &cross * a;
    let t = cov.transpose();
    cov += t;
    cov *= 0.5;
    Ok((mean, cov))
}

/// Symmetric square root with negative eigenvalues clamped to zero.
/// Returns the root and `Σ max(0, -λᵢ)`.
pub fn psd_sqrt(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if !cov.is_square() {
        return Err(Error::DimensionMismatch {
            context: "psd_sqrt input (rows vs cols)",
            expected: cov.nrows(),
            got: cov.ncols(),
        });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(cov.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    let clamped_mass = eig.eigenvalues.iter().map(|&l| (-l).max(0.0)).sum();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let u = &eig.eigenvectors;
    let scaled = u * DMatrix::from_diagonal(&roots);
    let root = scaled * u.transpose();
    Ok((root, clamped_mass))
}

/// `S` pathwise draws `mean[:, c] + √C z_{s,c}` with independent `z` per
/// sample and channel. Normals are drawn sample-major, then channel, then point.
pub fn draw_samples(solve: &PosteriorSolve, n_samples: usize, seed: u64) -> Result<HypothesisSamples> {
    if n_samples == 0 {
        return Err(Error::invalid("samples", "S must be at least 1"));
    }
    let n = solve.n_points();
    let k = solve.n_channels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::zeros(n, n_samples * k);
    for col in 0..n_samples * k {
        for j in 0..n {
            z[(j, col)] = StandardNormal.sample(&mut rng);
        }
    }
    let noise = &solve.sqrt_cov * z;
    let mut values = Vec::with_capacity(n_samples * n * k);
    for s in 0..n_samples {
        for j in 0..n {
            for c in 0..k {
                values.push(solve.mean[(j, c)] + noise[(j, s * k + c)]);
            }
        }
    }
    HypothesisSamples::new(n_samples, n, k, values, seed, solve.source)
}

/// Direct solve with `K(X,X) + jitter·I` via Cholesky.
pub fn exact_posterior(data: &Dataset, spec: &KernelSpec, jitter: f64) -> Result<PosteriorSolve> {
    spec.validate()?;
    data.validate()?;
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::invalid("jitter", format!("must be nonnegative, got {jitter}")));
    }
    let n_train = data.n_train();
    if n_train > EXACT_MAX_TRAIN {
        return Err(Error::invalid(
            "n_train",
            format!("exact posterior supports at most {EXACT_MAX_TRAIN} training points, got {n_train}"),
        ));
    }
    let mut k = gram(spec, &data.train_x, &data.train_x);
    for i in 0..n_train {
        k[(i, i)] += jitter;
    }
    let chol = k.cholesky().ok_or(Error::Singular {
        jitter,
        suggested: (jitter * 100.0).max(DEFAULT_JITTER),
    })?;
    let alpha = chol.solve(&data.train_y);
    let a = chol.solve(&gram(spec, &data.train_x, &data.test_x));
    PosteriorSolve::from_coefficients(alpha, a, data, spec, SampleSource::ExactOracle)
}
