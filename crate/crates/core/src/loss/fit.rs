//! Test losses and scaled non-central χ² fits (moments and maximum likelihood).

use serde::{Deserialize, Serialize};

use super::ncx2::{unscaled_logpdf, Ncx2};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::samples::HypothesisSamples;

/// Lower bound applied to the fitted degrees of freedom.
pub const MIN_DOF: f64 = 1e-3;
/// Offset inside `ln(λ + LAMBDA_FLOOR)` for the MLE parametrization.
pub const LAMBDA_FLOOR: f64 = 1e-8;
pub const MLE_MAX_ITER: usize = 2000;
pub const MLE_SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNormalization {
    /// Squared error averaged over all `n·k` test entries.
    MeanPerElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSamples {
    pub losses: Vec<f64>,
    pub normalization: LossNormalization,
}

impl LossSamples {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::invalid("losses", "need at least one loss"));
        }
        if losses.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid("losses", "losses must be finite and nonnegative"));
        }
        Ok(LossSamples {
            losses,
            normalization: LossNormalization::MeanPerElement,
        })
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-hypothesis mean squared error over the test set.
pub fn test_losses(samples: &HypothesisSamples, data: &Dataset) -> Result<LossSamples> {
    let (n, k) = (data.n_test(), data.output_dim());
    if samples.n_points() != n {
        return Err(Error::DimensionMismatch {
            context: "sample points vs test set",
            expected: n,
            got: samples.n_points(),
        });
    }
    if samples.n_channels() != k {
        return Err(Error::DimensionMismatch {
            context: "sample channels vs targets",
            expected: k,
            got: samples.n_channels(),
        });
    }
    let norm = (n * k) as f64;
    let losses = (0..samples.n_samples())
        .map(|s| {
            let pred = samples.sample(s);
            let mut acc = 0.0;
            for j in 0..n {
                for c in 0..k {
                    let d = pred[j * k + c] - data.test_y[(j, c)];
                    acc += d * d;
                }
            }
            acc / norm
        })
        .collect();
    LossSamples::new(losses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mom,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredFit {
    pub s: f64,
    pub k_dof: f64,
    #[serde(rename = "lambda")]
    pub lambda: f64,
    pub fit_method: FitMethod,
    pub log_likelihood: f64,
}

impl ChiSquaredFit {
    pub fn dist(&self) -> Ncx2 {
        Ncx2::new(self.s, self.k_dof, self.lambda)
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        self.dist().logpdf(x)
    }
}

/// Mean, variance and third central moment (population normalization).
pub fn sample_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    (mean, m2 / n, m3 / n)
}

/// `Σ ln p(xᵢ)`; `-∞` for invalid parameters.
pub fn log_likelihood(dist: &Ncx2, xs: &[f64]) -> f64 {
    if !dist.is_valid() {
        return f64::NEG_INFINITY;
    }
    let ln_s = dist.s.ln();
    let mut total = 0.0;
    for &x in xs {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += unscaled_logpdf(x / dist.s, dist.k, dist.lambda) - ln_s;
    }
    total
}

fn check_fit_input(losses: &LossSamples) -> Result<()> {
    if losses.len() < 3 {
        return Err(Error::invalid("losses", format!("need at least 3 samples to fit, got {}", losses.len())));
    }
    Ok(())
}

/// Method of moments: match mean `s(k+λ)`, variance `s²(2k+4λ)` and third
/// central moment `s³(8k+24λ)`. Falls back to a central fit when the
/// noncentral solution does not exist.
pub fn fit_mom(losses: &LossSamples) -> Result<ChiSquaredFit> {
    check_fit_input(losses)?;
    let (m, v, t) = sample_moments(&losses.losses);
    if !(v > 0.0) || !(m > 0.0) {
        return Err(Error::Degenerate(format!("loss sample has mean {m:e} and variance {v:e}")));
    }
    // 8m·s² - 8v·s + t = 0, smaller root
    let disc = v * v - 0.5 * m * t;
    let noncentral = if disc >= 0.0 {
        let s = (v - disc.sqrt()) / (2.0 * m);
        let lambda = v / (2.0 * s * s) - m / s;
        (s > 0.0 && lambda >= 0.0 && s.is_finite()).then(|| (s, m / s - lambda, lambda))
    } else {
        None
    };
    let (s, k, lambda) = noncentral.unwrap_or_else(|| {
        let s = v / (2.0 * m);
        (s, m / s, 0.0)
    });
    let dist = Ncx2::new(s, k.max(MIN_DOF), lambda);
    Ok(ChiSquaredFit {
        s: dist.s,
        k_dof: dist.k,
        lambda: dist.lambda,
        fit_method: FitMethod::Mom,
        log_likelihood: log_likelihood(&dist, &losses.losses),
    })
}

fn to_params(x: &[f64; 3]) -> Ncx2 {
    Ncx2::new(x[0].exp(), x[1].exp(), (x[2].exp() - LAMBDA_FLOOR).max(0.0))
}

/// Maximum likelihood by Nelder–Mead over `(ln s, ln k, ln(λ + LAMBDA_FLOOR))`,
/// started from `init`. The result never has lower likelihood than `init`.
pub fn fit_mle(losses: &LossSamples, init: &ChiSquaredFit) -> Result<ChiSquaredFit> {
    check_fit_input(losses)?;
    let xs = &losses.losses;
    let start = init.dist();
    let init_ll = log_likelihood(&start, xs);
    if !init_ll.is_finite() {
        return Err(Error::Numerical(format!(
            "log-likelihood is not finite at the initial fit (s={}, k={}, λ={})",
            init.s, init.k_dof, init.lambda
        )));
    }
    let x0 = [start.s.ln(), start.k.ln(), (start.lambda + LAMBDA_FLOOR).ln()];
    let objective = |x: &[f64; 3]| {
        let ll = log_likelihood(&to_params(x), xs);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let (best, value) = nelder_mead(objective, x0, -init_ll);
    let dist = to_params(&best);
    Ok(ChiSquaredFit {
        s: dist.s,
        k_dof: dist.k,
        lambda: dist.lambda,
        fit_method: FitMethod::Mle,
        log_likelihood: -value,
    })
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
/// Stops when every vertex lies within `MLE_SIMPLEX_TOL` of the best one, or
/// after `MLE_MAX_ITER` iterations.
fn nelder_mead(f: impl Fn(&[f64; 3]) -> f64, x0: [f64; 3], f0: f64) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = vec![(x0, f0)];
    for i in 0..3 {
        let mut x = x0;
        x[i] += if x[i].abs() > 1.0 { 0.05 * x[i].abs() } else { 0.05 };
        simplex.push((x, f(&x)));
    }
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
    };
    for _ in 0..MLE_MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| (0..3).map(|i| (x[i] - best[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < MLE_SIMPLEX_TOL {
            break;
        }
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += x[i] / 3.0;
            }
        }
        let (worst, f_worst) = simplex[3];
        let reflected = lerp(&centroid, &worst, -1.0);
        let f_r = f(&reflected);
        if f_r < simplex[0].1 {
            let expanded = lerp(&centroid, &worst, -2.0);
            let f_e = f(&expanded);
            simplex[3] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < simplex[2].1 {
            simplex[3] = (reflected, f_r);
        } else {
            let (target, f_t) = if f_r < f_worst { (reflected, f_r) } else { (worst, f_worst) };
            let contracted = lerp(&centroid, &target, 0.5);
            let f_c = f(&contracted);
            if f_c < f_t {
                simplex[3] = (contracted, f_c);
            } else {
                for v in simplex.iter_mut().skip(1) {
                    let x = lerp(&best, &v.0, 0.5);
                    *v = (x, f(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}
