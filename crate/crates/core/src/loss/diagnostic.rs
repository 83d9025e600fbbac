//! Moment-convergence diagnostic, Kolmogorov–Smirnov tests and histogram export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::{ChiSquaredFit, LossSamples};
use crate::error::{Error, Result};

/// Number of raw moments tracked by the diagnostic.
pub const DIAGNOSTIC_MOMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostic {
    pub sizes: Vec<usize>,
    /// Raw moments `E[x], E[x²], E[x³]` averaged over the subsamples of each size.
    pub moment_estimates: Vec<[f64; DIAGNOSTIC_MOMENTS]>,
    pub full_moments: [f64; DIAGNOSTIC_MOMENTS],
    /// Per size, the largest (over moments) mean relative deviation of a
    /// subsample's moment from the full-sample moment.
    pub deviations: Vec<f64>,
    /// Least-squares slope of `ln deviation` against `ln size`, over sizes with
    /// nonzero deviation.
    pub slope: f64,
    pub sigma: f64,
    /// `√(r ln(2r/σ)) / n` for each size, the shape of the finite-sample term.
    pub bound_terms: Vec<f64>,
}

fn raw_moments(xs: &[f64]) -> [f64; DIAGNOSTIC_MOMENTS] {
    let n = xs.len() as f64;
    let mut m = [0.0; DIAGNOSTIC_MOMENTS];
    for &x in xs {
        let mut p = 1.0;
        for slot in m.iter_mut() {
            p *= x;
            *slot += p;
        }
    }
    m.map(|v| v / n)
}

/// Split a seeded permutation of the losses into `⌊S/nᵢ⌋` disjoint
/// subsamples per size and measure how far their moments stray from the
/// full-sample moments.
pub fn convergence_diagnostic(losses: &LossSamples, sizes: &[usize], sigma: f64, seed: u64) -> Result<ConvergenceDiagnostic> {
    let total = losses.len();
    if sizes.is_empty() {
        return Err(Error::invalid("sizes", "need at least one subsample size"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes", "must be strictly increasing"));
    }
    if sizes[0] == 0 {
        return Err(Error::invalid("sizes", "must be positive"));
    }
    if let Some(&big) = sizes.iter().find(|&&n| n > total) {
        return Err(Error::invalid("sizes", format!("size {big} exceeds the {total} available losses")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::invalid("sigma", format!("must lie in (0, 1), got {sigma}")));
    }
    let mut shuffled = losses.losses.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let full = raw_moments(&losses.losses);
    let r = DIAGNOSTIC_MOMENTS as f64;

    let mut moment_estimates = Vec::with_capacity(sizes.len());
    let mut deviations = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let chunks = total / n;
        let mut avg = [0.0; DIAGNOSTIC_MOMENTS];
        let mut dev = [0.0; DIAGNOSTIC_MOMENTS];
        for chunk in shuffled.chunks_exact(n).take(chunks) {
            let m = raw_moments(chunk);
            for i in 0..DIAGNOSTIC_MOMENTS {
                avg[i] += m[i] / chunks as f64;
                let scale = full[i].abs().max(f64::MIN_POSITIVE);
                dev[i] += if n == total { 0.0 } else { (m[i] - full[i]).abs() / scale / chunks as f64 };
            }
        }
        moment_estimates.push(avg);
        deviations.push(dev.iter().copied().fold(0.0, f64::max));
    }

    let points: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&deviations)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&n, &d)| ((n as f64).ln(), d.ln()))
        .collect();
    let slope = if points.len() >= 2 {
        let k = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let bound_terms = sizes
        .iter()
        .map(|&n| (r * (2.0 * r / sigma).ln()).sqrt() / n as f64)
        .collect();

    Ok(ConvergenceDiagnostic {
        sizes: sizes.to_vec(),
        moment_estimates,
        full_moments: full,
        deviations,
        slope,
        sigma,
        bound_terms,
    })
}

/// One-sample KS statistic `sup |F_n - F|`.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a KS statistic `d` at effective sample size `n`,
/// with the usual small-sample correction of the argument.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    /// Fitted density at the bin center.
    pub fitted_pdf: f64,
}

/// Equal-width histogram over `[min, max]` of the losses with the fitted density.
pub fn histogram(losses: &LossSamples, fit: &ChiSquaredFit, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::invalid("bins", "must be positive"));
    }
    let lo = losses.losses.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = losses.max();
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in &losses.losses {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let dist = fit.dist();
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let left = lo + i as f64 * width;
            let right = left + width;
            HistogramBin {
                bin_left: left,
                bin_right: right,
                count,
                fitted_pdf: dist.pdf(0.5 * (left + right)),
            }
        })
        .collect())
}

pub fn write_histogram_csv(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    writeln!(w, "bin_left,bin_right,count,fitted_pdf").map_err(io)?;
    for b in bins {
        writeln!(w, "{},{},{},{}", b.bin_left, b.bin_right, b.count, b.fitted_pdf).map_err(io)?;
    }
    w.flush().map_err(io)
}
