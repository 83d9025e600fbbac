//! Scaled non-central χ² distribution: density, CDF and sampler.
//!
//! `X = s·Y` with `Y ~ χ²(k, λ)`, evaluated as the Poisson(λ/2) mixture of
//! central χ²(k + 2j).

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use libm::lgamma as ln_gamma;

use super::special::{ln_gamma_p, log_sum_exp};

/// Terms smaller than `peak · MIXTURE_CUTOFF` end the mixture expansion.
pub const MIXTURE_CUTOFF: f64 = 1e-16;

/// Parameters of the scaled non-central χ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ncx2 {
    pub s: f64,
    pub k: f64,
    pub lambda: f64,
}

impl Ncx2 {
    pub fn new(s: f64, k: f64, lambda: f64) -> Self {
        Ncx2 { s, k, lambda }
    }

    pub fn is_valid(&self) -> bool {
        self.s > 0.0 && self.k > 0.0 && self.lambda >= 0.0 && self.s.is_finite() && self.k.is_finite() && self.lambda.is_finite()
    }

    pub fn mean(&self) -> f64 {
        self.s * (self.k + self.lambda)
    }

    pub fn variance(&self) -> f64 {
        self.s * self.s * (2.0 * self.k + 4.0 * self.lambda)
    }

    pub fn third_central_moment(&self) -> f64 {
        self.s.powi(3) * (8.0 * self.k + 24.0 * self.lambda)
    }

    /// Log density at `x`; `-∞` for `x ≤ 0`.
    pub fn logpdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let y = x / self.s;
        -self.s.ln() + unscaled_logpdf(y, self.k, self.lambda)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// `ln P(X ≤ x)` from the mixture of regularized incomplete gammas.
    pub fn ln_cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = x / self.s;
        let half_k = 0.5 * self.k;
        if self.lambda == 0.0 {
            return ln_gamma_p(half_k, 0.5 * z);
        }
        let mu = 0.5 * self.lambda;
        let ln_mu = mu.ln();
        let j_max = (mu + 12.0 * (mu + 1.0).sqrt() + 40.0).ceil() as usize;
        let terms: Vec<f64> = (0..=j_max)
            .map(|j| {
                let jf = j as f64;
                jf * ln_mu - mu - ln_gamma(jf + 1.0) + ln_gamma_p(half_k + jf, 0.5 * z)
            })
            .collect();
        log_sum_exp(&terms).min(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.ln_cdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let extra = if self.lambda > 0.0 {
            Poisson::new(0.5 * self.lambda).expect("positive rate").sample(rng)
        } else {
            0.0
        };
        let shape = 0.5 * self.k + extra;
        self.s * Gamma::new(shape, 2.0).expect("positive shape").sample(rng)
    }
}

/// Log of the χ²(k + 2j) density weighted by the Poisson(λ/2) mass at `j`.
fn ln_term(j: usize, y: f64, ln_y: f64, k: f64, mu: f64) -> f64 {
    let jf = j as f64;
    let half = 0.5 * k + jf;
    let poisson = if j == 0 { -mu } else { jf * mu.ln() - mu - ln_gamma(jf + 1.0) };
    poisson + (half - 1.0) * ln_y - 0.5 * y - half * std::f64::consts::LN_2 - ln_gamma(half)
}

/// Log density of the unscaled non-central χ²(k, λ) at `y > 0`.
///
/// Starts at the largest mixture term and walks outwards with the ratio
/// `t_{j+1}/t_j = λy / (2(j+1)(k+2j))` until terms drop below the cutoff.
pub(crate) fn unscaled_logpdf(y: f64, k: f64, lambda: f64) -> f64 {
    let ln_y = y.ln();
    if lambda == 0.0 {
        return ln_term(0, y, ln_y, k, 0.0);
    }
    let mu = 0.5 * lambda;
    let ratio = |j: f64| lambda * y / (2.0 * (j + 1.0) * (k + 2.0 * j));
    // terms increase while ratio(j) > 1: root of 2j² + (k+2)j + k - λy/2 = 0
    let b = k + 2.0;
    let disc = b * b - 8.0 * (k - 0.5 * lambda * y);
    let root = if disc > 0.0 { (-b + disc.sqrt()) / 4.0 } else { 0.0 };
    let peak = root.max(0.0).ceil() as usize;
    let ln_peak = ln_term(peak, y, ln_y, k, mu);

    let mut sum = 1.0;
    let mut t = 1.0;
    let mut j = peak as f64;
    loop {
        t *= ratio(j);
        if t < MIXTURE_CUTOFF || !t.is_finite() {
            break;
        }
        sum += t;
        j += 1.0;
    }
    let mut t = 1.0;
    let mut j = peak as f64;
    while j >= 1.0 {
        t /= ratio(j - 1.0);
        if t < MIXTURE_CUTOFF || !t.is_finite() {
            break;
        }
        sum += t;
        j -= 1.0;
    }
    ln_peak + sum.ln()
}
