//! Left-tail probability of the loss model and the resulting bias estimate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fit::ChiSquaredFit;
use super::special::{ln_norm_cdf, norm_cdf};
use crate::error::{Error, Result};

/// Auto mode uses the exact CDF up to these parameter values.
pub const EXACT_MAX_DOF: f64 = 20.0;
pub const EXACT_MAX_LAMBDA: f64 = 50.0;
/// Below this normal argument the Chernoff form `-y²/2` replaces `ln Φ(y)`.
pub const CHERNOFF_SWITCH: f64 = -6.0;

/// `ln Φ(y)` above the switch, `-y²/2` below it, capped at `ln Φ` of the
/// switch point. Uncapped, `-y²/2` sits 2.74 nats above `ln Φ(-6)` and the
/// bias would drop as ε decreases across the seam.
pub fn chernoff_log_cdf(y: f64) -> f64 {
    if y < CHERNOFF_SWITCH {
        (-0.5 * y * y).min(ln_norm_cdf(CHERNOFF_SWITCH))
    } else {
        ln_norm_cdf(y)
    }
}
/// Error used for a perfectly accurate model.
pub const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SankaranTerms {
    pub h: f64,
    pub p: f64,
    pub m: f64,
    /// Argument of Φ.
    pub y: f64,
}

/// Normal approximation to the χ²(k, λ) CDF at `z`.
pub fn sankaran_terms(z: f64, k: f64, lambda: f64) -> SankaranTerms {
    let a = k + lambda;
    let b = k + 2.0 * lambda;
    let h = 1.0 - (2.0 / 3.0) * a * (k + 3.0 * lambda) / (b * b);
    let p = b / (a * a);
    let m = (h - 1.0) * (1.0 - 3.0 * h);
    let num = (z.max(0.0) / a).powf(h) - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p));
    let den = h * (2.0 * p).sqrt() * (1.0 + 0.5 * m * p);
    SankaranTerms { h, p, m, y: num / den }
}

pub fn sankaran_cdf(z: f64, k: f64, lambda: f64) -> (f64, SankaranTerms) {
    let terms = sankaran_terms(z, k, lambda);
    (norm_cdf(terms.y), terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    Auto,
    Exact,
    Sankaran,
    SankaranChernoff,
}

impl FromStr for TailMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(TailMode::Auto),
            "exact" => Ok(TailMode::Exact),
            "sankaran" => Ok(TailMode::Sankaran),
            "chernoff" | "sankaran_chernoff" | "sankaran-chernoff" => Ok(TailMode::SankaranChernoff),
            other => Err(format!("unknown tail mode `{other}` (expected auto, exact, sankaran or chernoff)")),
        }
    }
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMode::Auto => "auto",
            TailMode::Exact => "exact",
            TailMode::Sankaran => "sankaran",
            TailMode::SankaranChernoff => "sankaran_chernoff",
        })
    }
}

/// `ln P(loss ≤ epsilon)` under the fit, and the branch that produced it.
///
/// `Sankaran` evaluates `ln Φ(y)` accurately at any depth; `SankaranChernoff`
/// switches to the capped `-y²/2` once `y < CHERNOFF_SWITCH`. `Auto` uses the exact
/// mixture CDF for small `k` and `λ`, otherwise Sankaran with the Chernoff tail.
pub fn log_cdf(epsilon: f64, fit: &ChiSquaredFit, mode: TailMode) -> (f64, TailMode) {
    let z = epsilon / fit.s;
    let mode = match mode {
        TailMode::Auto if fit.k_dof <= EXACT_MAX_DOF && fit.lambda <= EXACT_MAX_LAMBDA => TailMode::Exact,
        TailMode::Auto => TailMode::SankaranChernoff,
        m => m,
    };
    let value = match mode {
        TailMode::Exact => fit.dist().ln_cdf(epsilon),
        TailMode::Sankaran => ln_norm_cdf(sankaran_terms(z, fit.k_dof, fit.lambda).y),
        TailMode::SankaranChernoff => chernoff_log_cdf(sankaran_terms(z, fit.k_dof, fit.lambda).y),
        TailMode::Auto => unreachable!(),
    };
    let value = if value.is_nan() || value == f64::NEG_INFINITY {
        -f64::MAX
    } else {
        value.min(0.0)
    };
    (value, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub epsilon: f64,
    pub log_cdf: f64,
    pub bias_nats: f64,
    pub bias_bits: f64,
    pub tail_mode: TailMode,
}

/// Bias needed to reach test error `epsilon`: `-ln P(loss ≤ ε)`.
pub fn inductive_bias(fit: &ChiSquaredFit, epsilon: f64, mode: TailMode) -> Result<BiasEstimate> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("must be positive and finite, got {epsilon}")));
    }
    let (lc, used) = log_cdf(epsilon, fit, mode);
    let nats = (-lc).max(0.0);
    Ok(BiasEstimate {
        epsilon,
        log_cdf: lc,
        bias_nats: nats,
        bias_bits: nats / std::f64::consts::LN_2,
        tail_mode: used,
    })
}

/// Bias provided by a model at accuracy `a`, using error `1 - a`.
pub fn bias_of_model(accuracy: f64, fit: &ChiSquaredFit, mode: TailMode) -> Result<BiasEstimate> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::invalid("accuracy", format!("must lie in [0, 1], got {accuracy}")));
    }
    inductive_bias(fit, (1.0 - accuracy).max(EPSILON_FLOOR), mode)
}
