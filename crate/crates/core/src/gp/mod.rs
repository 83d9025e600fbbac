//! Interpolating kernel hypothesis space: coefficient fits, predictive
//! moments and pathwise posterior draws.

mod posterior;
mod sgd;

pub use posterior::{
    draw_samples, exact_posterior, posterior_moments, psd_sqrt, PosteriorSolve, CLAMP_WARN_FRACTION,
    DEFAULT_JITTER, EXACT_MAX_TRAIN,
};
pub use sgd::{
    auto_step_size, sgd_fit, sgd_fit_a, sgd_fit_alpha, FitTargets, GradientReduction, SgdConfig, SgdFit, StepSize,
    AUTO_STEP_PROBES, AUTO_STEP_SAFETY,
};
