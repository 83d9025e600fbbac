//! Loss distribution model: test losses, scaled non-central χ² fits, tail
//! probabilities and the bias estimate derived from them.

mod diagnostic;
mod fit;
mod ncx2;
pub mod special;
mod tail;

pub use diagnostic::{
    convergence_diagnostic, histogram, ks_one_sample, ks_p_value, ks_two_sample, write_histogram_csv,
    ConvergenceDiagnostic, HistogramBin,
};
pub use fit::{
    fit_mle, fit_mom, log_likelihood, sample_moments, test_losses, ChiSquaredFit, FitMethod, LossNormalization,
    LossSamples, LAMBDA_FLOOR, MIN_DOF, MLE_MAX_ITER, MLE_SIMPLEX_TOL,
};
pub use ncx2::{Ncx2, MIXTURE_CUTOFF};
pub use tail::{
    bias_of_model, chernoff_log_cdf, inductive_bias, log_cdf, sankaran_cdf, sankaran_terms, BiasEstimate, SankaranTerms, TailMode,
    CHERNOFF_SWITCH, EPSILON_FLOOR, EXACT_MAX_DOF, EXACT_MAX_LAMBDA,
};
