//! Statistical invariants that need whole-pipeline runs.

use bias_meter::gp::{draw_samples, exact_posterior, sgd_fit, FitTargets, PosteriorSolve, SgdConfig};
use bias_meter::kernel::KernelSpec;
use bias_meter::loss::{fit_mle, fit_mom, ks_one_sample, ks_p_value, ks_two_sample, test_losses};
use bias_meter::samples::SampleSource;
use bias_meter::tasks::{generate_pendulum_dataset, generate_synthetic_gp_task, SyntheticGpSpec};

fn synthetic(n_train: usize, n_test: usize, seed: u64) -> bias_meter::dataset::Dataset {
    let spec = SyntheticGpSpec { num_features: 4096, input_dim: 2, output_dim: 1, bandwidth: 1.0, seed };
    generate_synthetic_gp_task(&spec, n_train, n_test).unwrap()
}

/// Losses of exact posterior samples on a task drawn from the kernel's own
/// function space follow the fitted scaled non-central χ².
#[test]
fn synthetic_losses_pass_ks() {
    for seed in [1u64, 2, 3] {
        let data = synthetic(200, 40, seed);
        let spec = KernelSpec::rbf(1.0, 1).unwrap();
        let solve = exact_posterior(&data, &spec, 1e-8).unwrap();
        let samples = draw_samples(&solve, 3000, seed).unwrap();
        let losses = test_losses(&samples, &data).unwrap();
        let fit = fit_mle(&losses, &fit_mom(&losses).unwrap()).unwrap();
        let dist = fit.dist();
        let d = ks_one_sample(&losses.losses, |x| dist.cdf(x));
        let p = ks_p_value(d, losses.len() as f64);
        assert!(p >= 0.01, "seed {seed}: KS D = {d:.4}, p = {p:.4}");
    }
}

/// The posterior mean recovers targets that live in the function space.
#[test]
fn synthetic_task_is_realizable() {
    let spec = KernelSpec::rbf(1.0, 1).unwrap();
    let mut losses = Vec::new();
    for n_train in [10, 40, 160, 640] {
        let data = synthetic(n_train, 200, 7);
        let solve = exact_posterior(&data, &spec, 1e-8).unwrap();
        let err = (&solve.mean - &data.test_y).norm_squared() / data.n_test() as f64;
        losses.push(err);
    }
    let var = {
        let y = synthetic(10, 200, 7).test_y;
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64
    };
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
    assert!(losses[3] < 1e-3 * var, "{losses:?} vs target variance {var}");
}

/// Test-loss distributions after E and 2E epochs of SGD should barely move.
///
/// Fails with the desk defaults (KS ≈ 0.97): SGD is still far from converged
/// at E = 50, and the loss spread across hypotheses is much narrower than the
/// shift of the whole distribution between E and 2E.
#[test]
#[ignore = "known failure: KS distance is far above 0.05 at desk scale"]
fn pendulum_loss_distribution_stable_in_epochs() {
    let data = generate_pendulum_dataset(2000, 100, 0).unwrap();
    let spec = KernelSpec::rbf(1.0, 1).unwrap();
    let base = SgdConfig::default();
    let losses = |epochs: usize| {
        let cfg = SgdConfig { epochs, ..base };
        let fit = sgd_fit(&data, &spec, &cfg, FitTargets::BOTH).unwrap();
        let solve =
            PosteriorSolve::from_coefficients(fit.alpha.unwrap(), fit.a.unwrap(), &data, &spec, SampleSource::Kernel)
                .unwrap();
        test_losses(&draw_samples(&solve, 1000, 11).unwrap(), &data).unwrap().losses
    };
    let d = ks_two_sample(&losses(base.epochs), &losses(2 * base.epochs));
    assert!(d < 0.05, "KS distance {d:.3}");
}
