//! Inverted pendulum with the closed-form LQ-style solution.
//!
//! Dynamics `θ̇ = ω`, `ω̇ = sin θ + u`; cost
//! `C = ½u² + 24θ² + (8θ + 4ω)(θ - sin θ)`; value `V = 14θ² + 8θω + 2ω²`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::PointSet;

pub const THETA_RANGE: (f64, f64) = (-PI, PI);
pub const OMEGA_RANGE: (f64, f64) = (-1.0, 1.0);
pub const DEFAULT_N_TRAIN: usize = 10_000;
pub const DEFAULT_N_TEST: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub omega: f64,
}

/// `(θ̇, ω̇)`.
pub fn pendulum_dynamics(s: PendulumState, u: f64) -> (f64, f64) {
    (s.omega, s.theta.sin() + u)
}

pub fn pendulum_cost(u: f64, theta: f64, omega: f64) -> f64 {
    0.5 * u * u + 24.0 * theta * theta + (8.0 * theta + 4.0 * omega) * (theta - theta.sin())
}

pub fn pendulum_value(theta: f64, omega: f64) -> f64 {
    14.0 * theta * theta + 8.0 * theta * omega + 2.0 * omega * omega
}

pub fn pendulum_optimal_control(theta: f64, omega: f64) -> f64 {
    -8.0 * theta - 4.0 * omega
}

/// `∂V/∂θ·θ̇ + ∂V/∂ω·ω̇ + C` under the optimal control; zero analytically.
pub fn bellman_residual(theta: f64, omega: f64) -> f64 {
    let u = pendulum_optimal_control(theta, omega);
    let (theta_dot, omega_dot) = pendulum_dynamics(PendulumState { theta, omega }, u);
    let dv_dtheta = 28.0 * theta + 8.0 * omega;
    let dv_domega = 8.0 * theta + 4.0 * omega;
    dv_dtheta * theta_dot + dv_domega * omega_dot + pendulum_cost(u, theta, omega)
}

fn draw_states(rng: &mut ChaCha8Rng, count: usize) -> Result<(PointSet, DMatrix<f64>)> {
    let mut xs = Vec::with_capacity(2 * count);
    let mut ys = Vec::with_capacity(count);
    for _ in 0..count {
        let theta = rng.random_range(THETA_RANGE.0..=THETA_RANGE.1);
        let omega = rng.random_range(OMEGA_RANGE.0..=OMEGA_RANGE.1);
        xs.extend_from_slice(&[theta, omega]);
        ys.push(pendulum_optimal_control(theta, omega));
    }
    Ok((PointSet::new(count, 2, xs)?, DMatrix::from_vec(count, 1, ys)))
}

/// States uniform on `[-π, π] × [-1, 1]`, targets the optimal control.
pub fn generate_pendulum_dataset(n_train: usize, n_test: usize, seed: u64) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("sizes", "n_train and n_test must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_x, train_y) = draw_states(&mut rng, n_train)?;
    let (test_x, test_y) = draw_states(&mut rng, n_test)?;
    Dataset::new("pendulum", train_x, train_y, test_x, test_y)
}
