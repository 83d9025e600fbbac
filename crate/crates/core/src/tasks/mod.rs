//! Task generators and loaders.

mod idx;
mod pendulum;
mod synthetic;

pub use idx::{
    load_idx, mnist_subset, one_hot, one_hot_labels, read_idx_images, read_idx_labels, standardize, subsample,
    write_idx_images, write_idx_labels, IdxImages, IdxPaths, IMAGES_MAGIC, LABELS_MAGIC, MNIST_CLASSES,
};
pub use pendulum::{
    bellman_residual, generate_pendulum_dataset, pendulum_cost, pendulum_dynamics, pendulum_optimal_control,
    pendulum_value, PendulumState, DEFAULT_N_TEST, DEFAULT_N_TRAIN, OMEGA_RANGE, THETA_RANGE,
};
pub use synthetic::{generate_from, generate_synthetic_gp_task, SyntheticGp, SyntheticGpSpec, DEFAULT_NUM_FEATURES};
