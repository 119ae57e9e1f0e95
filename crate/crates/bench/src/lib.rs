//! Shared fixtures for the benchmarks.

use cvpriv_core::network::build_tree_state;
use cvpriv_core::phase_space::{apply_loss, two_mode_squeezed};
use cvpriv_core::{GaussianState, TreeSpec};

pub fn tree(depth: u32, r: f64) -> GaussianState {
    build_tree_state(&TreeSpec::new(depth, r).expect("valid depth")).expect("tree builds")
}

pub fn lossy_pair(r: f64, eta: f64) -> GaussianState {
    apply_loss(&two_mode_squeezed(r), &[eta, eta]).expect("valid transmissivity")
}
