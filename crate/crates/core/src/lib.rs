//! Gaussian phase-space simulation of private distributed phase sensing.
//!
//! The crate builds continuous-variable resource states, encodes local phases,
//! computes quantum Fisher information matrices by several independent routes
//! and reports how much information about individual phases leaks beyond the
//! target linear function.

pub mod error;
pub mod fisher;
pub mod fock;
pub mod linalg;
pub mod measurement;
pub mod network;
pub mod optimize;
pub mod phase_space;
pub mod privacy;

pub use error::{Error, Result};
pub use fisher::{Convention, QfimResult};
pub use nalgebra::{Complex, DMatrix, DVector};
pub use network::{ClusterSpec, Edge, TreeSpec};
pub use phase_space::{GaussianState, SymplecticMap};
pub use privacy::{PrivacyReport, Regime};
